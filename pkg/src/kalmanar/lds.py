"""Linear dynamical systems with Gaussian noise: validation and simulation.

A system is the tuple (G, F, v, W) together with the prior (m0, C0):

    phi_t = G phi_{t-1} + w_t,    w_t ~ N(0, W)
    Y_t   = F' phi_t + nu_t,      nu_t ~ N(0, v)
    phi_0 ~ N(m0, C0)

Observations are scalar; the hidden state lives in R^n with n small, so
dense O(n^3) linear algebra is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .io import csv_text, fmt

_SYM_TOL = 1e-12
_EIG_TOL = 1e-10
OBSERVABILITY_TOL = 1e-10


@dataclass(frozen=True)
class LdsParams:
    """System tuple (G, F, v, W) plus the prior (m0, C0).

    Scalar inputs are promoted to 1x1 matrices / length-1 vectors, so
    ``LdsParams(G=1, F=1, v=1, W=1, m0=0, C0=1)`` describes the scalar
    identity system. Arrays are copied and frozen after construction.
    """

    G: np.ndarray
    F: np.ndarray
    v: float
    W: np.ndarray
    m0: np.ndarray
    C0: np.ndarray

    def __post_init__(self):
        mats = {
            "G": np.atleast_2d(np.asarray(self.G, dtype=float)).copy(),
            "W": np.atleast_2d(np.asarray(self.W, dtype=float)).copy(),
            "C0": np.atleast_2d(np.asarray(self.C0, dtype=float)).copy(),
        }
        vecs = {
            "F": np.atleast_1d(np.asarray(self.F, dtype=float)).ravel().copy(),
            "m0": np.atleast_1d(np.asarray(self.m0, dtype=float)).ravel().copy(),
        }
        for name, arr in {**mats, **vecs}.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "v", float(self.v))

    @property
    def n(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Simulated hidden states and observations for t = 0..T."""

    states: np.ndarray  # (T+1, n)
    observations: np.ndarray  # (T+1,)
    seed: int

    def __post_init__(self):
        if self.states.shape[0] != self.observations.shape[0]:
            raise ValueError("states and observations must have equal length")

    @property
    def T(self) -> int:
        return self.observations.shape[0] - 1


def _check_sym_psd(X: np.ndarray, name: str) -> None:
    if np.max(np.abs(X - X.T)) > _SYM_TOL:
        raise ConfigError(f"{name} must be symmetric (asymmetry {np.max(np.abs(X - X.T)):.3e})")
    smallest = float(np.linalg.eigvalsh(X).min()) if X.size else 0.0
    if smallest < -_EIG_TOL:
        raise ConfigError(
            f"{name} is not positive semidefinite (most negative eigenvalue {fmt(smallest)})"
        )


def validate(params: LdsParams) -> LdsParams:
    """Return params unchanged iff all invariants hold.

    Checks: consistent dimensions for a single n, v > 0, and W and C0
    symmetric PSD (eigenvalues above -1e-10).
    """
    n = params.n
    for name, shape in [
        ("G", params.G.shape),
        ("W", params.W.shape),
        ("C0", params.C0.shape),
    ]:
        if shape != (n, n):
            raise ConfigError(f"{name} has shape {shape}, expected ({n}, {n})")
    if params.m0.shape != (n,):
        raise ConfigError(f"m0 has shape {params.m0.shape}, expected ({n},)")
    if not params.v > 0:
        raise ConfigError("v must be positive")
    _check_sym_psd(params.W, "W")
    _check_sym_psd(params.C0, "C0")
    return params


def is_observable(G: np.ndarray, F: np.ndarray, tol: float = OBSERVABILITY_TOL) -> tuple[bool, int]:
    """Observability of (G, F): does span{F, G'F, ..., G'^{n-1}F} fill R^n?

    Returns (flag, rank) where rank is computed from the singular values of
    the n x n matrix with columns (G')^k F, thresholded at tol * sigma_max.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    F = np.atleast_1d(np.asarray(F, dtype=float)).ravel()
    n = F.shape[0]
    if G.shape != (n, n):
        raise ConfigError(f"G has shape {G.shape}, expected ({n}, {n})")
    cols = np.empty((n, n))
    w = F.copy()
    for k in range(n):
        cols[:, k] = w
        w = G.T @ w
    sigma = np.linalg.svd(cols, compute_uv=False)
    if sigma[0] == 0.0:
        return False, 0
    rank = int(np.sum(sigma > tol * sigma[0]))
    return rank == n, rank


def sqrt_psd(X: np.ndarray) -> np.ndarray:
    """Symmetric square-root factor of a PSD matrix via eigenfactorization.

    Negative eigenvalues (numerical noise) are clamped to zero, so W = 0
    and rank-deficient covariances factor cleanly where Cholesky would fail.
    """
    lam, V = np.linalg.eigh((X + X.T) / 2.0)
    return V @ np.diag(np.sqrt(np.clip(lam, 0.0, None)))


def simulate(params: LdsParams, T: int, seed: int) -> Trajectory:
    """Simulate the system for t = 0..T with a seeded generator.

    Draw order is fixed (phi_0 noise, nu_0, then per step: process noise,
    observation noise), making the output a pure function of
    (params, T, seed): identical inputs give bit-identical trajectories.
    """
    validate(params)
    if T < 0:
        raise ConfigError("T must be >= 0")
    n = params.n
    rng = np.random.default_rng(seed)
    s_w = sqrt_psd(params.W)
    s_c0 = sqrt_psd(params.C0)
    sd_v = np.sqrt(params.v)

    states = np.empty((T + 1, n))
    obs = np.empty(T + 1)
    phi = params.m0 + s_c0 @ rng.standard_normal(n)
    states[0] = phi
    obs[0] = float(params.F @ phi) + sd_v * rng.standard_normal()
    for t in range(1, T + 1):
        phi = params.G @ phi + s_w @ rng.standard_normal(n)
        states[t] = phi
        obs[t] = float(params.F @ phi) + sd_v * rng.standard_normal()
    states.setflags(write=False)
    obs.setflags(write=False)
    return Trajectory(states=states, observations=obs, seed=int(seed))


def trajectory_to_csv(traj: Trajectory, include_states: bool = False) -> str:
    """Serialize a trajectory: header ``t,y`` or ``t,y,phi_0..phi_{n-1}``."""
    if include_states:
        n = traj.states.shape[1]
        header = ["t", "y"] + [f"phi_{i}" for i in range(n)]
        rows = (
            [t, traj.observations[t]] + list(traj.states[t])
            for t in range(traj.T + 1)
        )
    else:
        header = ["t", "y"]
        rows = ([t, traj.observations[t]] for t in range(traj.T + 1))
    return csv_text(header, rows)


def trajectory_from_csv(text: str, seed: int = 0) -> Trajectory:
    """Parse a full (with-states) trajectory CSV back into arrays."""
    lines = [ln for ln in text.split("\n") if ln]
    header = lines[0].split(",")
    if header[:2] != ["t", "y"]:
        raise ValueError("unexpected trajectory CSV header")
    n = len(header) - 2
    obs, states = [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        obs.append(float(cells[1]))
        states.append([float(c) for c in cells[2:]] if n else [])
    states_arr = np.array(states) if n else np.zeros((len(obs), 0))
    return Trajectory(states=states_arr, observations=np.array(obs), seed=seed)
