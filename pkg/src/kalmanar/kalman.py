"""Exact Kalman filtering, the steady-state Riccati solver, and contraction analysis.

The time-varying filter keeps the textbook recursions

    a_t = G m_{t-1}          R_t = G C_{t-1} G' + W
    Q_t = F' R_t F + v       A_t = R_t F / Q_t        f_t = F' a_t
    m_t = a_t + A_t (Y_t - f_t)
    C_t = R_t - A_t Q_t A_t'

with the closed-loop matrix Z_t = G (I - A_t F'). The covariance-side
quantities R_t, Q_t, A_t, C_t, Z_t never depend on the observations, and for
observable (G, F) they converge; the fixed point of the R recursion defines
the steady-state gain A, closed loop Z, and the contraction constants
gamma and kappa measured in the R-weighted inner product <Rx, y>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .io import fmt, json_text
from .lds import LdsParams, is_observable, validate

DEFAULT_RICCATI_TOL = 1e-12
DEFAULT_RICCATI_MAX_ITER = 100_000
# R counts as numerically singular when lambda_min <= this times lambda_max;
# the W = 0 degenerate path then reports gamma/kappa as undefined.
_SINGULAR_REL_TOL = 1e-12


@dataclass(frozen=True)
class KalmanState:
    """Filter state after assimilating t observations.

    The prediction fields (a, R, Q, A, f) describe the step that produced
    this state; they are None on the initial state.
    """

    t: int
    m: np.ndarray
    C: np.ndarray
    a: np.ndarray | None = None
    R: np.ndarray | None = None
    Q: float | None = None
    A: np.ndarray | None = None
    f: float | None = None


@dataclass(frozen=True)
class SteadyState:
    """Riccati limits and the contraction constants of the closed loop.

    gamma is the largest ratio <R Z'x, Z'x> / <Rx, x> and kappa the largest
    constant with <Wx, x> >= kappa <Rx, x>; both are None when R is
    numerically singular (the W = 0 degenerate path).
    """

    R: np.ndarray
    Q: float
    A: np.ndarray
    C: np.ndarray
    Z: np.ndarray
    gamma: float | None
    kappa: float | None
    iters: int
    residual: float


def kf_init(params: LdsParams) -> KalmanState:
    """Initial filter state: the prior (m0, C0) at t = 0."""
    validate(params)
    return KalmanState(t=0, m=params.m0.copy(), C=params.C0.copy())


def kf_step(state: KalmanState, params: LdsParams, y: float) -> KalmanState:
    """Advance the filter one step with observation y.

    Q >= v > 0, so the gain is always well defined. C is re-symmetrized
    after the update to stop roundoff drift.
    """
    G, F, W, v = params.G, params.F, params.W, params.v
    a = G @ state.m
    R = G @ state.C @ G.T + W
    RF = R @ F
    Q = float(F @ RF) + v
    f = float(F @ a)
    A = RF / Q
    m = a + A * (float(y) - f)
    C = R - np.outer(A, A) * Q
    C = (C + C.T) / 2.0
    return KalmanState(t=state.t + 1, m=m, C=C, a=a, R=R, Q=Q, A=A, f=f)


def forecast(state: KalmanState, params: LdsParams) -> float:
    """One-step forecast f_{t+1} = F' G m_t from the current state."""
    return float(params.F @ (params.G @ state.m))


@dataclass(frozen=True)
class FilterRun:
    """Stacked filter quantities for a whole observation sequence.

    Index t runs 0..T; row 0 of the per-step arrays is NaN because the
    recursions start at t = 1 (Y_0 is lag context only, never assimilated —
    the first update conditions m_1 on Y_1). A, Q, R, Z depend only on
    (params, t), never on the observations.
    """

    params: LdsParams
    y: np.ndarray  # (T+1,)
    m: np.ndarray  # (T+1, n)
    a: np.ndarray  # (T+1, n)
    f: np.ndarray  # (T+1,)
    Q: np.ndarray  # (T+1,)
    A: np.ndarray  # (T+1, n)
    R: np.ndarray  # (T+1, n, n)
    Z: np.ndarray  # (T+1, n, n)

    @property
    def T(self) -> int:
        return self.y.shape[0] - 1

    def next_forecast(self) -> float:
        """f_{T+1}, the forecast one step past the last observation."""
        return float(self.params.F @ (self.params.G @ self.m[-1]))

    def forecast_at(self, t: int) -> float:
        """f_{t+1} given observations up to t (t = T uses next_forecast)."""
        return self.f[t + 1] if t < self.T else self.next_forecast()


def run_filter(params: LdsParams, observations: np.ndarray) -> FilterRun:
    """Run the exact filter over Y_0..Y_T, recording all step quantities."""
    validate(params)
    y = np.asarray(observations, dtype=float).ravel()
    T = y.shape[0] - 1
    n = params.n
    G, F, W, v = params.G, params.F, params.W, params.v

    m = np.full((T + 1, n), np.nan)
    a = np.full((T + 1, n), np.nan)
    f = np.full(T + 1, np.nan)
    Q = np.full(T + 1, np.nan)
    A = np.full((T + 1, n), np.nan)
    R = np.full((T + 1, n, n), np.nan)
    Z = np.full((T + 1, n, n), np.nan)

    m[0] = params.m0
    C = params.C0.copy()
    eye = np.eye(n)
    for t in range(1, T + 1):
        a[t] = G @ m[t - 1]
        R[t] = G @ C @ G.T + W
        RF = R[t] @ F
        Q[t] = float(F @ RF) + v
        f[t] = float(F @ a[t])
        A[t] = RF / Q[t]
        Z[t] = G @ (eye - np.outer(A[t], F))
        m[t] = a[t] + A[t] * (y[t] - f[t])
        C = R[t] - np.outer(A[t], A[t]) * Q[t]
        C = (C + C.T) / 2.0
    return FilterRun(params=params, y=y, m=m, a=a, f=f, Q=Q, A=A, R=R, Z=Z)


@dataclass(frozen=True)
class BatchFilterRun:
    """Filter runs over many observation sequences sharing one system.

    The observation-independent quantities (Q, A, R, Z) are computed once;
    means, priors and forecasts are vectorized across runs.
    """

    params: LdsParams
    y: np.ndarray  # (runs, T+1)
    m: np.ndarray  # (T+1, runs, n)
    a: np.ndarray  # (T+1, runs, n)
    f: np.ndarray  # (T+1, runs)
    Q: np.ndarray
    A: np.ndarray
    R: np.ndarray
    Z: np.ndarray

    @property
    def T(self) -> int:
        return self.y.shape[1] - 1


def run_filter_batch(params: LdsParams, observations: np.ndarray) -> BatchFilterRun:
    """Vectorized run_filter over rows of a (runs, T+1) observation matrix."""
    validate(params)
    y = np.atleast_2d(np.asarray(observations, dtype=float))
    runs, width = y.shape
    T = width - 1
    n = params.n
    G, F, W, v = params.G, params.F, params.W, params.v

    m = np.full((T + 1, runs, n), np.nan)
    a = np.full((T + 1, runs, n), np.nan)
    f = np.full((T + 1, runs), np.nan)
    Q = np.full(T + 1, np.nan)
    A = np.full((T + 1, n), np.nan)
    R = np.full((T + 1, n, n), np.nan)
    Z = np.full((T + 1, n, n), np.nan)

    m[0] = params.m0
    C = params.C0.copy()
    eye = np.eye(n)
    for t in range(1, T + 1):
        R[t] = G @ C @ G.T + W
        RF = R[t] @ F
        Q[t] = float(F @ RF) + v
        A[t] = RF / Q[t]
        Z[t] = G @ (eye - np.outer(A[t], F))
        a[t] = m[t - 1] @ G.T
        f[t] = a[t] @ F
        m[t] = a[t] + np.outer(y[:, t] - f[t], A[t])
        C = R[t] - np.outer(A[t], A[t]) * Q[t]
        C = (C + C.T) / 2.0
    return BatchFilterRun(params=params, y=y, m=m, a=a, f=f, Q=Q, A=A, R=R, Z=Z)


def _riccati_rhs(R: np.ndarray, params: LdsParams) -> np.ndarray:
    RF = R @ params.F
    Q = float(params.F @ RF) + params.v
    X = params.G @ (R - np.outer(RF, RF) / Q) @ params.G.T + params.W
    return (X + X.T) / 2.0


def _inv_sqrt_psd(R: np.ndarray, collapse_floor: float) -> np.ndarray | None:
    """Inverse square root of R, or None when the pencil is untrustworthy.

    Two degeneracy clauses: rank deficiency (lambda_min <= 1e-12 lambda_max)
    and collapse toward zero (lambda_max at or below `collapse_floor`). The
    second catches the W = 0 paths where R_t -> 0 like 1/t: the iteration
    stops near sqrt(v * tol), a floor set by the stopping rule rather than
    by the system, so any pencil value there would be an artifact.
    """
    lam, V = np.linalg.eigh((R + R.T) / 2.0)
    lmax = float(lam[-1])
    if lmax <= collapse_floor or float(lam[0]) <= _SINGULAR_REL_TOL * lmax:
        return None
    return V @ np.diag(lam ** -0.5) @ V.T


def steady_state(
    params: LdsParams,
    tol: float = DEFAULT_RICCATI_TOL,
    max_iter: int = DEFAULT_RICCATI_MAX_ITER,
) -> SteadyState:
    """Solve the Riccati fixed point by iterating the R recursion.

    Iterates R <- G[R - (RF)(RF)'/(F'RF + v)]G' + W from R_1 = G C0 G' + W
    until the sup-norm step falls below tol, then derives Q, A, C, Z and the
    pencil constants kappa = lambda_min(W, R), gamma = lambda_max(Z R Z', R)
    by whitening with the symmetric inverse square root of R. With W = 0 the
    iteration can decay as slowly as 1/t; non-convergence raises
    NumericalError with the last defect, and a numerically singular limit
    reports gamma/kappa as None rather than noise-amplified values.
    """
    validate(params)
    flag, rank = is_observable(params.G, params.F)
    if not flag:
        raise ConfigError(f"(G, F) is not observable (rank {rank} < {params.n})")
    if max_iter < 1:
        raise ConfigError("max_iter must be >= 1")

    R = params.G @ params.C0 @ params.G.T + params.W
    R = (R + R.T) / 2.0
    defect = np.inf
    iters = 0
    for k in range(1, max_iter + 1):
        R_next = _riccati_rhs(R, params)
        defect = float(np.max(np.abs(R_next - R)))
        R = R_next
        iters = k
        if defect <= tol:
            break
    else:
        raise NumericalError(
            f"Riccati iteration did not converge in {max_iter} iterations "
            f"(last defect {fmt(defect)}, tol {fmt(tol)})"
        )

    residual = float(np.max(np.abs(_riccati_rhs(R, params) - R)))
    RF = R @ params.F
    Q = float(params.F @ RF) + params.v
    A = RF / Q
    C = R - np.outer(A, A) * Q
    C = (C + C.T) / 2.0
    Z = params.G @ (np.eye(params.n) - np.outer(A, params.F))

    Rmh = _inv_sqrt_psd(R, collapse_floor=100.0 * np.sqrt(params.v * tol))
    if Rmh is None:
        gamma = kappa = None
    else:
        M = Rmh @ (Z @ R @ Z.T) @ Rmh
        gamma = float(np.linalg.eigvalsh((M + M.T) / 2.0)[-1])
        K = Rmh @ params.W @ Rmh
        kappa = float(np.linalg.eigvalsh((K + K.T) / 2.0)[0])
    return SteadyState(
        R=R, Q=Q, A=A, C=C, Z=Z, gamma=gamma, kappa=kappa, iters=iters, residual=residual
    )


def contraction_check(ss: SteadyState, trials: int, seed: int) -> float:
    """Max sampled ratio <R Z'x, Z'x> / <Rx, x> over random unit vectors.

    The tested operator is Z' = (I - A (x) F) G'; the returned maximum never
    exceeds gamma (the pencil eigenvalue is the exact supremum).
    """
    if trials <= 0:
        raise ValueError("no samples: trials must be >= 1")
    if ss.gamma is None:
        raise NumericalError("contraction ratio undefined: steady-state R is singular")
    n = ss.R.shape[0]
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((trials, n))
    norms = np.linalg.norm(X, axis=1)
    norms[norms == 0.0] = 1.0
    X = X / norms[:, None]
    Y = X @ ss.Z  # rows are (Z' x)'
    num = np.einsum("ij,jk,ik->i", Y, ss.R, Y)
    den = np.einsum("ij,jk,ik->i", X, ss.R, X)
    return float(np.max(num / den))


def steady_state_to_json(ss: SteadyState) -> str:
    """JSON document with keys R, Q, A, C, Z, gamma, kappa, iters, residual."""
    return json_text(steady_state_to_dict(ss))


def steady_state_to_dict(ss: SteadyState) -> dict:
    return {
        "R": ss.R.tolist(),
        "Q": ss.Q,
        "A": ss.A.tolist(),
        "C": ss.C.tolist(),
        "Z": ss.Z.tolist(),
        "gamma": ss.gamma,
        "kappa": ss.kappa,
        "iters": ss.iters,
        "residual": ss.residual,
    }
