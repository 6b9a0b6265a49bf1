"""Online gradient descent over AR coefficients, with ball projection.

The learner keeps theta in the closed Euclidean ball of radius D and walks

    yhat_t = sum_{i=0}^{s-1} theta_i Y_{t-i-1}
    loss_t = (Y_t - yhat_t)^2
    theta <- project( theta - eta_t * grad ),   eta_t = c / sqrt(t)

with the step counter t starting at s (the first scored step). Every update
costs O(s) arithmetic, independent of t; an optional OpCounter records the
exact operation count for the cost-model tests.

best_fixed_theta solves the hindsight comparator min_{|theta| <= D}
sum_t (Y_t - theta . lags_t)^2 exactly: unconstrained normal equations,
then bisection on the ridge multiplier when the solution leaves the ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io import csv_text


class OpCounter:
    """Accumulates the arithmetic operation count of instrumented steps."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += n


@dataclass(frozen=True)
class OgdState:
    """Learner state: coefficients, step counter, radius and rate constant."""

    s: int
    D: float
    c: float
    theta: np.ndarray
    t: int


def ogd_init(s: int, D: float, c: float = 1.0, theta0=None) -> OgdState:
    """Fresh learner at step t = s; theta0 defaults to the origin."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if not D > 0:
        raise ValueError("D must be positive")
    if not c > 0:
        raise ValueError("c must be positive")
    if theta0 is None:
        theta = np.zeros(s)
    else:
        theta = np.asarray(theta0, dtype=float).ravel().copy()
        if theta.shape != (s,):
            raise ValueError(f"theta0 must have length {s}")
        if np.linalg.norm(theta) > D * (1 + 1e-12):
            raise ValueError("theta0 lies outside the ball of radius D")
    theta.setflags(write=False)
    return OgdState(s=s, D=float(D), c=float(c), theta=theta, t=s)


def _lags(history, s: int) -> np.ndarray:
    h = np.asarray(history, dtype=float).ravel()
    if h.shape[0] < s:
        raise ValueError(f"history has {h.shape[0]} values, need at least {s}")
    return h[: -s - 1 : -1] if h.shape[0] > s else h[::-1]


def ogd_predict(state: OgdState, history) -> float:
    """Dot product of theta with the s most recent observations (newest first)."""
    return float(state.theta @ _lags(history, state.s))


def gradient(theta: np.ndarray, y: float, lags: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Gradient of the squared loss: -2 (y - theta.lags) * lags."""
    theta = np.asarray(theta, dtype=float).ravel()
    lags = np.asarray(lags, dtype=float).ravel()
    s = theta.shape[0]
    residual = float(y) - float(theta @ lags)
    g = (-2.0 * residual) * lags
    if counter is not None:
        counter.add(2 * s + 2 + s)  # dot, residual, scaling
    return g


def project_ball(theta: np.ndarray, D: float, counter: OpCounter | None = None) -> np.ndarray:
    """Euclidean projection onto the closed ball of radius D.

    Implemented branchlessly as theta * (D / max(|theta|, D)) so the
    arithmetic cost per call is a fixed function of s.
    """
    if not D > 0:
        raise ValueError("D must be positive")
    theta = np.asarray(theta, dtype=float).ravel()
    nrm = float(np.linalg.norm(theta))
    scale = D / max(nrm, D)
    out = theta * scale
    if counter is not None:
        counter.add(2 * theta.shape[0] + 2 + theta.shape[0])  # norm, max+div, scaling
    return out


def ogd_step(
    state: OgdState, y: float, history, counter: OpCounter | None = None
) -> tuple[OgdState, float]:
    """One predict/observe/update cycle; returns (new state, squared loss).

    history must hold the observations preceding y (at least s of them).
    """
    lags = _lags(history, state.s)
    yhat = float(state.theta @ lags)
    residual = float(y) - yhat
    loss = residual * residual
    if counter is not None:
        counter.add(2 * state.s + 2)  # predict dot, residual, loss
    g = gradient(state.theta, y, lags, counter)
    eta = state.c / np.sqrt(state.t)
    stepped = state.theta - eta * g
    if counter is not None:
        counter.add(2 + 2 * state.s)  # eta, scaled step
    theta = project_ball(stepped, state.D, counter)
    theta.setflags(write=False)
    return (
        OgdState(s=state.s, D=state.D, c=state.c, theta=theta, t=state.t + 1),
        loss,
    )


@dataclass(frozen=True)
class OgdRun:
    """Trace of a learner over one stream: per-step predictions and losses."""

    ts: np.ndarray
    yhat: np.ndarray
    loss: np.ndarray
    final: OgdState

    def cumulative_loss(self) -> np.ndarray:
        return np.cumsum(self.loss)


def run_ogd(observations, s: int, D: float, c: float = 1.0, theta0=None) -> OgdRun:
    """Run the learner over Y_0..Y_T, scoring steps t = s..T."""
    y = np.asarray(observations, dtype=float).ravel()
    state = ogd_init(s, D, c, theta0)
    ts = np.arange(s, y.shape[0])
    yhat = np.empty(ts.shape[0])
    loss = np.empty(ts.shape[0])
    for idx, t in enumerate(ts):
        yhat[idx] = ogd_predict(state, y[:t])
        state, loss[idx] = ogd_step(state, y[t], y[:t])
    return OgdRun(ts=ts, yhat=yhat, loss=loss, final=state)


@dataclass(frozen=True)
class BestFixed:
    """Hindsight least-squares coefficients constrained to the ball."""

    theta: np.ndarray
    loss: float
    rank_deficient: bool
    ridge: float  # Lagrange multiplier of the ball constraint (0 if inactive)


def best_fixed_theta(observations, s: int, D: float) -> BestFixed:
    """Exact minimizer of sum_{t>=s} (Y_t - theta.lags_t)^2 over |theta| <= D.

    Solves the normal equations; when the unconstrained solution leaves the
    ball, bisects on the multiplier lambda of (M + lambda I) theta = b until
    |theta| = D within 1e-10. A rank-deficient normal matrix yields the
    minimum-norm solution and sets the flag.
    """
    if not D > 0:
        raise ValueError("D must be positive")
    y = np.asarray(observations, dtype=float).ravel()
    if y.shape[0] < s + 1:
        raise ValueError(f"need at least s+1 = {s + 1} observations, got {y.shape[0]}")
    rows = y.shape[0] - s
    X = np.empty((rows, s))
    for j in range(s):
        X[:, j] = y[s - 1 - j : y.shape[0] - 1 - j]
    target = y[s:]
    M = X.T @ X
    b = X.T @ target

    lam, V = np.linalg.eigh(M)
    lmax = float(lam[-1]) if lam.size else 0.0
    rank_deficient = lmax <= 0.0 or bool(np.any(lam <= 1e-12 * lmax))
    if rank_deficient:
        inv = np.zeros_like(lam)
        keep = lam > 1e-12 * max(lmax, 1e-300)
        inv[keep] = 1.0 / lam[keep]
        theta = V @ (inv * (V.T @ b))
    else:
        theta = np.linalg.solve(M, b)

    ridge = 0.0
    if np.linalg.norm(theta) > D:
        eye = np.eye(s)

        def norm_at(mu: float) -> float:
            return float(np.linalg.norm(np.linalg.solve(M + mu * eye, b)))

        lo, hi = 0.0, 1.0
        while norm_at(hi) > D:
            hi *= 2.0
        for _ in range(500):
            mid = (lo + hi) / 2.0
            if norm_at(mid) > D:
                lo = mid
            else:
                hi = mid
            if abs(norm_at(hi) - D) <= 1e-10:
                break
        ridge = hi
        theta = np.linalg.solve(M + ridge * eye, b)

    residuals = target - X @ theta
    return BestFixed(
        theta=theta,
        loss=float(residuals @ residuals),
        rank_deficient=rank_deficient,
        ridge=ridge,
    )


class RegretLedger:
    """Running per-step record of the learner and its comparators.

    per_step rows are (t, y, yhat_alg, {name: yhat}); the running loss sums
    are recomputable by folding the rows, which the tests assert.
    """

    def __init__(self, comparators: list[str]):
        self.comparators = list(comparators)
        self.loss_alg = 0.0
        self.loss_comparators = {name: 0.0 for name in self.comparators}
        self.per_step: list[tuple[int, float, float, dict[str, float]]] = []

    def add(self, t: int, y: float, yhat_alg: float, comparator_yhats: dict[str, float]) -> None:
        self.loss_alg += (y - yhat_alg) ** 2
        for name in self.comparators:
            self.loss_comparators[name] += (y - comparator_yhats[name]) ** 2
        self.per_step.append((t, y, yhat_alg, dict(comparator_yhats)))

    def to_csv(self) -> str:
        header = ["t", "y", "yhat_ogd", "loss_ogd", "cumloss_ogd"]
        for name in self.comparators:
            header += [f"yhat_{name}", f"cumloss_{name}"]
        cum_alg = 0.0
        cum = {name: 0.0 for name in self.comparators}
        rows = []
        for t, y, yhat, comps in self.per_step:
            loss = (y - yhat) ** 2
            cum_alg += loss
            row = [t, y, yhat, loss, cum_alg]
            for name in self.comparators:
                cum[name] += (y - comps[name]) ** 2
                row += [comps[name], cum[name]]
            rows.append(row)
        return csv_text(header, rows)
