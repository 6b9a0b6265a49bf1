"""AR truncation of the Kalman predictor and its remainder term.

Unrolling the forecast recursion s+1 steps splits f_{t+1} into a linear
function of the s+1 most recent observations plus a remainder carrying
everything older:

    f_{t+1} = F'G A_t Y_t
            + sum_{j=0}^{s-1} F'(Z_t ... Z_{t-j}) G A_{t-j-1} Y_{t-j-1}
            + F'(Z_t ... Z_{t-s}) a_{t-s}

Freezing the time-varying coefficients at their steady-state limits gives
the AR(s+1) model theta_j = <F, Z^j G A>. All lag products are evaluated
as repeated matrix-vector applications against F from the left (O(s n^2)
per step); matrix powers are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io import csv_text
from .kalman import BatchFilterRun, FilterRun, SteadyState, run_filter
from .lds import LdsParams


@dataclass(frozen=True)
class ArModel:
    """Truncation depth s and the s+1 coefficients theta_0..theta_s."""

    s: int
    theta: np.ndarray
    source: SteadyState

    def __post_init__(self):
        if self.theta.shape != (self.s + 1,):
            raise ValueError("theta must have length s+1")


@dataclass(frozen=True)
class RemainderSeries:
    """Remainder term F'(prod Z_{t-i}) a_{t-s} of the unrolled forecast."""

    s: int
    ts: np.ndarray
    values: np.ndarray

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(t), float(v)) for t, v in zip(self.ts, self.values)]


def ar_coefficients(ss: SteadyState, params: LdsParams, s: int) -> ArModel:
    """Steady-state truncation coefficients theta_j = <F, Z^j G A>, j = 0..s.

    Computed by repeated application w <- Z w starting from w = G A.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    theta = np.empty(s + 1)
    w = params.G @ ss.A
    for j in range(s + 1):
        theta[j] = float(params.F @ w)
        w = ss.Z @ w
    theta.setflags(write=False)
    return ArModel(s=s, theta=theta, source=ss)


def ar_predict(model: ArModel, history) -> float:
    """Prediction sum_j theta_j Y_{t-j}, with Y_t the last history element."""
    h = np.asarray(history, dtype=float).ravel()
    if h.shape[0] < model.s + 1:
        raise ValueError(f"history has {h.shape[0]} values, need at least {model.s + 1}")
    return float(model.theta @ h[::-1][: model.s + 1])


def _remainders_from_run(fr: FilterRun, s: int) -> tuple[np.ndarray, np.ndarray]:
    F = fr.params.F
    T = fr.T
    ts = np.arange(s + 1, T + 1)
    vals = np.empty(ts.shape[0])
    for idx, t in enumerate(ts):
        u = F.copy()
        for i in range(s + 1):
            u = fr.Z[t - i].T @ u
        vals[idx] = float(u @ fr.a[t - s])
    return ts, vals


def _remainders_from_batch(bfr: BatchFilterRun, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched remainders: (ts, values) with values of shape (len(ts), runs)."""
    F = bfr.params.F
    T = bfr.T
    ts = np.arange(s + 1, T + 1)
    vals = np.empty((ts.shape[0], bfr.y.shape[0]))
    for idx, t in enumerate(ts):
        u = F.copy()
        for i in range(s + 1):
            u = bfr.Z[t - i].T @ u
        vals[idx] = bfr.a[t - s] @ u
    return ts, vals


def remainder_series(params: LdsParams, observations, s: int) -> RemainderSeries:
    """Exact remainder F'(Z_t ... Z_{t-s}) a_{t-s} for every t > s.

    Runs the exact time-varying filter once (never the steady-state Z): the
    W = 0 counterexamples only show up with the exact A_t.
    """
    y = np.asarray(observations, dtype=float).ravel()
    if y.shape[0] <= s + 1:
        raise ValueError(f"need at least s+2 = {s + 2} observations, got {y.shape[0]}")
    fr = run_filter(params, y)
    ts, vals = _remainders_from_run(fr, s)
    return RemainderSeries(s=s, ts=ts, values=vals)


def remainder_series_to_csv(series: RemainderSeries) -> str:
    return csv_text(["t", "value"], ([int(t), v] for t, v in zip(series.ts, series.values)))


def ar_predictions(theta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vector of predictions yhat_t = sum_j theta_j Y_{t-1-j} for t = 0..T.

    Entries with insufficient history (t <= len(theta)-1) are NaN.
    """
    y = np.asarray(y, dtype=float).ravel()
    k = theta.shape[0]
    out = np.full(y.shape[0], np.nan)
    if y.shape[0] >= k + 1:
        acc = np.zeros(y.shape[0] - k)
        for j in range(k):
            acc += theta[j] * y[k - 1 - j : y.shape[0] - 1 - j]
        out[k:] = acc
    return out


def truncation_gap(
    params: LdsParams, observations, model: ArModel, burn_in: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gap |f_{t+1} - ar_predict(model, Y_0..Y_t)| for t >= burn_in.

    f_{t+1} comes from the exact filter. Returns (ts, gaps).
    """
    y = np.asarray(observations, dtype=float).ravel()
    T = y.shape[0] - 1
    start = max(burn_in, model.s)
    if start > T:
        raise ValueError(f"no scored steps: burn_in {burn_in} beyond last index {T}")
    fr = run_filter(params, y)
    ts = np.arange(start, T + 1)
    # prediction of Y_{t+1}: shift ar_predictions by one index
    preds = ar_predictions(model.theta, y)
    gaps = np.empty(ts.shape[0])
    for idx, t in enumerate(ts):
        yhat = preds[t + 1] if t + 1 <= T else float(model.theta @ y[::-1][: model.s + 1])
        gaps[idx] = abs(fr.forecast_at(t) - yhat)
    return ts, gaps


def gap_to_csv(ts: np.ndarray, gaps: np.ndarray) -> str:
    return csv_text(["t", "value"], ([int(t), g] for t, g in zip(ts, gaps)))


def varying_coefficients(fr: FilterRun, s: int, t: int) -> np.ndarray:
    """Time-varying unrolling coefficients r at time t (length s+1).

    r[0] = <F, G A_t> multiplies Y_t and r[j+1] = <F, (Z_t...Z_{t-j}) G A_{t-j-1}>
    multiplies Y_{t-j-1}; each r[j] converges to theta_j as t grows.
    """
    if t < s + 1 or t > fr.T:
        raise ValueError(f"t must lie in [s+1, T] = [{s + 1}, {fr.T}]")
    G, F = fr.params.G, fr.params.F
    r = np.empty(s + 1)
    r[0] = float(F @ (G @ fr.A[t]))
    u = F.copy()
    for j in range(s):
        u = fr.Z[t - j].T @ u
        r[j + 1] = float(u @ (G @ fr.A[t - j - 1]))
    return r


@dataclass(frozen=True)
class UnrolledDecomposition:
    """Per-t split of the exact forecast into AR part plus remainder."""

    s: int
    ts: np.ndarray
    ar_part: np.ndarray
    remainder: np.ndarray
    forecast: np.ndarray  # exact f_{t+1} from the filter


def unrolled_decomposition(params: LdsParams, observations, s: int) -> UnrolledDecomposition:
    """Evaluate both sides of the unrolling identity for every t in [s+1, T].

    The identity ar_part + remainder == f_{t+1} is algebraically exact; it
    is the strongest self-check of the truncation machinery.
    """
    y = np.asarray(observations, dtype=float).ravel()
    T = y.shape[0] - 1
    if T < s + 1:
        raise ValueError("observations too short for the requested depth")
    fr = run_filter(params, y)
    ts = np.arange(s + 1, T + 1)
    ar_part = np.empty(ts.shape[0])
    remainder = np.empty(ts.shape[0])
    fore = np.empty(ts.shape[0])
    G, F = params.G, params.F
    for idx, t in enumerate(ts):
        acc = float(F @ (G @ fr.A[t])) * y[t]
        u = F.copy()
        for j in range(s):
            u = fr.Z[t - j].T @ u
            acc += float(u @ (G @ fr.A[t - j - 1])) * y[t - j - 1]
        u = fr.Z[t - s].T @ u
        ar_part[idx] = acc
        remainder[idx] = float(u @ fr.a[t - s])
        fore[idx] = fr.forecast_at(t)
    return UnrolledDecomposition(s=s, ts=ts, ar_part=ar_part, remainder=remainder, forecast=fore)
