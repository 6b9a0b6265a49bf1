"""Reference predictors and scoring used across experiments."""

from __future__ import annotations

import enum

import numpy as np


class PredictorKind(enum.Enum):
    PERSISTENCE = "persistence"
    KALMAN_ORACLE = "kalman_oracle"
    AR_TRUNCATED = "ar_truncated"
    OGD = "ogd"
    BEST_FIXED = "best_fixed"


def persistence_predict(history) -> float:
    """Last-value prediction yhat_{t+1} = Y_t."""
    h = np.asarray(history, dtype=float).ravel()
    if h.shape[0] == 0:
        raise ValueError("history is empty")
    return float(h[-1])


def score(predictions, truths, burn_in: int) -> tuple[float, float]:
    """(rmse, total squared loss) over steps t >= burn_in."""
    p = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(truths, dtype=float).ravel()
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {y.shape[0]} truths")
    if burn_in >= p.shape[0]:
        raise ValueError("burn_in leaves no scored points")
    err = p[burn_in:] - y[burn_in:]
    total = float(err @ err)
    return float(np.sqrt(total / err.shape[0])), total
