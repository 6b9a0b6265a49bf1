"""Kalman filtering for scalar-observation LDS, AR truncation of the
filter with an exponentially decaying remainder, and an online
gradient-descent forecaster with hindsight comparators."""

from ._version import __version__
from .ar import (
    ArModel,
    RemainderSeries,
    ar_coefficients,
    ar_predict,
    remainder_series,
    truncation_gap,
    unrolled_decomposition,
)
from .baselines import PredictorKind, persistence_predict, score
from .errors import ConfigError, NumericalError
from .kalman import (
    KalmanState,
    SteadyState,
    contraction_check,
    forecast,
    kf_init,
    kf_step,
    run_filter,
    steady_state,
    steady_state_to_json,
)
from .lds import LdsParams, Trajectory, is_observable, simulate, validate
from .ogd import (
    OgdState,
    OpCounter,
    best_fixed_theta,
    gradient,
    ogd_init,
    ogd_predict,
    ogd_step,
    project_ball,
    run_ogd,
)

__all__ = [
    "__version__",
    "ArModel",
    "ConfigError",
    "KalmanState",
    "LdsParams",
    "NumericalError",
    "OgdState",
    "OpCounter",
    "PredictorKind",
    "RemainderSeries",
    "SteadyState",
    "Trajectory",
    "ar_coefficients",
    "ar_predict",
    "best_fixed_theta",
    "contraction_check",
    "forecast",
    "gradient",
    "is_observable",
    "kf_init",
    "kf_step",
    "ogd_init",
    "ogd_predict",
    "ogd_step",
    "persistence_predict",
    "project_ball",
    "remainder_series",
    "run_filter",
    "run_ogd",
    "score",
    "simulate",
    "steady_state",
    "steady_state_to_json",
    "truncation_gap",
    "unrolled_decomposition",
    "validate",
]
