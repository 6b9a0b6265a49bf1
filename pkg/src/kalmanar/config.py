"""Experiment configuration models.

Configs are single JSON documents; whatever the CLI resolves is embedded
verbatim in every artifact manifest, so a config round-trips through its
manifest. The same models double as the request bodies of the service.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigError
from .lds import LdsParams

Matrix = Union[float, list[list[float]]]
Vector = Union[float, list[float]]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemSpec(StrictModel):
    """Noise-free part of a system: dynamics, observation direction, prior."""

    G: Matrix
    F: Vector
    m0: Optional[Vector] = None  # default: zeros
    C0: Optional[Matrix] = None  # default: identity

    def dims(self) -> int:
        F = np.atleast_1d(np.asarray(self.F, dtype=float)).ravel()
        return F.shape[0]

    def to_params(self, v: float, w) -> LdsParams:
        n = self.dims()
        W = np.asarray(w, dtype=float)
        if W.ndim == 0:
            W = float(W) * np.eye(n)
        m0 = np.zeros(n) if self.m0 is None else self.m0
        C0 = np.eye(n) if self.C0 is None else self.C0
        return LdsParams(G=self.G, F=self.F, v=v, W=W, m0=m0, C0=C0)


class LdsSpec(SystemSpec):
    """Full system tuple (G, F, v, W) plus the optional prior."""

    v: float
    W: Matrix

    def params(self) -> LdsParams:
        return self.to_params(self.v, self.W)


def example1_spec(v: float = 0.5, w: float = 0.5) -> LdsSpec:
    """The two-dimensional diagonal benchmark system used by the experiments."""
    return LdsSpec(G=[[0.999, 0.0], [0.0, 0.5]], F=[1.0, 1.0], v=v, W=[[w, 0.0], [0.0, w]])


class SeriesFileSpec(StrictModel):
    """CSV source for real-series ingestion.

    The CLI fills `content` from `path`; the service only reads `content`.
    """

    path: Optional[str] = None
    content: Optional[str] = None
    column: Union[int, str] = 1
    differencing: Literal[0, 1, 2] = 0


class StreamSpec(StrictModel):
    """An observation stream: simulated LDS, synthetic shape, or a file."""

    kind: Literal["lds", "square_wave", "trend", "file"] = "lds"
    lds: Optional[LdsSpec] = None
    amplitude: float = 1.0
    period: int = 50
    drift: float = 0.05
    noise_std: float = 0.1
    file: Optional[SeriesFileSpec] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "lds" and self.lds is None:
            raise ValueError("stream kind 'lds' requires an lds spec")
        if self.kind == "file" and self.file is None:
            raise ValueError("stream kind 'file' requires a file spec")
        return self


class BaseExperimentConfig(StrictModel):
    name: str = "default"
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    output_dir: Optional[str] = None


class CompareConfig(BaseExperimentConfig):
    """Mean/std error curves for all predictor kinds over repeated runs."""

    lds: LdsSpec = Field(default_factory=example1_spec)
    T: int = 500
    runs: int = Field(default=100, ge=1)
    depths: list[int] = Field(default_factory=lambda: [1])
    ogd_lags: Optional[int] = None  # default: max(depths) + 1
    D: float = 2.0
    c: float = 1.0
    burn_in: Optional[int] = None  # default: max(10, max depth)


class NoiseSweepConfig(BaseExperimentConfig):
    """Kalman-vs-AR loss ratio over a (w, v) noise grid."""

    system: SystemSpec = Field(
        default_factory=lambda: SystemSpec(G=[[0.999, 0.0], [0.0, 0.5]], F=[1.0, 1.0])
    )
    w_values: list[float]
    v_values: list[float]
    trajectories: int = Field(default=10, ge=1)
    T: int = 50
    depth: int = 1


class NoiseSetting(StrictModel):
    w: float
    v: float
    tag: Optional[str] = None

    def label(self) -> str:
        return self.tag if self.tag is not None else f"W={self.w:g}I"


class DepthSweepConfig(BaseExperimentConfig):
    """AR error as a function of depth s for several noise settings."""

    system: SystemSpec = Field(
        default_factory=lambda: SystemSpec(G=[[0.999, 0.0], [0.0, 0.5]], F=[1.0, 1.0])
    )
    settings: list[NoiseSetting] = Field(
        default_factory=lambda: [
            NoiseSetting(w=0.5, v=0.5),
            NoiseSetting(w=0.1, v=0.5),
        ]
    )
    depths: list[int] = Field(default_factory=lambda: list(range(1, 9)))
    runs: int = Field(default=100, ge=1)
    T: int = 200
    burn_in: Optional[int] = None


class CounterexampleConfig(BaseExperimentConfig):
    """Degenerate-noise (W = 0) runs where the remainder refuses to vanish."""

    lds: LdsSpec
    filter_m0: Optional[Vector] = None  # default: zeros
    filter_C0: Optional[Matrix] = None  # default: identity
    s: int = 3
    runs: int = Field(default=50, ge=1)
    T: int = 2000


class RegretConfig(BaseExperimentConfig):
    """Cumulative-loss comparison of the learner against hindsight comparators."""

    stream: StreamSpec
    horizons: list[int] = Field(default_factory=lambda: [500, 2000, 8000])
    s: int = 4
    D: float = 1.0
    c: float = 1.0
    clip_bound: Optional[float] = None  # default for lds streams: 6 x stationary std
    family: Optional[list[LdsSpec]] = None
    epsilon: float = 0.05
    runs: int = Field(default=1, ge=1)


class IngestConfig(BaseExperimentConfig):
    series: SeriesFileSpec


class LrStudyConfig(BaseExperimentConfig):
    """Per-step loss traces of the learner across learning-rate constants."""

    stream: StreamSpec
    c_values: list[float]
    s: int = 2
    D: float = 1.0
    T: Optional[int] = 200  # None: whole series (file streams only)
    runs: int = Field(default=1, ge=1)


EXPERIMENT_CONFIGS = {
    "compare": CompareConfig,
    "noise-sweep": NoiseSweepConfig,
    "depth-sweep": DepthSweepConfig,
    "counterexample": CounterexampleConfig,
    "regret": RegretConfig,
    "ingest": IngestConfig,
    "lr-study": LrStudyConfig,
}


def load_config(experiment: str, payload: dict):
    """Validate a raw config dict for the named experiment."""
    try:
        model = EXPERIMENT_CONFIGS[experiment]
    except KeyError:
        raise ConfigError(f"unknown experiment '{experiment}'") from None
    try:
        return model.model_validate(payload)
    except Exception as exc:  # pydantic.ValidationError
        raise ConfigError(f"invalid {experiment} config: {exc}") from exc
