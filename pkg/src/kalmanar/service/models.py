"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..config import LdsSpec


class ValidateRequest(BaseModel):
    lds: LdsSpec


class ValidateResponse(BaseModel):
    valid: bool
    n: int
    observable: bool
    observability_rank: int


class SimulateRequest(BaseModel):
    lds: LdsSpec
    T: int = Field(ge=0)
    seed: int = 0
    include_states: bool = False


class SimulateResponse(BaseModel):
    seed: int
    observations: list[float]
    states: Optional[list[list[float]]] = None
    csv: str


class SteadyStateRequest(BaseModel):
    lds: LdsSpec
    tol: float = 1e-12
    max_iter: int = 100_000


class SteadyStateResponse(BaseModel):
    """The documented steady-state JSON document."""

    R: list[list[float]]
    Q: float
    A: list[float]
    C: list[list[float]]
    Z: list[list[float]]
    gamma: Optional[float]
    kappa: Optional[float]
    iters: int
    residual: float


class ForecastRequest(BaseModel):
    lds: LdsSpec
    observations: list[float]


class ForecastResponse(BaseModel):
    start_t: int  # forecasts[i] predicts Y_{start_t + i}
    forecasts: list[float]
    next_forecast: float


class ArCoefficientsRequest(BaseModel):
    lds: LdsSpec
    s: int = Field(ge=0)
    tol: float = 1e-12
    max_iter: int = 100_000


class ArCoefficientsResponse(BaseModel):
    s: int
    theta: list[float]
    gamma: Optional[float]
    kappa: Optional[float]


class OgdRunRequest(BaseModel):
    observations: list[float]
    s: int = Field(ge=1)
    D: float = Field(gt=0)
    c: float = Field(default=1.0, gt=0)
    theta0: Optional[list[float]] = None


class OgdRunResponse(BaseModel):
    t: list[int]
    yhat: list[float]
    loss: list[float]
    cumulative_loss: float
    final_theta: list[float]


class ArtifactModel(BaseModel):
    filename: str
    content: str


class ExperimentResponse(BaseModel):
    artifacts: list[ArtifactModel]


class ErrorBody(BaseModel):
    error_kind: str  # "config" | "numerical"
    detail: str
