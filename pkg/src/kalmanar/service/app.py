"""FastAPI service wrapping the core package.

Core operations are exposed as JSON endpoints; the experiment endpoints
return their artifacts inline (filename + content), so the service never
touches the client filesystem and a thin client can write the files
wherever it likes. ConfigError maps to HTTP 400, NumericalError to 500,
both with an ``error_kind`` the CLI translates into exit codes.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .._version import __version__
from ..ar import ar_coefficients
from ..config import (
    CompareConfig,
    CounterexampleConfig,
    DepthSweepConfig,
    IngestConfig,
    LrStudyConfig,
    NoiseSweepConfig,
    RegretConfig,
)
from ..errors import ConfigError, NumericalError
from ..experiments import RUNNERS
from ..kalman import run_filter, steady_state, steady_state_to_dict
from ..lds import is_observable, simulate, trajectory_to_csv, validate
from ..ogd import run_ogd
from . import models


def create_app() -> FastAPI:
    app = FastAPI(title="kalmanar", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"error_kind": "config", "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error_kind": "config", "detail": str(exc)})

    @app.exception_handler(NumericalError)
    async def _numerical_error(request: Request, exc: NumericalError):
        return JSONResponse(
            status_code=500, content={"error_kind": "numerical", "detail": str(exc)}
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/lds/validate", response_model=models.ValidateResponse)
    def lds_validate(req: models.ValidateRequest):
        params = validate(req.lds.params())
        flag, rank = is_observable(params.G, params.F)
        return models.ValidateResponse(
            valid=True, n=params.n, observable=flag, observability_rank=rank
        )

    @app.post("/lds/simulate", response_model=models.SimulateResponse)
    def lds_simulate(req: models.SimulateRequest):
        traj = simulate(req.lds.params(), req.T, req.seed)
        return models.SimulateResponse(
            seed=traj.seed,
            observations=traj.observations.tolist(),
            states=traj.states.tolist() if req.include_states else None,
            csv=trajectory_to_csv(traj, include_states=req.include_states),
        )

    @app.post("/kalman/steady-state", response_model=models.SteadyStateResponse)
    def kalman_steady_state(req: models.SteadyStateRequest):
        ss = steady_state(req.lds.params(), tol=req.tol, max_iter=req.max_iter)
        return models.SteadyStateResponse(**steady_state_to_dict(ss))

    @app.post("/kalman/forecasts", response_model=models.ForecastResponse)
    def kalman_forecasts(req: models.ForecastRequest):
        if len(req.observations) < 2:
            raise ConfigError("need at least two observations")
        fr = run_filter(req.lds.params(), req.observations)
        return models.ForecastResponse(
            start_t=1, forecasts=fr.f[1:].tolist(), next_forecast=fr.next_forecast()
        )

    @app.post("/ar/coefficients", response_model=models.ArCoefficientsResponse)
    def ar_coefficients_route(req: models.ArCoefficientsRequest):
        params = req.lds.params()
        ss = steady_state(params, tol=req.tol, max_iter=req.max_iter)
        model = ar_coefficients(ss, params, req.s)
        return models.ArCoefficientsResponse(
            s=model.s, theta=model.theta.tolist(), gamma=ss.gamma, kappa=ss.kappa
        )

    @app.post("/ogd/run", response_model=models.OgdRunResponse)
    def ogd_run_route(req: models.OgdRunRequest):
        run = run_ogd(req.observations, req.s, req.D, req.c, req.theta0)
        return models.OgdRunResponse(
            t=run.ts.tolist(),
            yhat=run.yhat.tolist(),
            loss=run.loss.tolist(),
            cumulative_loss=float(run.loss.sum()) if run.loss.size else 0.0,
            final_theta=run.final.theta.tolist(),
        )

    def _bundle(artifacts) -> models.ExperimentResponse:
        return models.ExperimentResponse(
            artifacts=[
                models.ArtifactModel(filename=a.filename, content=a.content) for a in artifacts
            ]
        )

    @app.post("/experiments/compare", response_model=models.ExperimentResponse)
    def experiment_compare(cfg: CompareConfig):
        return _bundle(RUNNERS["compare"][1](cfg))

    @app.post("/experiments/noise-sweep", response_model=models.ExperimentResponse)
    def experiment_noise_sweep(cfg: NoiseSweepConfig):
        return _bundle(RUNNERS["noise-sweep"][1](cfg))

    @app.post("/experiments/depth-sweep", response_model=models.ExperimentResponse)
    def experiment_depth_sweep(cfg: DepthSweepConfig):
        return _bundle(RUNNERS["depth-sweep"][1](cfg))

    @app.post("/experiments/counterexample", response_model=models.ExperimentResponse)
    def experiment_counterexample(cfg: CounterexampleConfig):
        return _bundle(RUNNERS["counterexample"][1](cfg))

    @app.post("/experiments/regret", response_model=models.ExperimentResponse)
    def experiment_regret(cfg: RegretConfig):
        return _bundle(RUNNERS["regret"][1](cfg))

    @app.post("/experiments/ingest", response_model=models.ExperimentResponse)
    def experiment_ingest(cfg: IngestConfig):
        return _bundle(RUNNERS["ingest"][1](cfg))

    @app.post("/experiments/lr-study", response_model=models.ExperimentResponse)
    def experiment_lr_study(cfg: LrStudyConfig):
        return _bundle(RUNNERS["lr-study"][1](cfg))

    return app


app = create_app()
