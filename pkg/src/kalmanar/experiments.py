"""Desk-scale experiment harness: comparison curves, noise heatmaps, depth
sweeps, degenerate-noise counterexamples, regret evaluation, real-series
ingestion and learning-rate studies.

Every experiment is a pure function of its config: run i of a multi-run
experiment draws from stream seed ``base_seed + i`` (flattened across grid
cells), reductions happen in run-index order, and manifests embed the full
resolved config plus the library version, so outputs are byte-identical
across repeated invocations — with or without threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from ._version import __version__
from .ar import _remainders_from_batch, ar_coefficients, ar_predictions
from .config import (
    CompareConfig,
    CounterexampleConfig,
    DepthSweepConfig,
    IngestConfig,
    LdsSpec,
    LrStudyConfig,
    NoiseSweepConfig,
    RegretConfig,
    SeriesFileSpec,
    StreamSpec,
)
from .errors import ConfigError, NumericalError
from .io import Artifact, csv_text, json_text, manifest_for
from .kalman import run_filter_batch, steady_state, steady_state_to_dict
from .lds import LdsParams, simulate
from .ogd import best_fixed_theta, run_ogd, RegretLedger


def _parallel_map(fn: Callable[[int], object], count: int, threads: int) -> list:
    """Map fn over range(count), optionally threaded; order is by index."""
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _simulate_rows(params: LdsParams, T: int, base_seed: int, runs: int, threads: int) -> np.ndarray:
    rows = _parallel_map(lambda i: simulate(params, T, base_seed + i).observations, runs, threads)
    return np.vstack(rows)


def _manifest(experiment: str, cfg, schema: list[str], extra: dict | None = None) -> str:
    payload = {
        "experiment": experiment,
        "name": cfg.name,
        "library": f"kalmanar {__version__}",
        "schema": schema,
        "config": cfg.model_dump(),
    }
    if extra:
        payload["extra"] = extra
    return json_text(payload)


def stationary_output_std(params: LdsParams, max_iter: int = 200_000, tol: float = 1e-12) -> float:
    """Stationary standard deviation of Y for a stable system.

    Iterates the state-covariance fixed point P = G P G' + W; raises
    NumericalError when G is not (strictly) stable.
    """
    radius = float(np.max(np.abs(np.linalg.eigvals(params.G))))
    if radius >= 1.0:
        raise NumericalError(
            f"no stationary output variance: spectral radius of G is {radius:.6g} >= 1"
        )
    P = np.zeros_like(params.W)
    for _ in range(max_iter):
        P_next = params.G @ P @ params.G.T + params.W
        if np.max(np.abs(P_next - P)) <= tol:
            P = P_next
            break
        P = P_next
    return float(np.sqrt(params.F @ P @ params.F + params.v))


def build_stream(spec: StreamSpec, length: int, seed: int) -> np.ndarray:
    """Materialize `length` observations from a stream spec."""
    if length < 1:
        raise ConfigError("stream length must be >= 1")
    if spec.kind == "lds":
        return np.asarray(simulate(spec.lds.params(), length - 1, seed).observations)
    if spec.kind == "square_wave":
        if spec.period < 1:
            raise ConfigError("square_wave period must be >= 1")
        blocks = (np.arange(length) // spec.period) % 2
        return np.where(blocks == 0, spec.amplitude, -spec.amplitude).astype(float)
    if spec.kind == "trend":
        rng = np.random.default_rng(seed)
        return spec.drift * np.arange(length) + spec.noise_std * rng.standard_normal(length)
    if spec.kind == "file":
        series = ingest_series(spec.file)
        if series.shape[0] < length:
            raise ConfigError(
                f"ingested series has {series.shape[0]} values, need {length}"
            )
        return series[:length]
    raise ConfigError(f"unknown stream kind '{spec.kind}'")


# ---------------------------------------------------------------------------
# compare


def _ar_pred_rows(theta: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """AR predictions per row of Y; cold-start steps (t < len(theta)) are 0."""
    out = np.zeros_like(Y)
    k = theta.shape[0]
    T1 = Y.shape[1]
    if T1 >= k + 1:
        acc = np.zeros((Y.shape[0], T1 - k))
        for j in range(k):
            acc += theta[j] * Y[:, k - 1 - j : T1 - 1 - j]
        out[:, k:] = acc
    return out


def run_comparison(cfg: CompareConfig) -> list[Artifact]:
    """Per-t mean/std of squared error for every predictor kind, plus a
    summary of final RMSEs (mean/std/stderr of per-run RMSE past burn-in)."""
    params = cfg.lds.params()
    if not cfg.depths or min(cfg.depths) < 0:
        raise ConfigError("depths must be a nonempty list of s >= 0")
    max_depth = max(cfg.depths)
    if cfg.T < max_depth + 2:
        raise ConfigError(f"T = {cfg.T} too small for depth {max_depth} (need T >= s + 2)")
    ogd_lags = cfg.ogd_lags if cfg.ogd_lags is not None else max_depth + 1
    burn_in = cfg.burn_in if cfg.burn_in is not None else max(10, max_depth + 1, ogd_lags)
    if burn_in >= cfg.T:
        raise ConfigError("burn_in leaves no scored points")

    ss = steady_state(params)
    thetas = {d: ar_coefficients(ss, params, d).theta for d in cfg.depths}

    Y = _simulate_rows(params, cfg.T, cfg.seed, cfg.runs, cfg.threads)
    preds: dict[str, np.ndarray] = {}
    preds["persistence"] = np.zeros_like(Y)
    preds["persistence"][:, 1:] = Y[:, :-1]
    bfr = run_filter_batch(params, Y)
    kal = np.zeros_like(Y)
    kal[:, 1:] = bfr.f[1:].T
    preds["kalman"] = kal
    for d in cfg.depths:
        preds[f"ar{d + 1}"] = _ar_pred_rows(thetas[d], Y)

    def ogd_row(i: int) -> np.ndarray:
        out = np.zeros(cfg.T + 1)
        run = run_ogd(Y[i], ogd_lags, cfg.D, cfg.c)
        out[run.ts] = run.yhat
        return out

    preds["ogd"] = np.vstack(_parallel_map(ogd_row, cfg.runs, cfg.threads))

    def best_fixed_row(i: int) -> np.ndarray:
        theta = best_fixed_theta(Y[i], ogd_lags, cfg.D).theta
        out = np.zeros(cfg.T + 1)
        out[ogd_lags:] = ar_predictions(theta, Y[i])[ogd_lags:]
        return out

    preds["best_fixed"] = np.vstack(_parallel_map(best_fixed_row, cfg.runs, cfg.threads))

    order = ["persistence", "kalman"] + [f"ar{d + 1}" for d in sorted(cfg.depths)]
    order += ["ogd", "best_fixed"]
    sqerr = {name: (preds[name] - Y) ** 2 for name in order}

    header = ["t"] + [col for name in order for col in (f"mean_{name}", f"std_{name}")]
    rows = []
    for t in range(1, cfg.T + 1):
        row: list = [t]
        for name in order:
            e = sqerr[name][:, t]
            row += [float(np.mean(e)), float(np.std(e))]
        rows.append(row)

    summary = {}
    for name in order:
        per_run = np.sqrt(np.mean(sqerr[name][:, burn_in:], axis=1))
        summary[name] = {
            "rmse_mean": float(np.mean(per_run)),
            "rmse_std": float(np.std(per_run)),
            "rmse_stderr": float(np.std(per_run) / np.sqrt(cfg.runs)),
            "total_loss_mean": float(np.mean(np.sum(sqerr[name][:, burn_in:], axis=1))),
        }

    csv_name = f"compare.{cfg.name}.csv"
    extra = {"burn_in": burn_in, "ogd_lags": ogd_lags, "predictors": order,
             "steady_state": steady_state_to_dict(ss)}
    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("compare", cfg, header, extra)),
        Artifact(f"compare.{cfg.name}.summary.json", json_text({"burn_in": burn_in, "rmse": summary})),
    ]


# ---------------------------------------------------------------------------
# noise sweep


def noise_sweep(cfg: NoiseSweepConfig) -> list[Artifact]:
    """Loss ratio of the exact filter to the depth-s truncation per (w, v) cell."""
    if not cfg.w_values or not cfg.v_values:
        raise ConfigError("w_values and v_values must be nonempty")
    if min(cfg.w_values) <= 0 or min(cfg.v_values) <= 0:
        raise ConfigError("noise grids must be positive")
    if cfg.T < cfg.depth + 2:
        raise ConfigError(f"T = {cfg.T} too small for depth {cfg.depth}")

    cells = [(w, v) for w in cfg.w_values for v in cfg.v_values]

    def run_cell(ci: int):
        w, v = cells[ci]
        params = cfg.system.to_params(v=v, w=w)
        ss = steady_state(params)
        theta = ar_coefficients(ss, params, cfg.depth).theta
        base = cfg.seed + ci * cfg.trajectories
        Y = np.vstack(
            [simulate(params, cfg.T, base + k).observations for k in range(cfg.trajectories)]
        )
        bfr = run_filter_batch(params, Y)
        start = cfg.depth + 1
        kal_err = (Y[:, start:] - bfr.f[start:].T) ** 2
        ar_err = (Y[:, start:] - _ar_pred_rows(theta, Y)[:, start:]) ** 2
        sum_kf = float(np.sum(kal_err))
        sum_ar = float(np.sum(ar_err))
        count = kal_err.size
        return [
            w,
            v,
            float(np.sqrt(sum_ar / count)),
            float(np.sqrt(sum_kf / count)),
            sum_kf / sum_ar,
        ]

    rows = _parallel_map(run_cell, len(cells), cfg.threads)
    header = ["w", "v", "rmse_ar", "rmse_kf", "ratio"]
    csv_name = f"noise-sweep.{cfg.name}.csv"
    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("noise-sweep", cfg, header, {"depth": cfg.depth})),
    ]


# ---------------------------------------------------------------------------
# depth sweep


def depth_sweep(cfg: DepthSweepConfig) -> list[Artifact]:
    """Mean/std RMSE of the truncation per depth and noise setting, plus the
    remainder-magnitude decay measured on the same runs."""
    if not cfg.depths:
        raise ConfigError("depths must be nonempty")
    max_depth = max(cfg.depths)
    if cfg.T < max_depth + 2:
        raise ConfigError(f"T = {cfg.T} too small for depth {max_depth} (need T >= s + 2)")
    burn_in = cfg.burn_in if cfg.burn_in is not None else max(10, max_depth + 1)
    if burn_in >= cfg.T:
        raise ConfigError("burn_in leaves no scored points")

    rows = []
    rem_rows = []
    kalman_rmse = {}
    for si, setting in enumerate(cfg.settings):
        params = cfg.system.to_params(v=setting.v, w=setting.w)
        ss = steady_state(params)
        base = cfg.seed + si * cfg.runs
        Y = _simulate_rows(params, cfg.T, base, cfg.runs, cfg.threads)
        bfr = run_filter_batch(params, Y)
        kal_rmse = np.sqrt(np.mean((Y[:, burn_in:] - bfr.f[burn_in:].T) ** 2, axis=1))
        kalman_rmse[setting.label()] = {
            "mean": float(np.mean(kal_rmse)),
            "std": float(np.std(kal_rmse)),
        }
        for s in cfg.depths:
            theta = ar_coefficients(ss, params, s).theta
            pred = _ar_pred_rows(theta, Y)
            per_run = np.sqrt(np.mean((Y[:, burn_in:] - pred[:, burn_in:]) ** 2, axis=1))
            rows.append(
                [s, setting.label(), setting.v, float(np.mean(per_run)), float(np.std(per_run))]
            )
            ts, rem = _remainders_from_batch(bfr, s)
            window = rem[ts >= burn_in]
            rem_rows.append(
                [
                    s,
                    setting.label(),
                    setting.v,
                    float(np.mean(np.abs(window))),
                    float(np.median(np.abs(window))),
                ]
            )

    header = ["s", "W_tag", "v", "mean_rmse", "std_rmse"]
    rem_header = ["s", "W_tag", "v", "mean_abs_remainder", "median_abs_remainder"]
    csv_name = f"depth-sweep.{cfg.name}.csv"
    rem_name = f"depth-sweep.{cfg.name}.remainders.csv"
    extra = {"burn_in": burn_in, "kalman_rmse": kalman_rmse}
    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("depth-sweep", cfg, header, extra)),
        Artifact(rem_name, csv_text(rem_header, rem_rows)),
        Artifact(manifest_for(rem_name), _manifest("depth-sweep", cfg, rem_header, extra)),
    ]


# ---------------------------------------------------------------------------
# counterexample


def counterexample_run(cfg: CounterexampleConfig) -> list[Artifact]:
    """W = 0 runs: R_t decay, t*R_t stabilization, and the remainder that
    converges to the true initial state instead of zero."""
    params_true = cfg.lds.params()
    if np.max(np.abs(params_true.W)) != 0.0:
        raise ConfigError("counterexample requires W = 0")
    if np.max(np.abs(params_true.m0)) == 0.0:
        raise ConfigError("counterexample requires a nonzero true initial state m0")
    n = params_true.n
    filter_params = LdsParams(
        G=params_true.G,
        F=params_true.F,
        v=params_true.v,
        W=params_true.W,
        m0=np.zeros(n) if cfg.filter_m0 is None else cfg.filter_m0,
        C0=np.eye(n) if cfg.filter_C0 is None else cfg.filter_C0,
    )
    if cfg.T < cfg.s + 2:
        raise ConfigError(f"T = {cfg.T} too small for s = {cfg.s}")

    Y = _simulate_rows(params_true, cfg.T, cfg.seed, cfg.runs, cfg.threads)
    bfr = run_filter_batch(filter_params, Y)
    ts, rem = _remainders_from_batch(bfr, cfg.s)
    mean_rem = np.mean(rem, axis=1)
    traces = np.trace(bfr.R, axis1=1, axis2=2)

    rows = []
    for idx, t in enumerate(ts):
        rt = float(traces[t])
        rows.append([int(t), rt, float(t) * rt, float(mean_rem[idx])])

    header = ["t", "R_t", "tR_t", "remainder"]
    csv_name = f"counterexample.{cfg.name}.csv"
    extra = {
        "s": cfg.s,
        "filter_m0": filter_params.m0.tolist(),
        "filter_C0": filter_params.C0.tolist(),
        "R_t_column": "trace of the prior covariance R_t (equals R_t itself for n = 1)",
    }
    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("counterexample", cfg, header, extra)),
    ]


# ---------------------------------------------------------------------------
# regret


def _default_family(spec: LdsSpec) -> list[LdsSpec]:
    """The true system plus +-20% perturbations of G's diagonal."""
    base = spec.model_dump()
    G = np.atleast_2d(np.asarray(spec.G, dtype=float))
    out = [spec]
    for factor in (1.2, 0.8):
        pert = G.copy()
        np.fill_diagonal(pert, np.diag(G) * factor)
        member = dict(base)
        member["G"] = pert.tolist()
        out.append(LdsSpec.model_validate(member))
    return out


def regret_eval(cfg: RegretConfig) -> list[Artifact]:
    """Cumulative losses of the learner vs the hindsight ball minimizer and
    the best Kalman filter from a finite family, per horizon."""
    horizons = sorted({int(T) for T in cfg.horizons})
    horizons = [T for T in horizons if T >= cfg.s + 1]
    clip = cfg.clip_bound
    if clip is None:
        if cfg.stream.kind != "lds":
            raise ConfigError("clip_bound is required for non-LDS streams")
        clip = 6.0 * stationary_output_std(cfg.stream.lds.params())
    family = cfg.family
    if family is None:
        if cfg.stream.kind != "lds":
            raise ConfigError("an explicit Kalman family is required for non-LDS streams")
        family = _default_family(cfg.stream.lds)
    if not family:
        raise ConfigError("the Kalman family must be nonempty")

    csv_name = f"regret.{cfg.name}.csv"
    header = ["T", "cumloss_ogd", "cumloss_best_fixed", "cumloss_kalman_best", "normalized_regret"]
    extra = {
        "clip_bound": clip,
        "epsilon": cfg.epsilon,
        "family_size": len(family),
        "family": [m.model_dump() for m in family],
        "kalman_prior": "m0 = 0, C0 = I for every family member",
    }
    if not horizons:
        return [
            Artifact(csv_name, csv_text(header, [])),
            Artifact(manifest_for(csv_name), _manifest("regret", cfg, header, extra)),
        ]
    length = max(horizons)

    streams = np.vstack(
        [
            np.clip(build_stream(cfg.stream, length, cfg.seed + r), -clip, clip)
            for r in range(cfg.runs)
        ]
    )

    ogd_runs = _parallel_map(
        lambda r: run_ogd(streams[r], cfg.s, cfg.D, cfg.c), cfg.runs, cfg.threads
    )

    # family filters, vectorized across runs; priors per the comparison protocol
    n_members = len(family)
    kal_preds = []
    for member in family:
        p = member.params()
        fp = LdsParams(G=p.G, F=p.F, v=p.v, W=p.W, m0=np.zeros(p.n), C0=np.eye(p.n))
        bfr = run_filter_batch(fp, streams)
        kal_preds.append(bfr.f.T)  # (runs, length) with NaN column 0

    rows = []
    per_horizon = {}
    for T in horizons:
        cum_ogd = float(
            np.mean([np.sum(run.loss[: T - cfg.s]) for run in ogd_runs])
        )
        cum_bf = float(
            np.mean(
                _parallel_map(
                    lambda r: best_fixed_theta(streams[r][:T], cfg.s, cfg.D).loss,
                    cfg.runs,
                    cfg.threads,
                )
            )
        )
        kal_cums = []
        for preds in kal_preds:
            err = (streams[:, cfg.s : T] - preds[:, cfg.s : T]) ** 2
            kal_cums.append(float(np.mean(np.sum(err, axis=1))))
        cum_kal = min(kal_cums)
        normalized = (cum_ogd - min(cum_bf, cum_kal)) / np.sqrt(T)
        rows.append([T, cum_ogd, cum_bf, cum_kal, normalized])
        per_horizon[str(T)] = {
            "cumloss_ogd": cum_ogd,
            "cumloss_best_fixed": cum_bf,
            "cumloss_kalman": kal_cums,
        }
    extra["per_horizon"] = per_horizon

    # per-step ledger for the first run
    run0 = ogd_runs[0]
    theta_star = best_fixed_theta(streams[0], cfg.s, cfg.D).theta
    bf_pred = ar_predictions(theta_star, streams[0])
    comparators = ["best_fixed"] + [f"kalman_{i}" for i in range(n_members)]
    ledger = RegretLedger(comparators)
    for idx, t in enumerate(run0.ts):
        comps = {"best_fixed": float(bf_pred[t])}
        for i in range(n_members):
            comps[f"kalman_{i}"] = float(kal_preds[i][0, t])
        ledger.add(int(t), float(streams[0][t]), float(run0.yhat[idx]), comps)
    ledger_name = f"regret.{cfg.name}.ledger.csv"

    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("regret", cfg, header, extra)),
        Artifact(ledger_name, ledger.to_csv()),
        Artifact(manifest_for(ledger_name), _manifest("regret", cfg, ["t", "y", "yhat_ogd"], extra)),
    ]


# ---------------------------------------------------------------------------
# ingest


def ingest_series(spec: SeriesFileSpec) -> np.ndarray:
    """Parse the target column of a CSV and apply d-fold differencing."""
    content = spec.content
    if content is None:
        if spec.path is None:
            raise ConfigError("series spec needs a path or inline content")
        try:
            with open(spec.path, "r", encoding="utf-8") as fh:
                content = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read series file {spec.path}: {exc}") from exc

    lines = [ln for ln in content.replace("\r\n", "\n").split("\n") if ln.strip() != ""]
    if not lines:
        raise ConfigError("series file is empty")

    first = [c.strip() for c in lines[0].split(",")]
    col = spec.column
    start = 0
    if isinstance(col, str):
        if col not in first:
            raise ConfigError(f"column '{col}' not found in header {first}")
        col_idx = first.index(col)
        start = 1
    else:
        col_idx = int(col)
        # a non-numeric first row is a header
        try:
            float(first[col_idx])
        except (ValueError, IndexError):
            start = 1

    values = []
    for line_no in range(start, len(lines)):
        cells = [c.strip() for c in lines[line_no].split(",")]
        if col_idx >= len(cells):
            raise ConfigError(f"line {line_no + 1}: only {len(cells)} columns, need {col_idx + 1}")
        try:
            values.append(float(cells[col_idx]))
        except ValueError:
            raise ConfigError(
                f"line {line_no + 1}: cannot parse '{cells[col_idx]}' as a number"
            ) from None

    series = np.asarray(values, dtype=float)
    for _ in range(spec.differencing):
        series = np.diff(series)
    if series.shape[0] < 3:
        raise ConfigError(
            f"series has only {series.shape[0]} values after differencing {spec.differencing}"
        )
    return series


def run_ingest(cfg: IngestConfig) -> list[Artifact]:
    series = ingest_series(cfg.series)
    header = ["t", "y"]
    rows = ([t, y] for t, y in enumerate(series))
    csv_name = f"ingest.{cfg.name}.csv"
    extra = {
        "length": int(series.shape[0]),
        "min": float(series.min()),
        "max": float(series.max()),
        "differencing": cfg.series.differencing,
        "source_path": cfg.series.path,
    }
    cfg_for_manifest = cfg.model_copy(
        update={"series": cfg.series.model_copy(update={"content": None})}
    )
    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("ingest", cfg_for_manifest, header, extra)),
    ]


# ---------------------------------------------------------------------------
# learning-rate study


def lr_study(cfg: LrStudyConfig) -> list[Artifact]:
    """Per-step loss traces of the learner for each learning-rate constant."""
    if not cfg.c_values:
        raise ConfigError("c_values must be nonempty")
    if min(cfg.c_values) <= 0:
        raise ConfigError("c values must be positive")
    horizon = cfg.T
    if horizon is None:
        if cfg.stream.kind != "file":
            raise ConfigError("T is required for synthetic streams")
        horizon = int(ingest_series(cfg.stream.file).shape[0])
    if horizon < cfg.s + 1:
        raise ConfigError(f"T = {horizon} too small for s = {cfg.s}")

    streams = [build_stream(cfg.stream, horizon, cfg.seed + r) for r in range(cfg.runs)]

    rows = []
    cumulative = {}
    for c in cfg.c_values:
        runs = _parallel_map(
            lambda r: run_ogd(streams[r], cfg.s, cfg.D, c), cfg.runs, cfg.threads
        )
        losses = np.mean(np.vstack([run.loss for run in runs]), axis=0)
        ts = runs[0].ts
        for t, loss in zip(ts, losses):
            rows.append([c, int(t), float(loss)])
        cumulative[f"{c:g}"] = float(np.sum(losses))

    header = ["c", "t", "loss"]
    csv_name = f"lr-study.{cfg.name}.csv"
    extra = {"cumulative_loss": cumulative}
    return [
        Artifact(csv_name, csv_text(header, rows)),
        Artifact(manifest_for(csv_name), _manifest("lr-study", cfg, header, extra)),
    ]


RUNNERS: dict[str, tuple[type, Callable]] = {
    "compare": (CompareConfig, run_comparison),
    "noise-sweep": (NoiseSweepConfig, noise_sweep),
    "depth-sweep": (DepthSweepConfig, depth_sweep),
    "counterexample": (CounterexampleConfig, counterexample_run),
    "regret": (RegretConfig, regret_eval),
    "ingest": (IngestConfig, run_ingest),
    "lr-study": (LrStudyConfig, lr_study),
}
