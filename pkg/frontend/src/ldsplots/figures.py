"""Figure builders for the experiment CSV artifacts.

Every input CSV must have a sibling ``<name>.manifest.json``; the renderer
reads columns and plots them as-is — it never recomputes statistics. Five
figure kinds cover the documented schemas:

  error_band   t, mean_<p>, std_<p>, ...   mean line + shaded +-1 std per p
  heatmap      w, v, ..., ratio            ratio grid, origin at top-left
  depth_sweep  s, W_tag, v, mean_*, std_*  error bars vs depth, per setting
  regret       T, cumloss_*, ...           cumulative losses vs horizon
  trace        x, columns...               one line per numeric column
                                           (c,t,loss pivots to a line per c)
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("error_band", "heatmap", "depth_sweep", "regret", "trace")


class SchemaError(ValueError):
    """The CSV columns do not match the requested figure kind."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None


@dataclass(frozen=True)
class Table:
    path: str
    header: list[str]
    rows: list[list[str]]
    manifest: dict

    def column(self, name: str) -> list[str]:
        if name not in self.header:
            raise SchemaError(f"{self.path}: missing column '{name}'")
        i = self.header.index(name)
        return [row[i] for row in self.rows]

    def numeric(self, name: str) -> np.ndarray:
        return np.array([float(v) for v in self.column(name)])


def manifest_path(csv_path: str) -> str:
    if not csv_path.endswith(".csv"):
        raise ValueError(f"{csv_path}: not a .csv artifact")
    return csv_path[: -len(".csv")] + ".manifest.json"


def load_table(csv_path: str) -> Table:
    """Read a CSV artifact together with its (required) sibling manifest."""
    mpath = manifest_path(csv_path)
    if not os.path.exists(mpath):
        raise ValueError(f"{csv_path}: missing sibling manifest {os.path.basename(mpath)}")
    with open(mpath, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(csv_path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln != ""]
    if not lines:
        raise ValueError(f"{csv_path}: empty file")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{csv_path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
    return Table(path=csv_path, header=header, rows=rows, manifest=manifest)


def _style(ax, spec: FigureSpec, default_x: str, default_y: str) -> None:
    ax.set_xlabel(spec.xlabel or default_x)
    ax.set_ylabel(spec.ylabel or default_y)
    if spec.title:
        ax.set_title(spec.title)


def _build_error_band(tables: list[Table], spec: FigureSpec, ax) -> None:
    for table in tables:
        t = table.numeric("t")
        names = [h[len("mean_"):] for h in table.header if h.startswith("mean_")]
        if not names:
            raise SchemaError(f"{table.path}: missing column 'mean_<predictor>'")
        for name in names:
            mean = table.numeric(f"mean_{name}")
            (line,) = ax.plot(t, mean, label=name)
            std_col = f"std_{name}"
            if std_col in table.header:
                std = table.numeric(std_col)
                ax.fill_between(t, mean - std, mean + std, alpha=0.25, color=line.get_color())
    ax.legend()
    _style(ax, spec, "t", "squared error")


def _build_heatmap(tables: list[Table], spec: FigureSpec, ax) -> None:
    table = tables[0]
    w = table.numeric("w")
    v = table.numeric("v")
    ratio = table.numeric("ratio")
    w_vals = sorted(set(w.tolist()))
    v_vals = sorted(set(v.tolist()))
    grid = np.full((len(w_vals), len(v_vals)), np.nan)
    for wi, vi, ri in zip(w, v, ratio):
        grid[w_vals.index(wi), v_vals.index(vi)] = ri
    # origin at the top-left corner: smallest w on the top row
    im = ax.imshow(grid, origin="upper", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(v_vals)), [f"{x:g}" for x in v_vals])
    ax.set_yticks(range(len(w_vals)), [f"{x:g}" for x in w_vals])
    ax.figure.colorbar(im, ax=ax, label="ratio")
    _style(ax, spec, "v (observation noise)", "w (process noise)")


def _build_depth_sweep(tables: list[Table], spec: FigureSpec, ax) -> None:
    for table in tables:
        s = table.numeric("s")
        mean_cols = [h for h in table.header if h.startswith("mean_")]
        if not mean_cols:
            raise SchemaError(f"{table.path}: missing column 'mean_*'")
        mean_col = mean_cols[0]
        std_col = "std" + mean_col[len("mean"):]
        has_std = std_col in table.header
        tags = table.column("W_tag") if "W_tag" in table.header else [""] * len(s)
        vs = table.column("v") if "v" in table.header else [""] * len(s)
        groups = {}
        for i, (tag, vv) in enumerate(zip(tags, vs)):
            groups.setdefault(f"{tag}, v={vv}" if tag else "", []).append(i)
        for label, idx in groups.items():
            idx = sorted(idx, key=lambda i: s[i])
            xs = s[idx]
            ys = table.numeric(mean_col)[idx]
            err = table.numeric(std_col)[idx] if has_std else None
            ax.errorbar(xs, ys, yerr=err, marker="o", capsize=3, label=label or None)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    _style(ax, spec, "s", "rmse")


def _build_regret(tables: list[Table], spec: FigureSpec, ax) -> None:
    for table in tables:
        T = table.numeric("T")
        cum_cols = [h for h in table.header if h.startswith("cumloss_")]
        if not cum_cols:
            raise SchemaError(f"{table.path}: missing column 'cumloss_*'")
        for col in cum_cols:
            ax.plot(T, table.numeric(col), marker="o", label=col[len("cumloss_"):])
        if "normalized_regret" in table.header:
            twin = ax.twinx()
            twin.plot(T, table.numeric("normalized_regret"), "k--", label="normalized regret")
            twin.set_ylabel("normalized regret")
    ax.legend()
    _style(ax, spec, "T", "cumulative loss")


def _build_trace(tables: list[Table], spec: FigureSpec, ax) -> None:
    for table in tables:
        if table.header == ["c", "t", "loss"]:
            c = table.numeric("c")
            t = table.numeric("t")
            loss = table.numeric("loss")
            for cv in sorted(set(c.tolist())):
                pick = c == cv
                ax.plot(t[pick], loss[pick], label=f"c={cv:g}")
            continue
        if len(table.header) < 2:
            raise SchemaError(f"{table.path}: trace needs an x column plus data columns")
        x = table.numeric(table.header[0])
        for name in table.header[1:]:
            ax.plot(x, table.numeric(name), label=name)
    ax.legend()
    _style(ax, spec, "t", "value")


_BUILDERS = {
    "error_band": _build_error_band,
    "heatmap": _build_heatmap,
    "depth_sweep": _build_depth_sweep,
    "regret": _build_regret,
    "trace": _build_trace,
}


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Load the inputs and build the figure object (without saving it)."""
    if spec.kind not in _BUILDERS:
        raise ValueError(f"unknown figure kind '{spec.kind}' (choose from {', '.join(KINDS)})")
    if not spec.inputs:
        raise ValueError("no input CSVs given")
    tables = [load_table(path) for path in spec.inputs]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        _BUILDERS[spec.kind](tables, spec, ax)
    except Exception:
        plt.close(fig)
        raise
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Render the figure to spec.output (format from the extension)."""
    fig = build_figure(spec)
    try:
        out_dir = os.path.dirname(spec.output)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        fig.savefig(spec.output)
    finally:
        plt.close(fig)
    return spec.output
