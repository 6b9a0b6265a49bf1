"""Text artifact helpers: CSV/JSON formatting shared by all experiments.

Floats are printed with 17 significant digits so every CSV value
round-trips exactly through float64 parsing. Manifests are JSON with
sorted keys and no timestamps, keeping artifacts byte-identical across
repeated runs of the same config.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Sequence


def fmt(x: float) -> str:
    """Format a float with 17 significant digits (exact float64 round-trip)."""
    return "%.17g" % float(x)


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, str):
        return value
    return fmt(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Render a CSV with UTF-8/LF conventions and a trailing newline."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Split a CSV produced by :func:`csv_text` back into header + rows."""
    lines = [ln for ln in text.split("\n") if ln != ""]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class Artifact:
    """A named text artifact produced by an experiment."""

    filename: str
    content: str


def manifest_for(csv_filename: str) -> str:
    """Sibling manifest filename for a CSV artifact."""
    if not csv_filename.endswith(".csv"):
        raise ValueError("manifests accompany .csv artifacts")
    return csv_filename[: -len(".csv")] + ".manifest.json"


def write_artifacts(artifacts: Iterable[Artifact], out_dir: str) -> list[str]:
    """Write artifacts under out_dir; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for art in artifacts:
        path = os.path.join(out_dir, art.filename)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(art.content)
        paths.append(path)
    return paths
