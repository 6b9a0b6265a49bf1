"""Command-line client for the experiment service.

The CLI is a thin HTTP client: it loads a JSON config, applies flag
overrides, POSTs to the experiment endpoint and writes the returned
artifacts under --out. By default it talks to the service in-process
through an ASGI transport (no server needed, fully deterministic);
--server points it at a running instance instead, and `serve` starts one.

Exit codes: 0 success, 1 config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from ._version import __version__
from .experiments import RUNNERS
from .io import write_artifacts, Artifact

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class ServiceClient:
    """POST JSON payloads either in-process (ASGI) or to a remote server."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> tuple[int, dict]:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=600.0) as client:
                resp = client.post(path, json=payload)
            return resp.status_code, resp.json()
        return asyncio.run(self._post_asgi(path, payload))

    async def _post_asgi(self, path: str, payload: dict) -> tuple[int, dict]:
        from .service import app  # deferred so `--help` stays snappy

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://kalmanar.local", timeout=600.0
        ) as client:
            resp = await client.post(path, json=payload)
        return resp.status_code, resp.json()


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SystemExit2(f"cannot read config {path}: {exc}", EXIT_CONFIG)
    except json.JSONDecodeError as exc:
        raise SystemExit2(f"config {path} is not valid JSON: {exc}", EXIT_CONFIG)


class SystemExit2(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _inline_file_content(cfg: dict) -> None:
    """Read any referenced series files so the service never needs our FS."""

    def fill(spec: dict | None) -> None:
        if not isinstance(spec, dict):
            return
        if spec.get("content") is None and spec.get("path"):
            try:
                with open(spec["path"], "r", encoding="utf-8") as fh:
                    spec["content"] = fh.read()
            except OSError as exc:
                raise SystemExit2(
                    f"cannot read series file {spec['path']}: {exc}", EXIT_CONFIG
                )

    fill(cfg.get("series"))
    stream = cfg.get("stream")
    if isinstance(stream, dict):
        fill(stream.get("file"))


def _run_experiment(args) -> int:
    cfg = _load_config(args.config)
    if not isinstance(cfg, dict):
        raise SystemExit2("config must be a JSON object", EXIT_CONFIG)
    # --runs maps onto the field the experiment actually uses
    runs_field = {"noise-sweep": "trajectories", "ingest": None}.get(args.experiment, "runs")
    for flag, field in (("seed", "seed"), ("runs", runs_field), ("threads", "threads")):
        value = getattr(args, flag, None)
        if value is not None and field is not None:
            cfg[field] = value
    if args.out is not None:
        cfg["output_dir"] = args.out
    _inline_file_content(cfg)

    client = ServiceClient(args.server)
    status, body = client.post(f"/experiments/{args.experiment}", cfg)
    if status != 200:
        kind = body.get("error_kind", "config") if isinstance(body, dict) else "config"
        detail = body.get("detail", body) if isinstance(body, dict) else body
        print(f"error ({kind}): {detail}", file=sys.stderr)
        return EXIT_NUMERICAL if kind == "numerical" else EXIT_CONFIG

    out_dir = cfg.get("output_dir") or "."
    artifacts = [Artifact(a["filename"], a["content"]) for a in body["artifacts"]]
    for path in write_artifacts(artifacts, out_dir):
        print(path)
    return EXIT_OK


def _serve(args) -> int:
    import uvicorn

    uvicorn.run("kalmanar.service:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kalmanar",
        description="Kalman/AR forecasting experiments (thin client over the service)",
    )
    parser.add_argument("--version", action="version", version=f"kalmanar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir or .)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--runs", type=int, default=None, help="override config runs")
        p.add_argument("--threads", type=int, default=None, help="override config threads")
        p.add_argument("--server", default=None, help="base URL of a running service")
        p.set_defaults(experiment=name, handler=_run_experiment)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
