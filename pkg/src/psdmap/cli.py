"""Thin command-line client for the psdmap service.

Subcommands build HTTP requests against the FastAPI app. By default the app
is driven in-process (no server needed, files land on the local
filesystem); ``--server URL`` or the ``PSDMAP_SERVER`` environment variable
targets a running instance instead. ``PSDMAP_OUT`` overrides the output
directory. Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _request(method: str, path: str, payload=None, server: str | None = None):
    """Issue one request, in-process unless a server URL is given."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.request(method, path, json=payload)
            return resp.status_code, resp.json()

    from .service import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://psdmap.local", timeout=None
        ) as client:
            resp = await client.request(method, path, json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(go())


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _print_summary(summary: dict) -> None:
    print(f"output_dir: {summary['output_dir']}")
    print(f"files: {', '.join(summary['files'])}")
    for cell in summary["cells"]:
        auc = cell.get("auc")
        auc_txt = f" auc={auc:.4f}" if auc is not None else ""
        print(
            f"  {cell['method']:>22s} rate={cell['sensing_rate']:<5g} snr={cell['snr_db']:<5g} "
            f"mse={cell['mean_mse']:.4g} t={cell['mean_seconds']:.4g}s "
            f"fail={cell['fail_fraction']:.3f}{auc_txt}"
        )
    print(f"elapsed: {summary['elapsed_seconds']:.1f}s")


def _fail(status: int, body) -> int:
    detail = body.get("detail", body) if isinstance(body, dict) else body
    print(f"error ({status}): {detail}", file=sys.stderr)
    return EXIT_CONFIG if status in (404, 422) else EXIT_RUNTIME


def _cmd_simulate(args) -> int:
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    payload = {
        "config": config,
        "scale": args.scale,
        "seed": args.seed,
        "output_dir": args.out or os.environ.get("PSDMAP_OUT"),
        "jobs": args.jobs,
    }
    try:
        status, body = _request("POST", "/experiments", payload, args.server)
    except Exception as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    if status != 200:
        return _fail(status, body)
    _print_summary(body)
    return EXIT_OK


def _cmd_figure(args) -> int:
    payload = {
        "scale": args.scale,
        "seed": args.seed,
        "output_dir": args.out or os.environ.get("PSDMAP_OUT"),
        "jobs": args.jobs,
    }
    try:
        status, body = _request("POST", f"/figures/{args.figure}", payload, args.server)
    except Exception as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    if status != 200:
        return _fail(status, body)
    _print_summary(body)
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status, body = _request("POST", "/config/validate", config, args.server)
    except Exception as err:
        print(f"validation failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    if status != 200:
        return _fail(status, body)
    if body["valid"]:
        print("config ok")
        return EXIT_OK
    for issue in body["issues"]:
        print(f"{issue['field']}: {issue['message']}", file=sys.stderr)
    return EXIT_CONFIG


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psdmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--server", default=os.environ.get("PSDMAP_SERVER"),
                       help="URL of a running psdmap service (default: in-process)")

    sim = sub.add_parser("simulate", help="run a sweep from a JSON config file")
    sim.add_argument("--config", required=True, help="path to the experiment config JSON")
    sim.add_argument("--scale", choices=["desk", "paper"], default=None)
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")
    sim.add_argument("--out", default=None, help="override the output directory")
    sim.add_argument("--jobs", type=int, default=None, help="parallel snapshot workers")
    add_common(sim)
    sim.set_defaults(func=_cmd_simulate)

    fig = sub.add_parser("figure", help="run a canned figure sweep")
    fig.add_argument("figure", choices=["fig3", "fig5", "fig6"])
    fig.add_argument("--scale", choices=["desk", "paper"], default="desk")
    fig.add_argument("--seed", type=int, default=0)
    fig.add_argument("--out", default=None)
    fig.add_argument("--jobs", type=int, default=1)
    add_common(fig)
    fig.set_defaults(func=_cmd_figure)

    val = sub.add_parser("validate-config", help="check a config file against the schema")
    val.add_argument("config", help="path to the experiment config JSON")
    add_common(val)
    val.set_defaults(func=_cmd_validate)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
