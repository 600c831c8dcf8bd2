"""Command-line client for the engine service.

Every subcommand is a thin HTTP call: against a remote server when
--server is given, otherwise against the app mounted in-process.

Exit codes: 0 success, 1 failed simulation check, 2 initialization
failure, 3 configuration or input error.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import click
import httpx

from .config import ConfigError, load_config_file

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INIT_FAILURE = 2
EXIT_CONFIG_ERROR = 3


class ServiceClient:
    def __init__(self, server: Optional[str]):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, body: dict) -> httpx.Response:
        return self._client.post(path, json=body)


def _read_json_file(path: str, what: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file is not valid JSON: {exc}") from exc


def _emit(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _config_body(ctx_params: dict, config_file: Optional[str]) -> dict:
    """Merge config file values with flags (flags win) into the service's
    run-config shape."""
    body: dict = {}
    if config_file:
        body.update(load_config_file(config_file))
    mapping = {
        "mu": "mu",
        "lambda_": "lambda",
        "tau": "tau",
        "generations": "generations",
        "weights": "weights",
        "dispatch_mode": "dispatch_mode",
        "decision": "decision",
        "seed": "seed",
        "max_objects": "max_objects",
        "serial": "serial",
    }
    for param, key in mapping.items():
        value = ctx_params.get(param)
        if value is not None and value is not False:
            body[key] = value
    if ctx_params.get("no_route_cache"):
        body["route_cache"] = False
    if ctx_params.get("endpoint"):
        body["endpoints"] = [
            {
                "url": ctx_params["endpoint"],
                "model": ctx_params.get("model") or "default",
            }
        ]
    return body


@click.group()
@click.option("--server", default=None, help="Base URL of a running sap service.")
@click.pass_context
def main(ctx: click.Context, server: Optional[str]) -> None:
    """Evolutionary principle selection for vision-language tasks."""
    ctx.obj = {"server": server}


@main.command()
@click.argument("task_file")
@click.argument("manifest_file")
@click.option("--config", "config_file", default=None, help="JSON config file.")
@click.option("--mu", type=int, default=None)
@click.option("--lambda", "lambda_", type=int, default=None)
@click.option("--tau", type=int, default=None)
@click.option("--generations", type=int, default=None)
@click.option("--weights", default=None, help="Fitness weights c,d,e,u.")
@click.option(
    "--dispatch-mode", type=click.Choice(["one-call", "per-route"]), default=None
)
@click.option("--decision", type=click.Choice(["elite", "aggregate"]), default=None)
@click.option("--no-route-cache", is_flag=True, default=False)
@click.option("--seed", type=int, default=None)
@click.option("--max-objects", type=int, default=None)
@click.option("--endpoint", default=None, help="Model endpoint URL.")
@click.option("--model", default=None, help="Model name for the endpoint.")
@click.option("--serial", is_flag=True, default=False)
@click.option("--out", default=None, help="Write the run-history JSON here.")
@click.pass_context
def run(ctx: click.Context, task_file: str, manifest_file: str, config_file, out, **params):
    """Run the full pipeline for one task."""
    try:
        body = {
            "task": _read_json_file(task_file, "task"),
            "manifest": _read_json_file(manifest_file, "manifest"),
            "config": _config_body(params, config_file),
        }
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    response = ServiceClient(ctx.obj["server"]).post("/run", body)
    doc = response.json()
    if response.status_code != 200:
        click.echo(f"error: {doc.get('error', 'unknown')}", err=True)
        sys.exit(doc.get("exit_code", EXIT_CONFIG_ERROR))
    _emit(doc, out)
    sys.exit(EXIT_OK)


@main.command()
@click.option(
    "--experiment",
    type=click.Choice(["monotone", "improvement", "coverage", "linearization"]),
    required=True,
)
@click.option("--q", type=float, default=0.2)
@click.option("--mu", type=int, default=2)
@click.option("--lambda", "lambda_", type=int, default=2)
@click.option("--T", "generations", type=int, default=10)
@click.option("--trials", type=int, default=1000)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None)
@click.pass_context
def simulate(ctx: click.Context, experiment, q, mu, lambda_, generations, trials, seed, out):
    """Run one statistical verification experiment."""
    body = {
        "experiment": experiment,
        "q": q,
        "mu": mu,
        "lambda": lambda_,
        "T": generations,
        "trials": trials,
        "seed": seed,
    }
    response = ServiceClient(ctx.obj["server"]).post("/simulate", body)
    doc = response.json()
    if response.status_code != 200:
        click.echo(f"error: {doc.get('error', 'unknown')}", err=True)
        sys.exit(doc.get("exit_code", EXIT_CONFIG_ERROR))
    _emit(doc, out)
    sys.exit(EXIT_OK if doc.get("pass") else EXIT_CHECK_FAILED)


@main.command("cost-report")
@click.option("--mu", type=int, default=2)
@click.option("--lambda", "lambda_", type=int, default=2)
@click.option("--tau", type=int, default=2)
@click.option("--mean-route-length", default="100")
@click.option(
    "--history", default=None, help="Derive the mean route length from a run-history file."
)
@click.option("--out", default=None)
@click.pass_context
def cost_report_cmd(ctx: click.Context, mu, lambda_, tau, mean_route_length, history, out):
    """Evaluate the analytic attention-cost comparison."""
    if history:
        try:
            doc = _read_json_file(history, "history")
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG_ERROR)
        tokens = [
            route["tokens"]
            for record in doc.get("generations", [])
            for evaluation in record.get("evaluations", [])
            if evaluation
            for route in evaluation.get("routes", [])
        ]
        if tokens:
            mean_route_length = str(Fraction(sum(tokens), len(tokens)))
        cfg = doc.get("config", {})
        mu = cfg.get("mu", mu)
        lambda_ = cfg.get("lambda", lambda_)
        tau = cfg.get("tau", tau)
    body = {"mu": mu, "lambda": lambda_, "tau": tau, "mean_route_length": mean_route_length}
    response = ServiceClient(ctx.obj["server"]).post("/cost-report", body)
    doc = response.json()
    if response.status_code != 200:
        click.echo(f"error: {doc.get('error', 'unknown')}", err=True)
        sys.exit(doc.get("exit_code", EXIT_CONFIG_ERROR))
    _emit(doc, out)
    sys.exit(EXIT_OK)


@main.command("validate-manifest")
@click.argument("manifest_file")
@click.option("--max-objects", type=int, default=32)
@click.option("--out", default=None)
@click.pass_context
def validate_manifest_cmd(ctx: click.Context, manifest_file, max_objects, out):
    """Check a grounding manifest against the schema and integrity rules."""
    try:
        manifest = _read_json_file(manifest_file, "manifest")
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    body = {"manifest": manifest, "cap": max_objects}
    response = ServiceClient(ctx.obj["server"]).post("/validate-manifest", body)
    doc = response.json()
    _emit(doc, out)
    sys.exit(EXIT_OK if doc.get("valid") else EXIT_CONFIG_ERROR)


if __name__ == "__main__":
    main()
