"""HTTP facade over the engine: run, simulate, cost-report, and manifest
validation as service endpoints.

The CLI is a thin client of this app; tests and single-user setups mount
it in-process, multi-client deployments serve it with uvicorn.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import ConfigError, build_config, parse_weights
from .evolution import InitializationError
from .grounding import IntegrityError, ManifestError, load_grounding_set
from .pipeline import TaskError, run_pipeline
from .scheduler import cost_from_params
from .simulation import EXPERIMENTS, run_experiment


class EndpointSpec(BaseModel):
    url: str
    model: str = "default"
    max_concurrency: int = Field(default=4, ge=1)


class RunConfigSpec(BaseModel):
    mu: Optional[int] = None
    lam: Optional[int] = Field(default=None, alias="lambda")
    tau: Optional[int] = None
    generations: Optional[int] = None
    weights: Optional[str] = None  # "c,d,e,u"
    dispatch_mode: Optional[str] = None
    decision: Optional[str] = None
    route_cache: Optional[bool] = None
    seed: Optional[int] = None
    max_objects: Optional[int] = None
    serial: Optional[bool] = None
    attempts: Optional[int] = None
    backoff_base: Optional[float] = None
    endpoints: list[EndpointSpec] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


class RunRequest(BaseModel):
    task: dict
    manifest: dict
    config: RunConfigSpec = Field(default_factory=RunConfigSpec)


class SimulateRequest(BaseModel):
    experiment: str
    q: float = 0.2
    mu: int = 2
    lam: int = Field(default=2, alias="lambda")
    generations: int = Field(default=10, alias="T")
    trials: int = 1000
    seed: int = 0

    model_config = {"populate_by_name": True}


class CostRequest(BaseModel):
    mu: int = 2
    lam: int = Field(default=2, alias="lambda")
    tau: int = 2
    mean_route_length: str = "100"  # rational token count

    model_config = {"populate_by_name": True}


class ValidateManifestRequest(BaseModel):
    manifest: dict
    cap: int = Field(default=32, ge=1)


class ValidationReport(BaseModel):
    valid: bool
    images: int = 0
    objects: int = 0
    warnings: list[str] = Field(default_factory=list)
    error: Optional[str] = None


def _to_run_config(spec: RunConfigSpec):
    from .scheduler import Endpoint

    flags = spec.model_dump(exclude={"weights", "endpoints"}, exclude_none=True)
    if spec.weights is not None:
        flags["weights"] = parse_weights(spec.weights)
    if spec.endpoints:
        flags["endpoints"] = [
            Endpoint(url=e.url, model=e.model, max_concurrency=e.max_concurrency)
            for e in spec.endpoints
        ]
    return build_config(**flags)


def create_app() -> FastAPI:
    app = FastAPI(title="sap-engine", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/run")
    def run(request: RunRequest):
        try:
            config = _to_run_config(request.config)
            report = run_pipeline(request.task, request.manifest, config)
        except (ConfigError, ManifestError, IntegrityError, TaskError) as exc:
            return JSONResponse(
                status_code=422, content={"error": str(exc), "exit_code": 3}
            )
        except InitializationError as exc:
            return JSONResponse(
                status_code=502, content={"error": str(exc), "exit_code": 2}
            )
        return report

    @app.post("/simulate")
    def simulate(request: SimulateRequest):
        if request.experiment not in EXPERIMENTS:
            return JSONResponse(
                status_code=422,
                content={
                    "error": f"experiment must be one of {list(EXPERIMENTS)}",
                    "exit_code": 3,
                },
            )
        try:
            passed, doc = run_experiment(
                request.experiment,
                q=request.q,
                mu=request.mu,
                lam=request.lam,
                generations=request.generations,
                trials=request.trials,
                seed=request.seed,
            )
        except ValueError as exc:
            return JSONResponse(
                status_code=422, content={"error": str(exc), "exit_code": 3}
            )
        doc["pass"] = passed
        return doc

    @app.post("/cost-report")
    def cost(request: CostRequest):
        try:
            lbar = Fraction(request.mean_route_length)
        except (ValueError, ZeroDivisionError) as exc:
            return JSONResponse(
                status_code=422,
                content={"error": f"mean_route_length: {exc}", "exit_code": 3},
            )
        report = cost_from_params(request.mu + request.lam, request.tau, lbar)
        return report.as_dict()

    @app.post("/validate-manifest", response_model=ValidationReport)
    def validate_manifest(request: ValidateManifestRequest):
        try:
            gs = load_grounding_set(request.manifest, cap=request.cap)
        except (ManifestError, IntegrityError) as exc:
            return ValidationReport(valid=False, error=str(exc))
        warnings = []
        declared = len(request.manifest.get("objects", []))
        if declared > len(gs.objects):
            warnings.append(
                f"{declared - len(gs.objects)} objects dropped by per-image cap {request.cap}"
            )
        return ValidationReport(
            valid=True,
            images=len(gs.images),
            objects=len(gs.objects),
            warnings=warnings,
        )

    return app


app = create_app()
