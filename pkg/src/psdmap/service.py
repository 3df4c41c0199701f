"""FastAPI service wrapping the experiment harness.

Sweeps are long-running batch jobs, so the service runs them synchronously
inside the request and returns a summary pointing at the files written on
the server's filesystem. The CLI drives this app in-process by default.
"""

from __future__ import annotations

import math
from typing import Any, Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ValidationError

from . import __version__
from .harness import FIGURES, ExperimentConfig, RunResult, apply_scale, figure_config, run_experiment, run_figure

app = FastAPI(title="psdmap service", version=__version__)


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidationIssue(BaseModel):
    field: str
    message: str


class ValidateResponse(BaseModel):
    valid: bool
    issues: list[ValidationIssue] = []


class CellSummary(BaseModel):
    method: str
    sensing_rate: float
    snr_db: float
    mean_mse: float
    mean_seconds: float
    fail_fraction: float
    auc: float | None = None
    snr_auc: float | None = None


class RunSummary(BaseModel):
    output_dir: str
    files: list[str]
    cells: list[CellSummary]
    elapsed_seconds: float


class RunRequest(BaseModel):
    """Config document plus the command-line style overrides."""

    config: dict[str, Any]
    scale: Literal["desk", "paper"] | None = None
    seed: int | None = None
    output_dir: str | None = None
    jobs: int | None = None


class FigureRequest(BaseModel):
    scale: Literal["desk", "paper"] = "desk"
    seed: int = 0
    output_dir: str | None = None
    jobs: int = 1


def _issues(err: ValidationError) -> list[ValidationIssue]:
    return [
        ValidationIssue(
            field=".".join(str(loc) for loc in item["loc"]) or "<config>",
            message=item["msg"],
        )
        for item in err.errors()
    ]


def _summary(result: RunResult) -> RunSummary:
    return RunSummary(
        output_dir=result.output_dir,
        files=result.files,
        cells=[CellSummary(**cell) for cell in result.cells],
        elapsed_seconds=result.elapsed_seconds,
    )


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/config/schema")
def config_schema() -> dict:
    """JSON schema of the experiment configuration document."""
    return ExperimentConfig.model_json_schema()


@app.post("/config/validate", response_model=ValidateResponse)
def validate_config(document: dict[str, Any]) -> ValidateResponse:
    try:
        ExperimentConfig(**document)
    except ValidationError as err:
        return ValidateResponse(valid=False, issues=_issues(err))
    return ValidateResponse(valid=True)


@app.post("/experiments", response_model=RunSummary)
def run_experiment_endpoint(request: RunRequest) -> RunSummary:
    try:
        cfg = ExperimentConfig(**request.config)
    except ValidationError as err:
        raise HTTPException(status_code=422, detail=[i.model_dump() for i in _issues(err)])
    if request.scale is not None:
        cfg = apply_scale(cfg, request.scale)
    updates: dict[str, Any] = {}
    if request.seed is not None:
        updates["master_seed"] = request.seed
    if request.output_dir is not None:
        updates["output_dir"] = request.output_dir
    if request.jobs is not None:
        updates["jobs"] = request.jobs
    if updates:
        cfg = cfg.model_copy(update=updates)
    try:
        result = run_experiment(cfg)
    except Exception as err:  # surface runtime failures as a clean 500
        raise HTTPException(status_code=500, detail=f"run failed: {err}")
    return _summary(result)


@app.get("/figures/{figure}/config")
def get_figure_config(figure: str, scale: Literal["desk", "paper"] = "desk", seed: int = 0) -> dict:
    if figure not in FIGURES:
        raise HTTPException(status_code=404, detail=f"unknown figure {figure!r}")
    cfg = figure_config(figure, scale=scale, seed=seed)
    doc = cfg.model_dump()
    # JSON cannot carry IEEE infinities; mirror the accepted "inf" spelling
    doc["snr_db_list"] = ["inf" if math.isinf(v) else v for v in cfg.snr_db_list]
    return doc


@app.post("/figures/{figure}", response_model=RunSummary)
def run_figure_endpoint(figure: str, request: FigureRequest) -> RunSummary:
    if figure not in FIGURES:
        raise HTTPException(status_code=404, detail=f"unknown figure {figure!r}")
    try:
        result = run_figure(
            figure,
            scale=request.scale,
            seed=request.seed,
            output_dir=request.output_dir,
            jobs=request.jobs,
        )
    except Exception as err:
        raise HTTPException(status_code=500, detail=f"run failed: {err}")
    return _summary(result)
