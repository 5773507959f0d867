"""Command-line entry point: ``python -m src.cli <command> --c ... --lambda ... --mu ... --r ...``."""

import functools
import json
import sys
from typing import Optional, Tuple

import click
import numpy as np
import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from .cfrac import DriftForm
from .config import Config
from .errors import FluidTailError, InvalidParametersError
from .logger import get_logger, setup_logger
from .model import ModelParams
from .pipeline import (
    BoundarySource,
    Tolerances,
    analysis_envelope,
    run_analysis,
    run_simulation,
    run_solve,
    run_validation,
    simulation_envelope,
    validation_envelope,
)
from .report import comparisons_frame, error_envelope, write_csv
from .simulator import SimConfig

logger = get_logger()

EXIT_FAILED_COMPARISON = 1
EXIT_ERROR = 2


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _emit_json(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        with open(out, "w") as handle:
            handle.write(text + "\n")
    click.echo(text)


def _emit_table(title: str, frame: pd.DataFrame) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{value:.6g}" if isinstance(value, float) else str(value) for value in row))
    Console().print(table)


def _emit(fmt: str, title: str, payload: dict, frame: pd.DataFrame, out: Optional[str]) -> None:
    if fmt == "json":
        _emit_json(payload, out)
    elif fmt == "csv":
        click.echo(write_csv(frame, out), nl=False)
    else:
        _emit_table(title, frame)


def _fail(error: FluidTailError) -> None:
    logger.error(f"{error.code}: {error.message}")
    click.echo(json.dumps(error_envelope(error.to_dict()), indent=2, default=_json_default))
    sys.exit(EXIT_ERROR)


def model_options(command):
    """Shared --c/--lambda/--mu/--r options, parsed into a ModelParams."""

    @click.option("--c", "c", type=int, required=True, help="Number of servers.")
    @click.option("--lambda", "lam", type=float, required=True, help="Arrival rate.")
    @click.option("--mu", type=float, required=True, help="Per-server service rate.")
    @click.option("--r", "r", type=float, required=True, help="Fluid rate while all servers are busy.")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="json")
    @click.option("--out", type=click.Path(dir_okay=False), default=None, help="Also write output here.")
    @functools.wraps(command)
    def wrapper(c, lam, mu, r, **kwargs):
        try:
            params = ModelParams(c=c, lam=lam, mu=mu, r=r)
        except ValidationError as exc:
            errors = exc.errors(include_url=False, include_context=False, include_input=False)
            _fail(InvalidParametersError("invalid model parameters", {"errors": errors}))
        try:
            return command(params=params, **kwargs)
        except FluidTailError as exc:
            _fail(exc)

    return wrapper


@click.group()
@click.option("--log-level", default=Config.LOG_LEVEL, show_default=True)
def cli(log_level: str) -> None:
    """Tail asymptotics of the M/M/c-modulated fluid queue."""
    setup_logger(log_level=log_level)


@cli.command()
@model_options
@click.option("--truncation", type=int, default=Config.DEFAULT_TRUNCATION, show_default=True)
@click.option("--boundary", type=click.Choice([s.value for s in BoundarySource]), default="auto")
@click.option("--form", type=click.Choice([f.value for f in DriftForm]), default="exact")
def analyze(params: ModelParams, fmt: str, out: Optional[str], truncation: int, boundary: str, form: str):
    """Classify the tail and compute its constants."""
    result = run_analysis(params, BoundarySource(boundary), truncation, DriftForm(form))
    payload = analysis_envelope(result)
    frame = pd.DataFrame(
        [{"name": name, **q.model_dump(mode="json")} for name, q in result.quantities().items()]
    )
    _emit(fmt, f"Case {result.report.case_tag.value}", payload, frame, out)


@cli.command()
@model_options
@click.option("--truncation", type=int, default=Config.DEFAULT_TRUNCATION, show_default=True)
@click.option("--grid-max", type=float, default=None, help="Largest level for the curves.")
@click.option("--grid-points", type=int, default=101, show_default=True)
def solve(params: ModelParams, fmt: str, out: Optional[str], truncation: int, grid_max: Optional[float], grid_points: int):
    """Solve the truncated-phase system and print its summary or curves."""
    solution, payload = run_solve(params, truncation)
    x_max = grid_max or 10.0 / -solution.dominant_eigenvalue
    frame = solution.curves(np.linspace(0.0, x_max, grid_points))
    if fmt == "json":
        payload["curves"] = {column: frame[column].tolist() for column in frame.columns}
    _emit(fmt, "Spectral solution", payload, frame, out)


@cli.command()
@model_options
@click.option("--horizon", type=float, default=Config.DEFAULT_HORIZON, show_default=True)
@click.option("--warmup", type=float, default=Config.DEFAULT_WARMUP, show_default=True)
@click.option("--seed", type=int, default=Config.DEFAULT_SEED, show_default=True)
@click.option("--stride", type=float, default=Config.DEFAULT_STRIDE, show_default=True)
@click.option("--replications", type=int, default=Config.SIM_REPLICATIONS, show_default=True)
@click.option("--window", type=(float, float), default=None, help="Fit window LO HI.")
@click.option("--power", type=float, default=0.0, show_default=True, help="Known power of x in the tail.")
def simulate(
    params: ModelParams, fmt: str, out: Optional[str], horizon: float, warmup: float, seed: int,
    stride: float, replications: int, window: Optional[Tuple[float, float]], power: float,
):
    """Monte Carlo survival estimate with an optional tail fit."""
    config = _sim_config(params, horizon, warmup, seed, stride)
    estimate, _ = run_simulation(config, replications, window, power, progress=sys.stderr.isatty())
    _emit(fmt, "Empirical survival", simulation_envelope(estimate), estimate.to_frame(), out)


@cli.command()
@model_options
@click.option("--truncation", type=int, default=Config.DEFAULT_TRUNCATION, show_default=True)
@click.option("--boundary", type=click.Choice([s.value for s in BoundarySource]), default="auto")
@click.option("--form", type=click.Choice([f.value for f in DriftForm]), default="exact")
@click.option("--simulate/--no-simulate", "with_simulation", default=True, show_default=True)
@click.option("--horizon", type=float, default=Config.DEFAULT_HORIZON, show_default=True)
@click.option("--warmup", type=float, default=Config.DEFAULT_WARMUP, show_default=True)
@click.option("--seed", type=int, default=Config.DEFAULT_SEED, show_default=True)
@click.option("--stride", type=float, default=Config.DEFAULT_STRIDE, show_default=True)
@click.option("--replications", type=int, default=Config.SIM_REPLICATIONS, show_default=True)
@click.option("--window", type=(float, float), default=None, help="Monte Carlo fit window LO HI.")
@click.option("--tolerance-rate-pole", type=float, default=Config.RATE_TOL_POLE, show_default=True)
@click.option("--tolerance-rate-branch", type=float, default=Config.RATE_TOL_BRANCH, show_default=True)
@click.option("--tolerance-rate-mc", type=float, default=Config.RATE_TOL_MC, show_default=True)
@click.option("--tolerance-prefactor", type=float, default=Config.PREFACTOR_TOL, show_default=True)
def validate(
    params: ModelParams, fmt: str, out: Optional[str], truncation: int, boundary: str, form: str,
    with_simulation: bool, horizon: float, warmup: float, seed: int, stride: float, replications: int,
    window: Optional[Tuple[float, float]], tolerance_rate_pole: float, tolerance_rate_branch: float,
    tolerance_rate_mc: float, tolerance_prefactor: float,
):
    """Compare the analytic tail with the spectral oracle and Monte Carlo."""
    tolerances = Tolerances(
        rate_pole=tolerance_rate_pole,
        rate_branch=tolerance_rate_branch,
        rate_mc=tolerance_rate_mc,
        prefactor=tolerance_prefactor,
    )
    sim_config = _sim_config(params, horizon, warmup, seed, stride) if with_simulation else None
    validation = run_validation(
        params,
        truncation=truncation,
        sim_config=sim_config,
        replications=replications,
        tolerances=tolerances,
        window=window,
        boundary_source=BoundarySource(boundary),
        form=DriftForm(form),
        progress=sys.stderr.isatty(),
    )
    _emit(fmt, "Validation", validation_envelope(validation), comparisons_frame(validation.comparisons), out)
    if not validation.passed:
        sys.exit(EXIT_FAILED_COMPARISON)


def _sim_config(params: ModelParams, horizon: float, warmup: float, seed: int, stride: float) -> SimConfig:
    try:
        return SimConfig(params=params, horizon=horizon, warmup=warmup, seed=seed, sample_stride=stride)
    except ValidationError as exc:
        errors = exc.errors(include_url=False, include_context=False, include_input=False)
        raise InvalidParametersError("invalid simulation settings", {"errors": errors})


if __name__ == "__main__":
    cli()
