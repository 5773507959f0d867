"""Orchestration shared by the command line and the HTTP service."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .asymptotics import TailCase, TailReport, analyze, boundary_tail, laplace_limit
from .cfrac import BoundaryVector, ContinuedFraction, DriftForm, boundary_from_drift_balance
from .config import Config
from .errors import CertificateNotFoundError
from .logger import get_logger
from .model import ModelParams, drift_certificate, is_stable, phase_stationary
from .report import Comparison, Quantity, Source, check, compare, envelope
from .roots import Assumption1Report, ZeroFinding, check_assumption1, find_alpha_tilde
from .simulator import SimConfig, SurvivalEstimate, TailFit, fit_tail, simulate
from .spectral_oracle import SpectralSolution, boundary_vector, fit_decay, solve_truncated

logger = get_logger()

# Survival fit windows in units of 1/α*, per case
_MC_WINDOWS = {TailCase.POLE: (2.0, 8.0), TailCase.POLE_AT_BRANCH: (3.0, 9.0), TailCase.BRANCH: (2.5, 8.8)}
# Largest α*·x used when fitting spectral densities
_MAX_EXPONENT = 600.0


class BoundarySource(str, Enum):
    AUTO = "auto"
    SPECTRAL = "spectral"
    CLOSED_FORM = "closed-form"


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    rate_pole: float = Config.RATE_TOL_POLE
    rate_branch: float = Config.RATE_TOL_BRANCH
    rate_mc: float = Config.RATE_TOL_MC
    prefactor: float = Config.PREFACTOR_TOL


@dataclass
class AnalysisResult:
    params: ModelParams
    zero: ZeroFinding
    boundary: BoundaryVector
    report: TailReport
    solution: Optional[SpectralSolution] = None
    assumption: Optional[Assumption1Report] = None

    def quantities(self) -> Dict[str, Quantity]:
        report = self.report
        return {
            "alpha_star": Quantity(value=report.alpha_star, source=Source.ANALYTIC),
            "alpha1": Quantity(value=report.alpha1, source=Source.ANALYTIC),
            "z_star": Quantity(value=report.z_star, source=Source.ANALYTIC),
            "c_const": Quantity(value=report.c_const, source=Source.ANALYTIC, error=report.c_error),
            "C_const": Quantity(value=report.C_const, source=Source.ANALYTIC, error=report.C_error),
            "C_tilde": Quantity(value=report.C_tilde, source=Source.ANALYTIC, error=report.C_tilde_error),
            "d_ztilde": Quantity(value=report.d_ztilde, source=Source.ANALYTIC),
            "boundary": Quantity(
                value=self.boundary.mass(self.params.c - 1),
                source=Source.SPECTRAL if self.boundary.source == "spectral" else Source.ANALYTIC,
                error=self.boundary.upper_residual,
            ),
        }

    def body(self) -> dict:
        return {
            "case": self.report.case_tag.value,
            "alpha_star": self.report.alpha_star,
            "report": self.report.model_dump(mode="json"),
            "quantities": {name: q.model_dump(mode="json") for name, q in self.quantities().items()},
            "zero": self.zero.model_dump(mode="json"),
            "boundary": self.boundary.model_dump(mode="json"),
            "assumption": self.assumption.model_dump(mode="json") if self.assumption else None,
        }


def params_dict(params: ModelParams) -> dict:
    return params.model_dump(by_alias=True)


def resolve_boundary(
    params: ModelParams,
    source: BoundarySource = BoundarySource.AUTO,
    truncation: int = Config.DEFAULT_TRUNCATION,
) -> Tuple[BoundaryVector, Optional[SpectralSolution]]:
    """Closed form for c = 1 unless the spectral oracle is requested."""
    source = BoundarySource(source)
    if source is BoundarySource.CLOSED_FORM or (source is BoundarySource.AUTO and params.c == 1):
        boundary = boundary_from_drift_balance(params)
        boundary.validate_against(params)
        return boundary, None
    solution = solve_truncated(params, truncation)
    return boundary_vector(solution), solution


def run_analysis(
    params: ModelParams,
    boundary_source: BoundarySource = BoundarySource.AUTO,
    truncation: int = Config.DEFAULT_TRUNCATION,
    form: DriftForm = DriftForm.EXACT,
) -> AnalysisResult:
    zero = find_alpha_tilde(params, form)
    boundary, solution = resolve_boundary(params, boundary_source, truncation)
    report = analyze(params, boundary, form, zero)
    assumption = None
    if report.case_tag is TailCase.POLE:
        assumption = check_assumption1(params, zero, boundary, form)
    return AnalysisResult(params, zero, boundary, report, solution, assumption)


def analysis_envelope(result: AnalysisResult) -> dict:
    return envelope("analysis", params_dict(result.params), **result.body())


def run_solve(
    params: ModelParams,
    truncation: int = Config.DEFAULT_TRUNCATION,
    grid: Optional[Sequence[float]] = None,
    phases: Optional[Sequence[int]] = None,
) -> Tuple[SpectralSolution, dict]:
    solution = solve_truncated(params, truncation)
    body = dict(solution.summary())
    body["boundary_vector"] = boundary_vector(solution).model_dump(mode="json")
    if grid is not None:
        curves = solution.curves(grid, phases)
        body["curves"] = {column: curves[column].tolist() for column in curves.columns}
    return solution, envelope("spectral", params_dict(params), **body)


def default_window(report: TailReport) -> Tuple[float, float]:
    lo, hi = _MC_WINDOWS[report.case_tag]
    return lo / report.alpha_star, hi / report.alpha_star


def spectral_window(report: TailReport) -> Tuple[float, float]:
    """Window where the dominant mode of π_{c−1} outweighs the continuum by e^{−6}."""
    gap = report.alpha1 - report.alpha_star
    if report.case_tag is TailCase.POLE and gap > 0:
        lo, hi = 6.0 / gap, 10.0 / gap
    else:
        lo, hi = 20.0 / report.alpha_star, 40.0 / report.alpha_star
    limit = _MAX_EXPONENT / report.alpha_star
    return min(lo, 0.6 * limit), min(hi, limit)


def run_simulation(
    config: SimConfig,
    replications: int = Config.SIM_REPLICATIONS,
    window: Optional[Sequence[float]] = None,
    power: Optional[float] = None,
    progress: bool = False,
) -> Tuple[SurvivalEstimate, Optional[TailFit]]:
    estimate = simulate(config, replications=replications, progress=progress)
    fit = None
    if window is not None:
        fit = fit_tail(estimate, window, power=0.0 if power is None else power)
    return estimate, fit


def simulation_envelope(estimate: SurvivalEstimate) -> dict:
    params = estimate.config.params
    frequencies, stderr = estimate.phase_frequencies()
    shown = min(params.c + 1, len(frequencies))
    return envelope(
        "simulation",
        params_dict(params),
        config=estimate.config.model_dump(mode="json", exclude={"params"}),
        phase_frequencies=frequencies[:shown].tolist(),
        phase_frequency_stderr=stderr[:shown].tolist(),
        sojourn_fractions=estimate.sojourn_fractions()[:shown].tolist(),
        **estimate.summary(),
    )


@dataclass
class ValidationResult:
    analysis: AnalysisResult
    comparisons: List[Comparison] = field(default_factory=list)
    estimate: Optional[SurvivalEstimate] = None

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.comparisons)

    def body(self) -> dict:
        return {
            "passed": self.passed,
            "case": self.analysis.report.case_tag.value,
            "comparisons": [item.model_dump(mode="json") for item in self.comparisons],
            "analysis": self.analysis.body(),
            "simulation": self.estimate.summary() if self.estimate else None,
        }


def _spectral_comparisons(
    result: AnalysisResult, solution: SpectralSolution, tolerances: Tolerances, form: DriftForm
) -> List[Comparison]:
    params, report = result.params, result.report
    rate_tol = tolerances.rate_pole if report.case_tag is TailCase.POLE else tolerances.rate_branch
    comparisons = [
        compare(
            "decay_rate_spectral",
            Quantity(value=report.alpha_star, source=Source.ANALYTIC),
            Quantity(value=-solution.dominant_eigenvalue, source=Source.SPECTRAL),
            rate_tol,
        )
    ]
    spectral_boundary = solution.boundary_masses()[: params.c]
    comparisons.append(
        check("boundary_nonnegative", float(spectral_boundary.min()), bool(np.all(spectral_boundary >= -Config.NEGATIVE_MASS_TOL)), Source.SPECTRAL)
    )

    # φ_{c−1} at half the decay rate, analytic transform vs spectral Laplace transform
    alpha = 0.5 * report.alpha_star
    fraction = ContinuedFraction(params, form)
    analytic = float(np.real(fraction.top_transform(alpha, result.boundary)))
    comparisons.append(
        compare(
            "laplace_transform_top_phase",
            Quantity(value=float(solution.laplace(alpha)[params.c - 1]), source=Source.SPECTRAL),
            Quantity(value=analytic, source=Source.ANALYTIC),
            1e-6,
        )
    )

    if report.case_tag is TailCase.POLE:
        window = spectral_window(report)
        fit = fit_decay(solution, params.c - 1, window, power=report.power)
        comparisons.append(
            compare(
                "prefactor_spectral",
                Quantity(value=report.C_const, source=Source.ANALYTIC, error=report.C_error),
                Quantity(value=fit.prefactor, source=Source.SPECTRAL, error=fit.prefactor_stderr),
                tolerances.prefactor,
            )
        )
    return comparisons


def _analytic_comparisons(result: AnalysisResult, form: DriftForm) -> List[Comparison]:
    params, report = result.params, result.report
    tail = boundary_tail(params, result.boundary, form)
    limit = laplace_limit(params, result.boundary, report, form=form)
    limit_tol = 1e-4 if report.case_tag is TailCase.POLE else 1e-2
    return [
        compare(
            "laplace_limit",
            Quantity(value=report.c_const, source=Source.ANALYTIC),
            Quantity(value=limit, source=Source.ANALYTIC),
            limit_tol,
        ),
        check("consistency_identity", report.consistency_residual, abs(report.consistency_residual) < 1e-10),
        check("alpha_at_z_tilde", tail.alpha_at_z_tilde, abs(tail.alpha_at_z_tilde) <= 1e-12 * max(1.0, params.cmu)),
        check("d_ztilde_positive", tail.d_ztilde, tail.d_ztilde > 0.0),
        compare(
            "boundary_ratio",
            Quantity(value=params.tail_ratio, source=Source.ANALYTIC),
            Quantity(value=tail.ratio, source=Source.ANALYTIC),
            1e-12,
        ),
        check("z_star_bound", report.z_star, 1.0 < report.z_star <= math.sqrt(params.z_tilde) * (1 + 1e-12)),
    ]


def _simulation_comparisons(
    result: AnalysisResult, estimate: SurvivalEstimate, fit: TailFit, tolerances: Tolerances
) -> List[Comparison]:
    params = result.params
    frequencies, stderr = estimate.phase_frequencies()
    xi = phase_stationary(params).xi(0)
    within = abs(frequencies[0] - xi) <= 3.0 * stderr[0]
    return [
        compare(
            "decay_rate_simulation",
            Quantity(value=result.report.alpha_star, source=Source.ANALYTIC),
            Quantity(value=fit.rate, source=Source.SIMULATION, error=fit.stderr),
            tolerances.rate_mc,
        ),
        check("phase0_frequency", float(frequencies[0]), bool(within), Source.SIMULATION),
        check("atom_at_zero", estimate.atom_fraction, estimate.atom_fraction > 0.0, Source.SIMULATION),
    ]


def run_validation(
    params: ModelParams,
    truncation: int = Config.DEFAULT_TRUNCATION,
    sim_config: Optional[SimConfig] = None,
    replications: int = Config.SIM_REPLICATIONS,
    tolerances: Optional[Tolerances] = None,
    window: Optional[Sequence[float]] = None,
    boundary_source: BoundarySource = BoundarySource.AUTO,
    form: DriftForm = DriftForm.EXACT,
    progress: bool = False,
) -> ValidationResult:
    """Cross-check the analytic tail against the spectral oracle and, with a SimConfig, Monte Carlo."""
    tolerances = tolerances or Tolerances()
    verdict = is_stable(params)
    result = run_analysis(params, boundary_source, truncation, form)
    solution = result.solution or solve_truncated(params, truncation)

    validation = ValidationResult(result)
    validation.comparisons.append(
        check("negative_mean_drift", verdict.mean_drift, verdict.mean_drift < 0.0)
    )
    try:
        certificate = drift_certificate(params)
        validation.comparisons.append(check("drift_certificate", certificate.s, certificate.s > 0.0))
    except CertificateNotFoundError as exc:
        logger.warning(f"No drift certificate: {exc.message}")
        validation.comparisons.append(check("drift_certificate", 0.0, False))
    validation.comparisons.extend(_analytic_comparisons(result, form))
    validation.comparisons.extend(_spectral_comparisons(result, solution, tolerances, form))

    if sim_config is not None:
        estimate, fit = run_simulation(
            sim_config, replications, window or default_window(result.report), result.report.power, progress
        )
        validation.estimate = estimate
        validation.comparisons.extend(_simulation_comparisons(result, estimate, fit, tolerances))

    failed = [item.name for item in validation.comparisons if not item.passed]
    if failed:
        logger.warning(f"Validation failed for {params.label()}: {', '.join(failed)}")
    else:
        logger.info(f"Validation passed for {params.label()}")
    return validation


def validation_envelope(validation: ValidationResult) -> dict:
    return envelope("validation", params_dict(validation.analysis.params), **validation.body())
