"""Tail regime classification and the asymptotic constants of the stationary law.

The dominant singularity α* of φ_{c−1}(α) = L(α, Z₀(α)) is either the zero
α̃ of D(α) = Ĥ₁(α, Z₀(α)) (a pole) or the branch point α₁ of Z₀. The three
cases map to densities

    Case I    π_{c−1}(x) ~ C₁·x^{k−1}·e^{−α*x},   C₁ = c₁/Γ(k)
    Case II   π_{c−1}(x) ~ C₂·x^{−1/2}·e^{−α*x},  C₂ = c₂/√π
    Case III  π_{c−1}(x) ~ C₃·x^{−3/2}·e^{−α*x},  C₃ = c₃/√π

where c₁..c₃ are the leading coefficients of φ_{c−1} (Case III: of φ′_{c−1})
at α*.
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import gamma

from .cfrac import BoundaryVector, ContinuedFraction, DriftForm
from .config import Config
from .errors import AssumptionViolatedError, ZeroDenominatorError
from .logger import get_logger
from .model import ModelParams, phase_stationary, require_stable
from .roots import ZeroFinding, find_alpha_tilde

logger = get_logger()


class TailCase(str, Enum):
    POLE = "I"
    POLE_AT_BRANCH = "II"
    BRANCH = "III"


_POWERS = {TailCase.POLE_AT_BRANCH: -0.5, TailCase.BRANCH: -1.5}


class TailDescriptor(BaseModel):
    """π(x) ~ prefactor·x^power·e^{−rate·x} and Π(x) − limit ~ −(prefactor/rate)·x^power·e^{−rate·x}."""

    model_config = ConfigDict(frozen=True)

    phase: Optional[int]
    rate: float
    power: float
    prefactor: float
    limit: float

    @property
    def cdf_prefactor(self) -> float:
        return -self.prefactor / self.rate

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.prefactor * x ** self.power * np.exp(-self.rate * x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.limit + self.cdf_prefactor * x ** self.power * np.exp(-self.rate * x)


class BoundaryTail(BaseModel):
    """Π_i(0) ~ d_z̃·(1/z̃)^{i+1}."""

    model_config = ConfigDict(frozen=True)

    d_ztilde: float
    z_tilde: float
    alpha_at_z_tilde: float
    ratio: float
    # z̃^c·ξ_{c−1}, which d_z̃ equals for the stationary boundary vector
    identity_value: float

    def mass(self, phase: int) -> float:
        return self.d_ztilde * self.ratio ** (phase + 1)


class TailReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    case_tag: TailCase
    alpha_star: float
    alpha1: float
    alpha2: float
    alpha_tilde: Optional[float] = None
    k: int = 1
    z_star: float
    z_tilde: float
    c_const: float
    C_const: float
    C_tilde: float
    d_ztilde: float
    power: float
    # π_{i+1}/π_i for i ≥ c−1, equal to λz*/(cμ)
    phase_ratio: float
    lower_multipliers: List[float]
    consistency_residual: float
    c_error: float = 0.0
    C_error: float = 0.0
    C_tilde_error: float = 0.0
    form: DriftForm = DriftForm.EXACT
    boundary_source: str = "user"


def classify(params: ModelParams, zero: ZeroFinding) -> Tuple[TailCase, float]:
    require_stable(params)
    alpha1 = zero.alpha1
    if zero.alpha_tilde is None:
        case, alpha_star = TailCase.BRANCH, alpha1
    elif zero.at_branch_point or abs(zero.alpha_tilde - alpha1) <= Config.BRANCH_TIE_TOL * alpha1:
        case, alpha_star = TailCase.POLE_AT_BRANCH, alpha1
    else:
        case, alpha_star = TailCase.POLE, zero.alpha_tilde
    if not 0.0 < alpha_star <= alpha1:
        raise AssumptionViolatedError(
            "decay rate lies outside (0, alpha1]",
            {"alpha_star": alpha_star, "alpha1": alpha1},
        )
    return case, alpha_star


def _z_star(fraction: ContinuedFraction, alpha_star: float) -> float:
    return fraction.kernel.z0_real(alpha_star)


def _numerator(fraction: ContinuedFraction, alpha: float, boundary: BoundaryVector) -> float:
    z0 = _z_star(fraction, alpha)
    return float(np.real(fraction.numerator_N(alpha, z0, boundary)))


def constant_c1(
    params: ModelParams,
    boundary: BoundaryVector,
    zero: ZeroFinding,
    form: DriftForm = DriftForm.EXACT,
) -> float:
    """lim (α̃−α)^k φ_{c−1}(α) = (−1)^{k+1}·k!·N(α̃)/D^{(k)}(α̃)."""
    if zero.alpha_tilde is None or zero.derivative is None:
        raise AssumptionViolatedError("pole constant needs a zero below alpha1", {"alpha1": zero.alpha1})
    fraction = ContinuedFraction(params, form)
    k, alpha = zero.multiplicity, zero.alpha_tilde
    tol = Config.ZERO_TOL * zero.scale / zero.alpha1 ** k
    if abs(zero.derivative) < tol:
        raise ZeroDenominatorError(
            "derivative of H1_hat(alpha, Z0(alpha)) vanishes at alpha_tilde",
            {"alpha_tilde": alpha, "k": k, "derivative": zero.derivative},
        )
    numerator = _numerator(fraction, alpha, boundary)
    return (-1) ** (k + 1) * math.factorial(k) * numerator / zero.derivative


def constant_c2(params: ModelParams, boundary: BoundaryVector, form: DriftForm = DriftForm.EXACT) -> float:
    """2λN(α₁) / (∂_zĤ₁(α₁, z*)·r·√(α₂−α₁))."""
    fraction = ContinuedFraction(params, form)
    branch = fraction.kernel.branch
    z_star = _z_star(fraction, branch.alpha1)
    slope = float(np.real(fraction.h1_hat_dz(branch.alpha1, z_star)))
    if abs(slope) < Config.ZERO_TOL * max(1.0, params.cmu):
        raise ZeroDenominatorError("dH1_hat/dz vanishes at the branch point", {"z_star": z_star})
    numerator = _numerator(fraction, branch.alpha1, boundary)
    return 2.0 * params.lam * numerator / (slope * params.r * math.sqrt(branch.alpha2 - branch.alpha1))


def constant_c3(params: ModelParams, boundary: BoundaryVector, form: DriftForm = DriftForm.EXACT) -> float:
    """Coefficient of 1/√(α₁−α) in φ′_{c−1}(α): ∂_zL(α₁, z*)·r·√(α₂−α₁)/(4λ)."""
    fraction = ContinuedFraction(params, form)
    branch = fraction.kernel.branch
    z_star = _z_star(fraction, branch.alpha1)
    h1 = float(np.real(fraction.h1_hat(branch.alpha1, z_star)))
    if abs(h1) < Config.ZERO_TOL * max(1.0, params.cmu) * z_star ** params.c:
        raise ZeroDenominatorError("H1_hat vanishes at the branch point", {"z_star": z_star})
    slope = float(np.real(fraction.level_transform_dz(branch.alpha1, z_star, boundary)))
    return slope * params.r * math.sqrt(branch.alpha2 - branch.alpha1) / (4.0 * params.lam)


def density_prefactors(case: TailCase, c_const: float, k: int = 1) -> Tuple[float, float]:
    """(C, power) of the density asymptotic for the given case."""
    case = TailCase(case)
    if case is TailCase.POLE:
        return c_const / gamma(k), float(k - 1)
    return c_const / math.sqrt(math.pi), _POWERS[case]


def joint_tail(phase: int, report: TailReport, params: ModelParams) -> TailDescriptor:
    """Phases i ≥ c−1: prefactor C·(λz*/(cμ))^{i−c+1}."""
    if phase < params.c - 1:
        raise ValueError(f"joint_tail covers phases >= {params.c - 1}, got {phase}")
    xi = float(phase_stationary(params).xi(phase))
    return TailDescriptor(
        phase=phase,
        rate=report.alpha_star,
        power=report.power,
        prefactor=report.C_const * report.phase_ratio ** (phase - params.c + 1),
        limit=xi,
    )


def phi_lower_chain_tail(
    phase: int, report: TailReport, params: ModelParams, form: Optional[DriftForm] = None
) -> TailDescriptor:
    if not 0 <= phase <= params.c - 2:
        raise ValueError(f"lower chain covers phases 0..{params.c - 2}, got {phase}")
    fraction = ContinuedFraction(params, form or report.form)
    multiplier = float(fraction.phi_chain_coeffs().multiplier(phase, report.alpha_star))
    return TailDescriptor(
        phase=phase,
        rate=report.alpha_star,
        power=report.power,
        prefactor=multiplier * report.C_const,
        limit=float(phase_stationary(params).xi(phase)),
    )


def lower_multipliers(params: ModelParams, alpha_star: float, form: DriftForm = DriftForm.EXACT) -> List[float]:
    chain = ContinuedFraction(params, form).phi_chain_coeffs()
    return [float(chain.multiplier(i, alpha_star)) for i in range(params.c - 1)]


def marginal_factor(params: ModelParams, alpha_star: float, form: DriftForm = DriftForm.EXACT) -> float:
    """Ĥ₁(α*, 1)/H(α*, 1) + Σ_k Π_{m=k}^{c−2} A_m(α*)."""
    fraction = ContinuedFraction(params, form)
    kernel_at_one = float(np.real(fraction.kernel.kernel_H(alpha_star, 1.0)))
    upper = float(np.real(fraction.h1_hat(alpha_star, 1.0))) / kernel_at_one
    return upper + sum(lower_multipliers(params, alpha_star, form))


def marginal_tail(report: TailReport, params: ModelParams) -> TailDescriptor:
    return TailDescriptor(
        phase=None,
        rate=report.alpha_star,
        power=report.power,
        prefactor=report.C_tilde,
        limit=1.0,
    )


def boundary_tail(
    params: ModelParams, boundary: BoundaryVector, form: DriftForm = DriftForm.EXACT
) -> BoundaryTail:
    """d_z̃ = [Ĥ₁(0, z̃)φ_{c−1}(0) + Ĥ₀(0, z̃)]/(λ(z̃−1)) with φ_{c−1}(0) = ξ_{c−1} − Π_{c−1}(0)."""
    require_stable(params)
    fraction = ContinuedFraction(params, form)
    z_tilde = params.z_tilde
    alpha = float(np.real(fraction.kernel.alpha_of_z(z_tilde)))
    xi_top = float(phase_stationary(params).xi(params.c - 1))
    phi_top = xi_top - boundary.mass(params.c - 1)
    value = fraction.h1_hat(0.0, z_tilde) * phi_top + fraction.h0_hat(0.0, z_tilde, boundary)
    d_ztilde = float(np.real(value)) / (params.lam * (z_tilde - 1.0))
    if d_ztilde <= 0.0:
        logger.warning(f"Boundary tail prefactor is not positive: d_ztilde={d_ztilde:.6g}")
    return BoundaryTail(
        d_ztilde=d_ztilde,
        z_tilde=z_tilde,
        alpha_at_z_tilde=alpha,
        ratio=1.0 / z_tilde,
        identity_value=z_tilde ** params.c * xi_top,
    )


def consistency_residual(params: ModelParams, alpha_star: float, z_star: float) -> float:
    """−(λ/cμ)z* + (λ+cμ)/cμ − rα*/cμ − 1/z*, zero because H(α*, z*) = 0."""
    cmu = params.cmu
    return -(params.lam / cmu) * z_star + (params.lam + cmu) / cmu - params.r * alpha_star / cmu - 1.0 / z_star


def laplace_limit(
    params: ModelParams,
    boundary: BoundaryVector,
    report: TailReport,
    offset: float = 1e-4,
    form: Optional[DriftForm] = None,
) -> float:
    """Leading coefficient of φ_{c−1} at α* read off L(α, Z₀(α)) just below α*.

    Case I: (α*−α)^k·φ; Case II: √(α*−α)·φ; Case III: (φ(α*)−φ(α))/(2√(α*−α)).
    One Richardson step removes the first correction term.
    """
    fraction = ContinuedFraction(params, form or report.form)
    alpha_star = report.alpha_star

    def phi(alpha):
        return float(np.real(fraction.top_transform(alpha, boundary)))

    if report.case_tag is TailCase.POLE:
        def scaled(h):
            return h ** report.k * phi(alpha_star - h)

        return 2.0 * scaled(0.5 * offset) - scaled(offset)
    if report.case_tag is TailCase.POLE_AT_BRANCH:
        def scaled(h):
            return math.sqrt(h) * phi(alpha_star - h)
    else:
        at_branch = phi(alpha_star)

        def scaled(h):
            return (at_branch - phi(alpha_star - h)) / (2.0 * math.sqrt(h))

    return 2.0 * scaled(0.25 * offset) - scaled(offset)


def _relative_uncertainty(
    fraction: ContinuedFraction, boundary: BoundaryVector, zero: Optional[ZeroFinding], alpha_star: float
) -> float:
    rel = 0.0
    if zero is not None and zero.derivative and zero.multiplicity > 1:
        rel += zero.derivative_error / abs(zero.derivative)
    z_star = _z_star(fraction, alpha_star)
    psi = abs(float(np.real(boundary.psi(z_star))))
    if psi > 0.0:
        rel += boundary.psi_error(z_star) / psi
    top = boundary.mass(fraction.params.c - 1)
    if top > 0.0:
        rel += boundary.upper_residual / top
    return rel


def analyze(
    params: ModelParams,
    boundary: BoundaryVector,
    form: DriftForm = DriftForm.EXACT,
    zero: Optional[ZeroFinding] = None,
) -> TailReport:
    require_stable(params)
    boundary.validate_against(params)
    zero = zero if zero is not None else find_alpha_tilde(params, form)
    case, alpha_star = classify(params, zero)
    fraction = ContinuedFraction(params, form)
    branch = fraction.kernel.branch

    if case is TailCase.POLE:
        c_const = constant_c1(params, boundary, zero, form)
        k = zero.multiplicity
    elif case is TailCase.POLE_AT_BRANCH:
        c_const, k = constant_c2(params, boundary, form), 1
    else:
        c_const, k = constant_c3(params, boundary, form), 1
    if c_const == 0.0:
        logger.warning("Leading constant vanishes; the boundary vector is degenerate")

    C_const, power = density_prefactors(case, c_const, k)
    factor = marginal_factor(params, alpha_star, form)
    z_star = _z_star(fraction, alpha_star)
    rel = _relative_uncertainty(fraction, boundary, zero if case is TailCase.POLE else None, alpha_star)
    report = TailReport(
        case_tag=case,
        alpha_star=alpha_star,
        alpha1=branch.alpha1,
        alpha2=branch.alpha2,
        alpha_tilde=zero.alpha_tilde,
        k=k,
        z_star=z_star,
        z_tilde=params.z_tilde,
        c_const=c_const,
        C_const=C_const,
        C_tilde=factor * C_const,
        d_ztilde=boundary_tail(params, boundary, form).d_ztilde,
        power=power,
        phase_ratio=params.lam * z_star / params.cmu,
        lower_multipliers=lower_multipliers(params, alpha_star, form),
        consistency_residual=consistency_residual(params, alpha_star, z_star),
        c_error=abs(c_const) * rel,
        C_error=abs(C_const) * rel,
        C_tilde_error=abs(factor * C_const) * rel,
        form=form,
        boundary_source=boundary.source,
    )
    logger.info(
        f"Case {case.value} for {params.label()}: alpha*={alpha_star:.10g}, z*={z_star:.10g}, "
        f"C={C_const:.6g}, power={power:g}"
    )
    return report
