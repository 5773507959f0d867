"""Locating the zero α̃ of Ĥ₁(α, Z₀(α)) on (0, α₁]."""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq, newton

from .cfrac import BoundaryVector, ContinuedFraction, DriftForm
from .config import Config
from .errors import AssumptionViolatedError, PoleError
from .logger import get_logger
from .model import ModelParams, require_stable
from .numerics import richardson_derivative

logger = get_logger()


class ZeroMethod(str, Enum):
    CLOSED_FORM_C1 = "closed-form-c1"
    CUBIC_C2 = "cubic-c2"
    RATIONALIZED = "rationalized-general"


class ZeroFinding(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_tilde: Optional[float] = None
    multiplicity: int = 1
    method: ZeroMethod
    # roots of the rationalized polynomial as (real, imag) pairs
    all_roots: List[Tuple[float, float]]
    alpha1: float
    residual: float = 0.0
    scale: float = 1.0
    at_branch_point: bool = False
    derivative: Optional[float] = None
    derivative_error: float = 0.0

    def roots_complex(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.all_roots])


class ZeroFinder:
    """Rationalized zero hunting for one parameter tuple."""

    def __init__(self, params: ModelParams, form: DriftForm = DriftForm.EXACT):
        self.params = params
        self.fraction = ContinuedFraction(params, form)
        self.kernel = self.fraction.kernel
        self.alpha1 = self.kernel.branch.alpha1
        self.GRID_POINTS = 201
        self.MAX_NEWTON_STEPS = 50
        self.BRACKET_WIDTHS = (1e-10, 1e-8, 1e-6, 1e-4, 1e-2)

    def rationalize_g(self) -> Polynomial:
        """2a·Ĥ₁(α, Z₀)·Ĥ₁(α, Z₁) with A_{c−2} = p/q cleared by q².

        With P = λA_{c−2} + μ − α(r+1), Vieta gives
        g = −2λ(cμ/λ)^c·[n² − n·q·b + cλμ·q²], n = λp + (μ − α(r+1))q.
        """
        p = self.params
        dtype = self.fraction.DTYPE
        if self.fraction.chain:
            top = self.fraction.chain[-1]
            num, den = top.numerator, top.denominator
        else:
            num = Polynomial(np.array([0.0], dtype=dtype))
            den = Polynomial(np.array([1.0], dtype=dtype))
        slope = Polynomial(np.array([p.mu, -(p.r + 1.0)], dtype=dtype))
        b = Polynomial(np.array([p.lam + p.cmu, -p.r], dtype=dtype))
        n = p.lam * num + slope * den
        bracket = n * n - n * den * b + p.c * p.lam * p.mu * den * den
        factor = -2.0 * p.lam * (p.cmu / p.lam) ** p.c
        return Polynomial(np.asarray((factor * bracket).coef, dtype=float))

    def cubic_c2(self) -> Polynomial:
        """Two-server g(α)/α written out, with w the α weight of the phase-0 diagonal.

        With R = r+1, F = Rλ + rμ and G = μ(λ−μ):
        w²R·α³ + (w²F + 2wλR)·α² + (w²G + 2wλF + λ²R − wλμ(r+2))·α
        + 2wλG + λ²F − λ²μ(r+2+w).
        """
        p = self.params
        if p.c != 2:
            raise ValueError(f"the cubic exists for c = 2 only, got c = {p.c}")
        lam, mu, r = p.lam, p.mu, p.r
        w = 2.0 if self.fraction.form is DriftForm.EXACT else 1.0
        R, F, G = r + 1.0, (r + 1.0) * lam + r * mu, mu * (lam - mu)
        return Polynomial(
            [
                2 * w * lam * G + lam ** 2 * F - lam ** 2 * mu * (r + 2 + w),
                w ** 2 * G + 2 * w * lam * F + lam ** 2 * R - w * lam * mu * (r + 2),
                w ** 2 * F + 2 * w * lam * R,
                w ** 2 * R,
            ]
        )

    def branch_value(self, alpha: float) -> float:
        """D(α) = Ĥ₁(α, Z₀(α)) on real α ≤ α₁."""
        z0 = self.kernel.z0_real(alpha)
        return float(np.real(self.fraction.h1_hat(alpha, z0)))

    def branch_value_dalpha(self, alpha: float) -> float:
        z0 = self.kernel.z0_real(alpha)
        dz0 = float(np.real(self.kernel.dz0_dalpha(alpha)))
        return float(np.real(self.fraction.h1_hat_dalpha(alpha, z0) + self.fraction.h1_hat_dz(alpha, z0) * dz0))

    def other_branch_value(self, alpha: float) -> float:
        z1 = float(np.real(self.kernel.branch_Z1(alpha)))
        return float(np.real(self.fraction.h1_hat(alpha, z1)))

    def scale(self) -> float:
        """max |D(α)| over the candidate interval (0, α₁]."""
        values = []
        for alpha in np.linspace(0.0, self.alpha1, self.GRID_POINTS)[1:]:
            try:
                values.append(abs(self.branch_value(alpha)))
            except PoleError:
                logger.warning(f"A_(c-2) has a pole at alpha={alpha:.6g} inside (0, alpha1]")
        return max(max(values, default=0.0), np.finfo(float).tiny)

    def _polish(self, g_reduced: Polynomial, alpha: float) -> float:
        dg = g_reduced.deriv()
        try:
            alpha = float(newton(g_reduced, alpha, fprime=dg, maxiter=self.MAX_NEWTON_STEPS, tol=1e-15, disp=False))
        except (RuntimeError, ZeroDivisionError):
            pass
        if abs(alpha - self.alpha1) <= 1e-6 * self.alpha1 or not 0.0 < alpha < self.alpha1:
            return alpha
        bracket = self._bracket(alpha)
        if bracket is None:
            # no sign change of D nearby: the residual test decides
            return alpha
        try:
            return float(brentq(self.branch_value, *bracket, xtol=1e-15 * self.alpha1, maxiter=200))
        except (RuntimeError, ValueError, PoleError):
            return alpha

    def _bracket(self, alpha: float) -> Optional[Tuple[float, float]]:
        """Sign-changing interval of D around alpha, kept inside (0, α₁]."""
        try:
            centre = self.branch_value(alpha)
            if centre == 0.0:
                return None
            for width in self.BRACKET_WIDTHS:
                lo = max(alpha - width * self.alpha1, 0.5 * alpha)
                hi = min(alpha + width * self.alpha1, self.alpha1)
                if np.sign(self.branch_value(lo)) != np.sign(centre):
                    return lo, alpha
                if np.sign(self.branch_value(hi)) != np.sign(centre):
                    return alpha, hi
        except PoleError:
            return None
        return None

    def _multiplicity(self, alpha: float, scale: float) -> Tuple[int, float, float]:
        h = min(1e-3 * alpha, 0.25 * (self.alpha1 - alpha))
        for order in range(1, Config.MAX_MULTIPLICITY + 1):
            value, error = richardson_derivative(self.branch_value, alpha, order, h)
            if abs(value) > 1e-6 * scale / self.alpha1 ** order:
                return order, value, error
        raise AssumptionViolatedError(
            f"zero of multiplicity above {Config.MAX_MULTIPLICITY}",
            {"alpha_tilde": alpha},
        )

    def rationalized(
        self, method: ZeroMethod = ZeroMethod.RATIONALIZED, reduced: Optional[Polynomial] = None
    ) -> ZeroFinding:
        if reduced is None:
            g = self.rationalize_g()
            # g(0) = 0 always; drop that root before the companion eigenvalues
            g_reduced = Polynomial(g.coef[1:]) if len(g.coef) > 1 else g
        else:
            g_reduced = reduced
        roots = np.append(g_reduced.roots(), 0.0) if g_reduced.degree() > 0 else np.array([0.0])
        logger.debug(f"{method.value}: degree {g_reduced.degree() + 1}, roots {np.round(roots, 8)}")

        scale = self.scale()
        tie = Config.BRANCH_TIE_TOL * self.alpha1
        survivors = []
        for root in roots:
            if abs(root.imag) > 1e-7 * max(1.0, abs(root)) or not 0.0 < root.real <= self.alpha1 + tie:
                continue
            alpha = self._polish(g_reduced, float(root.real))
            if abs(alpha - self.alpha1) <= tie:
                alpha = self.alpha1
            if not 0.0 < alpha <= self.alpha1:
                continue
            try:
                residual = abs(self.branch_value(alpha))
            except PoleError:
                continue
            if residual >= Config.ZERO_TOL * scale:
                logger.debug(f"Candidate {alpha:.10g} rejected: |D| = {residual:.3e}")
                continue
            if alpha < self.alpha1 and abs(self.other_branch_value(alpha)) <= Config.SPURIOUS_TOL * scale:
                logger.debug(f"Candidate {alpha:.10g} rejected: vanishes on both branches")
                continue
            if all(abs(alpha - other) > tie for other, _ in survivors):
                survivors.append((alpha, residual))

        all_roots = [(float(z.real), float(z.imag)) for z in roots]
        if len(survivors) > 1:
            raise AssumptionViolatedError(
                "more than one zero of H1_hat(alpha, Z0(alpha)) in (0, alpha1]",
                {"zeros": [a for a, _ in survivors], "alpha1": self.alpha1},
            )
        if not survivors:
            return ZeroFinding(method=method, all_roots=all_roots, alpha1=self.alpha1, scale=scale)

        alpha, residual = survivors[0]
        at_branch = alpha == self.alpha1
        if at_branch:
            k, derivative, error = 1, None, 0.0
        else:
            k, derivative, error = self._multiplicity(alpha, scale)
            if k == 1:
                derivative = self.branch_value_dalpha(alpha)
        return ZeroFinding(
            alpha_tilde=alpha,
            multiplicity=k,
            method=method,
            all_roots=all_roots,
            alpha1=self.alpha1,
            residual=residual,
            scale=scale,
            at_branch_point=at_branch,
            derivative=derivative,
            derivative_error=error,
        )

    def closed_form_c1(self) -> ZeroFinding:
        """α̃ = μ/(r+1) − λ, a zero on the Z₀ branch only when μ ≤ λ(r+1)²."""
        p = self.params
        general = self.rationalized(ZeroMethod.CLOSED_FORM_C1)
        candidate = p.mu / (p.r + 1.0) - p.lam
        on_z0_branch = p.mu <= p.lam * (p.r + 1.0) ** 2 * (1.0 + Config.BRANCH_TIE_TOL)
        if not on_z0_branch or candidate <= 0.0:
            return general.model_copy(update={"alpha_tilde": None, "derivative": None})
        at_branch = abs(candidate - self.alpha1) <= Config.BRANCH_TIE_TOL * self.alpha1
        alpha = self.alpha1 if at_branch else candidate
        derivative = None if at_branch else self.branch_value_dalpha(alpha)
        return general.model_copy(
            update={
                "alpha_tilde": alpha,
                "multiplicity": 1,
                "residual": abs(self.branch_value(alpha)),
                "at_branch_point": at_branch,
                "derivative": derivative,
                "derivative_error": 0.0,
            }
        )


def rationalize_g(params: ModelParams, form: DriftForm = DriftForm.EXACT) -> Polynomial:
    return ZeroFinder(params, form).rationalize_g()


def find_alpha_tilde(
    params: ModelParams, form: DriftForm = DriftForm.EXACT, general: bool = False
) -> ZeroFinding:
    """Zero of Ĥ₁(α, Z₀(α)) in (0, α₁], or an empty finding (Case III)."""
    require_stable(params)
    finder = ZeroFinder(params, form)
    if params.c == 1 and not general:
        finding = finder.closed_form_c1()
    elif params.c == 2 and not general:
        finding = finder.rationalized(ZeroMethod.CUBIC_C2, reduced=finder.cubic_c2())
    else:
        finding = finder.rationalized()
    if finding.alpha_tilde is None:
        logger.info(f"No zero of H1_hat on (0, alpha1] for {params.label()}")
    else:
        logger.info(
            f"Zero alpha_tilde={finding.alpha_tilde:.10g} (k={finding.multiplicity}, "
            f"alpha1={finding.alpha1:.10g}) via {finding.method.value}"
        )
    return finding


class Assumption1Report(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_tilde: float
    z0: float
    value: float
    scale: float
    degenerate: bool
    closed_form: Optional[float] = None


def check_assumption1(
    params: ModelParams,
    zero: ZeroFinding,
    boundary: BoundaryVector,
    form: DriftForm = DriftForm.EXACT,
) -> Assumption1Report:
    """Evaluate N(α̃) = H₂(Z₀)ψ(Z₀) + Ĥ₀(α̃, Z₀); report only."""
    if zero.alpha_tilde is None:
        raise AssumptionViolatedError("numerator check needs a zero alpha_tilde", {})
    fraction = ContinuedFraction(params, form)
    alpha = zero.alpha_tilde
    z0 = fraction.kernel.z0_real(alpha)
    h2_psi = float(np.real(fraction.kernel.h2(z0) * boundary.psi(z0)))
    h0_hat = float(np.real(fraction.h0_hat(alpha, z0, boundary)))
    value = h2_psi + h0_hat
    scale = max(abs(h2_psi), abs(h0_hat))
    degenerate = scale == 0.0 or abs(value) < Config.ZERO_TOL * scale

    closed_form = None
    if params.c == 1:
        closed_form = params.lam * z0 * (z0 - 1.0) * boundary.mass(0)
    elif params.c == 2:
        weight = 2.0 if fraction.form is DriftForm.EXACT else 1.0
        pi_0, pi_1 = boundary.mass(0), boundary.mass(1)
        closed_form = z0 ** 2 * (
            params.lam * (z0 - 1.0) * pi_1
            + weight * alpha * (params.lam * pi_0 - params.mu * pi_1) / (weight * alpha + params.lam)
        )
    if degenerate:
        logger.warning(f"Pole numerator vanishes at alpha_tilde={alpha:.6g}: N={value:.3e}")
    return Assumption1Report(
        alpha_tilde=alpha, z0=z0, value=value, scale=scale, degenerate=degenerate, closed_form=closed_form
    )
