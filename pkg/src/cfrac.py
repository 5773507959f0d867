"""Continued-fraction coefficients A_i(α), the constants k_n and Ĥ₀, Ĥ₁.

The lower phases 0..c−1 of the Laplace-transformed level equations form a
tridiagonal system. Eliminating it from the bottom gives

    φ_i(α) = T_i(α) + A_i(α)·φ_{i+1}(α),   0 ≤ i ≤ c−2,

with A_i = (i+1)μ / (d_i(α) − λA_{i−1}(α)) and d_i(α) = (c−i)α + λ + iμ.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict

from .config import Config
from .errors import InvalidParametersError, NegativeMassError, PoleError
from .kernel import KernelFunction
from .logger import get_logger
from .model import ModelParams, mean_drift, phase_stationary

logger = get_logger()


class DriftForm(str, Enum):
    """Coefficient of α on the diagonal of the lower-phase recursion."""

    EXACT = "exact"  # (c − i)·α, the magnitude of the net input rate
    UNIT_DRIFT = "unit"  # α for every phase


class RationalFn:
    """Quotient of two real polynomials in α."""

    def __init__(self, numerator: Polynomial, denominator: Polynomial):
        if not np.any(denominator.coef):
            raise ValueError("denominator is identically zero")
        self.numerator = numerator
        self.denominator = denominator

    @property
    def degrees(self):
        return self.numerator.degree(), self.denominator.degree()

    def __call__(self, alpha):
        num = self.numerator(alpha)
        den = self.denominator(alpha)
        scale = np.sum(np.abs(self.denominator.coef)) * np.maximum(1.0, np.abs(alpha)) ** self.denominator.degree()
        if np.any(np.abs(den) <= 1e-14 * scale):
            raise PoleError("alpha is a pole of the continued fraction", {"alpha": str(alpha)})
        value = num / den
        return _demote(value)

    def deriv(self, alpha):
        num, den = self.numerator(alpha), self.denominator(alpha)
        dnum, dden = self.numerator.deriv()(alpha), self.denominator.deriv()(alpha)
        return _demote((dnum * den - num * dden) / (den * den))

    def poles(self) -> np.ndarray:
        return np.asarray(Polynomial(np.asarray(self.denominator.coef, dtype=float)).roots(), dtype=complex)

    def as_float(self) -> "RationalFn":
        return RationalFn(
            Polynomial(np.asarray(self.numerator.coef, dtype=float)),
            Polynomial(np.asarray(self.denominator.coef, dtype=float)),
        )


def _demote(value):
    """Cast extended-precision results back to double precision."""
    if np.iscomplexobj(value):
        value = np.asarray(value, dtype=complex)
    else:
        value = np.asarray(value, dtype=float)
    return value[()] if value.ndim == 0 else value


class BoundaryVector(BaseModel):
    """Boundary masses Π_i(0), i = 0..c−1, at the empty-buffer level."""

    model_config = ConfigDict(frozen=True)

    pi0: List[float]
    source: str = "user"
    # max |Π_i(0)| reported for the positive-rate phases, zero in exact arithmetic
    upper_residual: float = 0.0

    def mass(self, phase: int) -> float:
        return self.pi0[phase] if 0 <= phase < len(self.pi0) else 0.0

    def psi(self, z):
        """ψ(z) = Σ_{i ≥ c−1} Π_i(0) z^i; only the i = c−1 term survives."""
        c = len(self.pi0)
        return self.pi0[c - 1] * z ** (c - 1)

    def psi_dz(self, z):
        c = len(self.pi0)
        return (c - 1) * self.pi0[c - 1] * z ** (c - 2) if c > 1 else 0.0 * z

    def psi_error(self, z) -> float:
        """Bound on the neglected positive-rate terms of ψ at |z| < z̃."""
        if self.upper_residual == 0.0:
            return 0.0
        c = len(self.pi0)
        return float(self.upper_residual * abs(z) ** c)

    def validate_against(self, params: ModelParams) -> List[str]:
        """Raise on negative mass; return the list of softer violations."""
        tol = Config.NEGATIVE_MASS_TOL
        pi0 = np.asarray(self.pi0)
        if len(pi0) != params.c:
            raise InvalidParametersError(
                "boundary vector must hold one mass per negative-rate phase",
                {"expected": params.c, "received": len(pi0)},
            )
        if np.any(pi0 < -tol):
            raise NegativeMassError(
                "boundary mass is negative",
                {"pi0": self.pi0, "source": self.source},
            )
        issues = []
        xi = phase_stationary(params).head(params.c - 1)
        if np.any(pi0 > xi + tol):
            issues.append("boundary mass exceeds the phase probability")
        if params.c >= 2 and params.lam * pi0[0] - params.mu * pi0[1] < -tol:
            issues.append("lambda*Pi_0(0) - mu*Pi_1(0) is negative")
        residual = drift_balance_residual(self, params)
        if abs(residual) > 1e-6:
            issues.append(f"level balance residual {residual:.3e}")
        for issue in issues:
            logger.warning(f"Boundary vector ({self.source}): {issue}")
        return issues


def drift_balance_residual(boundary: BoundaryVector, params: ModelParams) -> float:
    """Σ_{i<c}(c−i)Π_i(0) + Σ_i ξ_i r_i, zero for the stationary law."""
    c = params.c
    weights = c - np.arange(c)
    return float(np.dot(weights, boundary.pi0) + mean_drift(params))


def boundary_from_drift_balance(params: ModelParams) -> BoundaryVector:
    """Closed-form boundary for c = 1: Π₀(0) = −Σ_i ξ_i r_i."""
    if params.c != 1:
        raise InvalidParametersError(
            "the level balance fixes the boundary vector only for c = 1",
            {"c": params.c},
        )
    return BoundaryVector(pi0=[-mean_drift(params)], source="closed-form")


class ContinuedFraction:
    """A_0..A_{c−2} as rational functions plus the Ĥ₀/Ĥ₁ evaluators built on them."""

    def __init__(self, params: ModelParams, form: DriftForm = DriftForm.EXACT):
        self.params = params
        self.form = DriftForm(form)
        self.kernel = KernelFunction(params)
        self.DTYPE = np.longdouble if params.c > Config.EXTENDED_PRECISION_C else float
        self.chain = self._build_chain()

    def _diagonal_slope(self, i: int) -> float:
        return float(self.params.c - i) if self.form is DriftForm.EXACT else 1.0

    def _build_chain(self) -> List[RationalFn]:
        p = self.params
        one = Polynomial(np.array([1.0], dtype=self.DTYPE))
        num_prev = Polynomial(np.array([0.0], dtype=self.DTYPE))
        den_prev = one
        chain = []
        for i in range(p.c - 1):
            diagonal = Polynomial(np.array([p.lam + i * p.mu, self._diagonal_slope(i)], dtype=self.DTYPE))
            numerator = (i + 1) * p.mu * den_prev
            denominator = diagonal * den_prev - p.lam * num_prev
            chain.append(RationalFn(numerator, denominator))
            num_prev, den_prev = numerator, denominator
        return chain

    def A_chain(self) -> List[RationalFn]:
        return list(self.chain)

    def a_recursive(self, alpha) -> list:
        """A_0..A_{c−2} evaluated by running the recursion directly."""
        p = self.params
        values, previous = [], 0.0
        for i in range(p.c - 1):
            previous = (i + 1) * p.mu / (self._diagonal_slope(i) * alpha + p.lam + i * p.mu - p.lam * previous)
            values.append(previous)
        return values

    def top_coefficient(self, alpha):
        """A_{c−2}(α), zero for c = 1."""
        return self.chain[-1](alpha) if self.chain else 0.0 * alpha

    def top_coefficient_deriv(self, alpha):
        return self.chain[-1].deriv(alpha) if self.chain else 0.0 * alpha

    def k_constants(self, boundary: BoundaryVector) -> np.ndarray:
        p = self.params
        pi0 = np.append(np.asarray(boundary.pi0, dtype=float), 0.0)
        ks = np.empty(max(p.c - 1, 0))
        for i in range(p.c - 1):
            below = p.lam * pi0[i - 1] if i > 0 else 0.0
            ks[i] = below - (p.lam + i * p.mu) * pi0[i] + (i + 1) * p.mu * pi0[i + 1]
        return ks

    def inhomogeneous_terms(self, alpha, boundary: BoundaryVector) -> list:
        """T_0..T_{c−2} with T_i = (k_i + λT_{i−1})·A_i/((i+1)μ)."""
        p = self.params
        terms, previous = [], 0.0
        for i, k_i in enumerate(self.k_constants(boundary)):
            previous = (k_i + p.lam * previous) * self.chain[i](alpha) / ((i + 1) * p.mu)
            terms.append(previous)
        return terms

    def phi_chain_coeffs(self, boundary: Optional[BoundaryVector] = None) -> "PhiChain":
        zero = BoundaryVector(pi0=[0.0] * self.params.c, source="zero")
        return PhiChain(self, boundary or zero)

    def h1_hat(self, alpha, z):
        p = self.params
        return p.lam * z ** p.c * self.top_coefficient(alpha) + self.kernel.h1(alpha, z)

    def h1_hat_dz(self, alpha, z):
        p = self.params
        slope = p.lam * self.top_coefficient(alpha) + p.mu - alpha * (p.r + 1.0)
        lower = p.c * (p.c - 1) * p.mu * z ** (p.c - 2) if p.c > 1 else 0.0
        return p.c * slope * z ** (p.c - 1) - lower

    def h1_hat_dalpha(self, alpha, z):
        p = self.params
        return (p.lam * self.top_coefficient_deriv(alpha) - (p.r + 1.0)) * z ** p.c

    def h0_hat(self, alpha, z, boundary: BoundaryVector):
        p = self.params
        value = self.kernel.h0(z) * boundary.mass(p.c - 1)
        if p.c == 1:
            return value
        carried = boundary.mass(p.c - 2) + self.inhomogeneous_terms(alpha, boundary)[-1]
        return value + p.lam * z ** p.c * carried

    def h0_hat_dz(self, alpha, z, boundary: BoundaryVector):
        p = self.params
        value = self.kernel.h0_dz(z) * boundary.mass(p.c - 1)
        if p.c == 1:
            return value
        carried = boundary.mass(p.c - 2) + self.inhomogeneous_terms(alpha, boundary)[-1]
        return value + p.lam * p.c * z ** (p.c - 1) * carried

    def numerator_N(self, alpha, z, boundary: BoundaryVector):
        """H₂(z)ψ(z) + Ĥ₀(α, z)."""
        return self.kernel.h2(z) * boundary.psi(z) + self.h0_hat(alpha, z, boundary)

    def level_transform(self, alpha, z, boundary: BoundaryVector):
        """L(α, z) = −[H₂(z)ψ(z) + Ĥ₀(α, z)] / Ĥ₁(α, z)."""
        return -self.numerator_N(alpha, z, boundary) / self.h1_hat(alpha, z)

    def level_transform_dz(self, alpha, z, boundary: BoundaryVector):
        kernel = self.kernel
        numerator = self.numerator_N(alpha, z, boundary)
        numerator_dz = (
            kernel.h2_dz(z) * boundary.psi(z)
            + kernel.h2(z) * boundary.psi_dz(z)
            + self.h0_hat_dz(alpha, z, boundary)
        )
        h1 = self.h1_hat(alpha, z)
        return -(numerator_dz * h1 - numerator * self.h1_hat_dz(alpha, z)) / (h1 * h1)

    def top_transform(self, alpha, boundary: BoundaryVector):
        """φ_{c−1}(α) = L(α, Z₀(α)) for α below the dominant singularity."""
        z0 = self.kernel.branch_Z0(alpha)
        value = self.level_transform(alpha, z0, boundary)
        return value.real if np.isrealobj(alpha) else value


class PhiChain:
    """φ_i = T_i + A_i·φ_{i+1} for 0 ≤ i ≤ c−2."""

    def __init__(self, fraction: ContinuedFraction, boundary: BoundaryVector):
        self.fraction = fraction
        self.boundary = boundary

    @property
    def coefficients(self) -> List[RationalFn]:
        return self.fraction.A_chain()

    def terms(self, alpha) -> list:
        return self.fraction.inhomogeneous_terms(alpha, self.boundary)

    def lower_transforms(self, alpha, phi_top=None) -> np.ndarray:
        """φ_0(α)..φ_{c−1}(α), running the chain downward from φ_{c−1}."""
        c = self.fraction.params.c
        if phi_top is None:
            phi_top = self.fraction.top_transform(alpha, self.boundary)
        values = [phi_top]
        terms = self.terms(alpha)
        for i in range(c - 2, -1, -1):
            values.append(terms[i] + self.coefficients[i](alpha) * values[-1])
        return np.asarray(values[::-1])

    def multiplier(self, phase: int, alpha) -> float:
        """Π_{m=phase}^{c−2} A_m(α), the factor carrying φ_{c−1}'s singularity to φ_phase."""
        product = 1.0
        for m in range(phase, self.fraction.params.c - 1):
            product = product * self.coefficients[m](alpha)
        return product
