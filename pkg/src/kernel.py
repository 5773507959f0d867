"""Kernel H(α, z) of the fundamental equation and its algebraic branches."""

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict

from .config import Config
from .errors import CutViolationError, PoleError
from .model import ModelParams


class BranchPoints(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha1: float
    alpha2: float


@dataclass(frozen=True)
class KernelCoeffs:
    """H(α, z) = a·z² + b(α)·z + d."""

    a: float
    d: float
    b0: float
    b1: float

    def b(self, alpha):
        return self.b0 + self.b1 * alpha


def branch_points(params: ModelParams) -> BranchPoints:
    root_cmu, root_lam = math.sqrt(params.cmu), math.sqrt(params.lam)
    return BranchPoints(
        alpha1=(root_cmu - root_lam) ** 2 / params.r,
        alpha2=(root_cmu + root_lam) ** 2 / params.r,
    )


def _as_output(values: np.ndarray, scalar: bool):
    return complex(values) if scalar else values


class KernelFunction:
    """Evaluators for H, its discriminant, Z₀/Z₁, α(z) and H₀, H₁, H₂."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.coeffs = KernelCoeffs(
            a=-params.lam, d=-params.cmu, b0=params.lam + params.cmu, b1=-params.r
        )
        self.branch = branch_points(params)
        # Re(α) threshold of the half-plane branch rule
        self.SWAP_ABSCISSA = (params.lam + params.cmu) / params.r
        self.DELTA_SCALE = max(1.0, 4.0 * params.lam * params.cmu)

    def kernel_H(self, alpha, z):
        k = self.coeffs
        return k.a * z * z + k.b(alpha) * z + k.d

    def discriminant(self, alpha):
        k = self.coeffs
        b = k.b(alpha)
        return b * b - 4.0 * k.a * k.d

    def _check_cut(self, alpha: np.ndarray) -> np.ndarray:
        """Reject real α strictly inside (α₁, α₂); return the endpoint mask."""
        a1, a2 = self.branch.alpha1, self.branch.alpha2
        tol = Config.CUT_TOL
        real_axis = np.abs(alpha.imag) <= tol * np.maximum(1.0, np.abs(alpha))
        inside = real_axis & (alpha.real > a1 * (1 + tol)) & (alpha.real < a2 * (1 - tol))
        if np.any(inside):
            bad = alpha[inside].ravel()[0]
            raise CutViolationError(
                "alpha lies on the branch cut [alpha1, alpha2]",
                {"alpha": [bad.real, bad.imag], "alpha1": a1, "alpha2": a2},
            )
        near_a1 = real_axis & (np.abs(alpha.real - a1) <= tol * a1)
        near_a2 = real_axis & (np.abs(alpha.real - a2) <= tol * a2)
        return near_a1 | near_a2

    def branches(self, alpha):
        """Return (Z₀(α), Z₁(α)) with |Z₀| ≤ |Z₁|."""
        scalar = np.ndim(alpha) == 0
        alpha = np.asarray(alpha, dtype=complex)
        endpoint = self._check_cut(alpha)
        k = self.coeffs
        b = k.b(alpha)
        delta = b * b - 4.0 * k.a * k.d
        root = np.sqrt(delta)
        z_plus = (-b + root) / (2.0 * k.a)
        z_minus = (-b - root) / (2.0 * k.a)

        plus_side = alpha.real <= self.SWAP_ABSCISSA
        z0 = np.where(plus_side, z_plus, z_minus)
        z1 = np.where(plus_side, z_minus, z_plus)
        swap = np.abs(z0) > np.abs(z1)
        z0, z1 = np.where(swap, z1, z0), np.where(swap, z0, z1)

        double = endpoint | (np.abs(delta) < Config.DOUBLE_ROOT_TOL * self.DELTA_SCALE)
        if np.any(double):
            merged = -b / (2.0 * k.a)
            z0 = np.where(double, merged, z0)
            z1 = np.where(double, merged, z1)
        return _as_output(z0, scalar), _as_output(z1, scalar)

    def branch_Z0(self, alpha):
        return self.branches(alpha)[0]

    def branch_Z1(self, alpha):
        return self.branches(alpha)[1]

    def z0_real(self, alpha):
        """Z₀ on real α ≤ α₁ as a float (array)."""
        z0 = np.real(self.branch_Z0(alpha))
        return float(z0) if np.ndim(z0) == 0 else z0

    def dz0_dalpha(self, alpha):
        """Z₀′(α) = r·Z₀²/(cμ − λZ₀²); infinite at α₁."""
        p = self.params
        z0 = self.branch_Z0(alpha)
        return p.r * z0 * z0 / (p.cmu - p.lam * z0 * z0)

    def alpha_of_z(self, z):
        p = self.params
        z_arr = np.asarray(z, dtype=complex)
        if np.any(z_arr == 0):
            raise PoleError("alpha(z) has a pole at z = 0", {"z": 0.0})
        value = (-p.lam * z_arr * z_arr + (p.lam + p.cmu) * z_arr - p.cmu) / (z_arr * p.r)
        return _as_output(value, np.ndim(z) == 0)

    def h0(self, z):
        p = self.params
        return p.mu * z ** p.c - p.cmu * z ** (p.c - 1)

    def h1(self, alpha, z):
        p = self.params
        return (p.mu - alpha * p.r - alpha) * z ** p.c - p.cmu * z ** (p.c - 1)

    def h2(self, z):
        p = self.params
        return p.lam * z * z - (p.lam + p.cmu) * z + p.cmu

    def h0_dz(self, z):
        p = self.params
        lower = p.cmu * (p.c - 1) * z ** (p.c - 2) if p.c > 1 else 0.0
        return p.cmu * z ** (p.c - 1) - lower

    def h2_dz(self, z):
        p = self.params
        return 2.0 * p.lam * z - (p.lam + p.cmu)
