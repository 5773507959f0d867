"""Truncated-phase spectral solution of the stationary level equations.

On phases 0..N the joint distribution satisfies dΠ(x)/dx·R = Π(x)·Q with
R = diag(r_i). The truncated M/M/c chain is reversible, so D = diag(√ξ)
symmetrizes Q and the modes follow from the standard eigenproblem of
R^{-1}·D Q D^{-1}. The coefficients of the decaying modes are fixed by
Π_i(0) = 0 on the positive-rate phases.
"""

from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy import linalg

from .cfrac import BoundaryVector
from .config import Config
from .errors import (
    BoundarySystemError,
    EigenSolverError,
    InvalidParametersError,
    NegativeMassError,
)
from .logger import get_logger
from .model import ModelParams, net_input_rates, phase_stationary, require_stable
from .numerics import fit_log_decay

logger = get_logger()


class DecayFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    phase: Optional[int]
    window: Tuple[float, float]
    rate: float
    power: float
    prefactor: float
    rate_stderr: float
    power_stderr: float
    prefactor_stderr: float


class SpectralSolution:
    """Assembled truncated solution with evaluators for Π_i(x) and π_i(x)."""

    def __init__(
        self,
        params: ModelParams,
        truncation: int,
        eigenvalues: np.ndarray,
        modes: np.ndarray,
        coefficients: np.ndarray,
        xi: np.ndarray,
        condition_number: float,
        symmetric_generator: np.ndarray,
    ):
        self.params = params
        self.truncation = truncation
        self.eigenvalues = eigenvalues
        self.modes = modes
        self.coefficients = coefficients
        self.xi = xi
        self.scaling = np.sqrt(xi)
        self.condition_number = condition_number
        self.rates = net_input_rates(params, truncation + 1)
        self._symmetric_generator = symmetric_generator
        # d_i·a_j·w_ij: amplitude of mode j in phase i
        self._amplitudes = self.scaling[:, None] * modes * coefficients[None, :]

    @property
    def n_phases(self) -> int:
        return self.truncation + 1

    @property
    def dominant_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def _exponentials(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(np.outer(x, self.eigenvalues))

    def cdf(self, x) -> np.ndarray:
        """Π_i(x), shape (len(x), N+1)."""
        return self.xi[None, :] + self._exponentials(x) @ self._amplitudes.T

    def density(self, x) -> np.ndarray:
        """π_i(x), shape (len(x), N+1)."""
        return self._exponentials(x) @ (self._amplitudes * self.eigenvalues[None, :]).T

    def boundary_masses(self) -> np.ndarray:
        return self.cdf(0.0)[0]

    def marginal_distribution(self, x) -> np.ndarray:
        return self.cdf(x).sum(axis=1)

    def marginal_density(self, x) -> np.ndarray:
        return self.density(x).sum(axis=1)

    def laplace(self, alpha: float) -> np.ndarray:
        """φ_i(α) = ∫ e^{αx} π_i(x) dx for α below −s₁."""
        if alpha >= -self.dominant_eigenvalue:
            raise InvalidParametersError(
                "Laplace transform diverges at or beyond the dominant eigenvalue",
                {"alpha": alpha, "s1": self.dominant_eigenvalue},
            )
        weights = self.eigenvalues / -(self.eigenvalues + alpha)
        return self._amplitudes @ weights

    def dominant_mode(self, phase: int) -> Tuple[float, float]:
        """(s₁, w) with π_phase(x) ≈ w·e^{s₁x} for large x."""
        s1 = self.dominant_eigenvalue
        return s1, float(self._amplitudes[phase, 0] * s1)

    def eigen_residuals(self) -> np.ndarray:
        lhs = self._symmetric_generator @ self.modes
        rhs = self.rates[:, None] * self.modes * self.eigenvalues[None, :]
        scale = np.abs(self._symmetric_generator).max() * np.linalg.norm(self.modes, axis=0)
        return np.linalg.norm(lhs - rhs, axis=0) / scale

    def ode_residual(self, x, margin: int = 10) -> np.ndarray:
        """max_i |π_i(x) r_i − (Π(x)Q)_i| over phases i ≤ N − margin, per grid point."""
        p = self.params
        cdf, density = self.cdf(x), self.density(x)
        phases = np.arange(self.n_phases)
        birth = np.where(phases < self.truncation, p.lam, 0.0)
        death = p.mu * np.minimum(phases, p.c)
        flow = -(birth + death)[None, :] * cdf
        flow[:, 1:] += p.lam * cdf[:, :-1]
        flow[:, :-1] += death[None, 1:] * cdf[:, 1:]
        residual = np.abs(density * self.rates[None, :] - flow)
        return residual[:, : self.n_phases - margin].max(axis=1)

    def normalization_error(self, x) -> np.ndarray:
        return np.abs(self.marginal_distribution(x) - 1.0)

    def curves(self, x, phases: Optional[Iterable[int]] = None) -> pd.DataFrame:
        """Long-format table with columns x, phase, Pi, pi."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phases = list(range(self.params.c + 1) if phases is None else phases)
        cdf, density = self.cdf(x), self.density(x)
        frames = [
            pd.DataFrame({"x": x, "phase": phase, "Pi": cdf[:, phase], "pi": density[:, phase]})
            for phase in phases
        ]
        return pd.concat(frames, ignore_index=True)

    def summary(self) -> dict:
        boundary = self.boundary_masses()
        return {
            "truncation": self.truncation,
            "dominant_eigenvalue": self.dominant_eigenvalue,
            "retained_modes": int(len(self.eigenvalues)),
            "boundary": boundary[: self.params.c].tolist(),
            "upper_boundary_residual": float(np.abs(boundary[self.params.c :]).max()),
            "condition_number": self.condition_number,
            "max_eigen_residual": float(self.eigen_residuals().max()),
        }


def solve_truncated(params: ModelParams, truncation: int = Config.DEFAULT_TRUNCATION) -> SpectralSolution:
    require_stable(params)
    c, N = params.c, truncation
    if N < c + Config.MIN_TRUNCATION_MARGIN:
        raise InvalidParametersError(
            "truncation must leave at least 10 positive-rate phases",
            {"truncation": N, "c": c},
        )

    phases = np.arange(N + 1)
    rates = net_input_rates(params, N + 1)
    birth = np.where(phases < N, params.lam, 0.0)
    death = params.mu * np.minimum(phases, c).astype(float)
    off_diagonal = np.sqrt(params.lam * death[1:])
    generator = np.diag(-(birth + death)) + np.diag(off_diagonal, 1) + np.diag(off_diagonal, -1)

    try:
        eigenvalues, vectors = linalg.eig(generator / rates[:, None])
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigen-decomposition failed: {exc}", {"truncation": N}) from exc

    imaginary = np.abs(eigenvalues.imag).max()
    if imaginary > 1e-8 * np.abs(eigenvalues).max():
        logger.warning(f"Eigenvalues carry imaginary parts up to {imaginary:.3e}; using real parts")
    eigenvalues, vectors = eigenvalues.real, vectors.real

    tol = 1e-10 * np.abs(eigenvalues).max()
    negative = np.flatnonzero(eigenvalues < -tol)
    if len(negative) != N - c + 1:
        raise EigenSolverError(
            "number of decaying modes differs from the number of positive-rate phases",
            {"found": int(len(negative)), "expected": N - c + 1},
        )
    order = negative[np.argsort(eigenvalues[negative])[::-1]]
    eigenvalues, modes = eigenvalues[order], vectors[:, order]

    truncated = phase_stationary(params).head(N)
    xi = truncated / truncated.sum()
    scaling = np.sqrt(xi)

    upper = modes[c:, :]
    try:
        coefficients = linalg.solve(upper, -scaling[c:])
    except (linalg.LinAlgError, ValueError) as exc:
        raise BoundarySystemError(
            f"boundary system is singular: {exc}", {"condition_number": float(np.linalg.cond(upper))}
        ) from exc
    condition = float(np.linalg.cond(upper))
    if condition > 1e12:
        logger.warning(f"Boundary system is ill-conditioned (cond={condition:.3e})")

    solution = SpectralSolution(params, N, eigenvalues, modes, coefficients, xi, condition, generator)
    logger.info(
        f"Spectral solve N={N} for {params.label()}: s1={solution.dominant_eigenvalue:.10g}, cond={condition:.3e}"
    )
    return solution


def boundary_vector(solution: SpectralSolution) -> BoundaryVector:
    params = solution.params
    masses = solution.boundary_masses()
    lower, upper = masses[: params.c], masses[params.c :]
    if np.any(lower < -Config.NEGATIVE_MASS_TOL):
        raise NegativeMassError("spectral boundary mass is negative", {"pi0": lower.tolist()})
    boundary = BoundaryVector(
        pi0=np.maximum(lower, 0.0).tolist(),
        source="spectral",
        upper_residual=float(np.abs(upper).max()),
    )
    boundary.validate_against(params)
    return boundary


def convergence(params: ModelParams, truncation: int) -> Tuple[float, float]:
    """Dominant eigenvalue at N and 2N."""
    return (
        solve_truncated(params, truncation).dominant_eigenvalue,
        solve_truncated(params, 2 * truncation).dominant_eigenvalue,
    )


def fit_decay(
    solution: SpectralSolution,
    phase: Optional[int],
    window: Sequence[float],
    power: Optional[float] = None,
    points: int = 60,
) -> DecayFit:
    """Regress log|π_i(x)| on x (and log x) over the window; phase None fits the marginal."""
    x_lo, x_hi = float(window[0]), float(window[1])
    x = np.linspace(x_lo, x_hi, points)
    if phase is None:
        values = solution.marginal_density(x)
        leading = np.abs(solution._amplitudes.sum(axis=0) * solution.eigenvalues)
    else:
        values = solution.density(x)[:, phase]
        leading = np.abs(solution._amplitudes[phase] * solution.eigenvalues)
    contributions = leading * np.exp(solution.eigenvalues * x_lo)
    if contributions[0] > 0 and contributions[1:].sum() > 1e-3 * contributions[0]:
        logger.warning(f"Subdominant modes exceed 1e-3 of the dominant one at x={x_lo:g}")
    rate, fitted_power, prefactor, rate_se, power_se, prefactor_se = fit_log_decay(x, values, power)
    return DecayFit(
        phase=phase,
        window=(x_lo, x_hi),
        rate=rate,
        power=fitted_power,
        prefactor=prefactor,
        rate_stderr=rate_se,
        power_stderr=power_se,
        prefactor_stderr=prefactor_se,
    )
