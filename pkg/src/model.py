"""Model parameters, the M/M/c background chain and the stability checks."""

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import solve_banded
from scipy.special import gammaln, logsumexp

from .errors import CertificateNotFoundError, UnstableModelError
from .logger import get_logger

logger = get_logger()


class ModelParams(BaseModel):
    """Fluid queue driven by an M/M/c queue-length process."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    c: int = Field(ge=1, description="number of servers")
    lam: float = Field(gt=0, alias="lambda", description="arrival rate")
    mu: float = Field(gt=0, description="per-server service rate")
    r: float = Field(gt=0, description="fluid rate while all servers are busy")

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def cmu(self) -> float:
        return self.c * self.mu

    @property
    def tail_ratio(self) -> float:
        """Geometric ratio λ/(cμ) of the phase law above c."""
        return self.lam / self.cmu

    @property
    def z_tilde(self) -> float:
        return self.cmu / self.lam

    def is_ergodic(self) -> bool:
        return self.lam < self.cmu

    def label(self) -> str:
        return f"c={self.c}, lambda={self.lam:g}, mu={self.mu:g}, r={self.r:g}"


def net_input_rates(params: ModelParams, n_phases: int) -> np.ndarray:
    """Net input rates r_0..r_{n_phases-1}."""
    phases = np.arange(n_phases, dtype=float)
    return np.where(phases < params.c, phases - params.c, params.r)


@dataclass(frozen=True)
class PhaseDistribution:
    """Stationary law of the M/M/c chain, stored as its head plus a geometric tail."""

    log_head: np.ndarray  # log ξ_0 .. log ξ_c
    tail_ratio: float
    rho: float
    c: int

    def xi(self, phases) -> np.ndarray:
        phases = np.asarray(phases, dtype=int)
        capped = np.minimum(phases, self.c)
        log_values = self.log_head[capped] + np.maximum(phases - self.c, 0) * math.log(self.tail_ratio)
        return np.exp(log_values)

    def head(self, last_phase: int) -> np.ndarray:
        return self.xi(np.arange(last_phase + 1))

    def tail_mass(self, from_phase: int) -> float:
        """P(Z >= from_phase) for from_phase >= c, summed in closed form."""
        if from_phase < self.c:
            return float(self.head(self.c - 1)[from_phase:].sum() + self.tail_mass(self.c))
        return float(self.xi(from_phase) / (1.0 - self.tail_ratio))

    def total_mass(self) -> float:
        return float(self.head(self.c - 1).sum() + self.tail_mass(self.c))


def require_ergodic(params: ModelParams) -> None:
    if not params.is_ergodic():
        logger.error(f"Background chain is not ergodic for {params.label()}")
        raise UnstableModelError(
            "background M/M/c chain is not ergodic (lambda >= c*mu)",
            {"lambda": params.lam, "c_mu": params.cmu},
        )


def phase_stationary(params: ModelParams) -> PhaseDistribution:
    require_ergodic(params)
    c = params.c
    phases = np.arange(c + 1, dtype=float)
    log_weights = phases * math.log(params.rho) - gammaln(phases + 1.0)
    q = params.tail_ratio
    log_norm = logsumexp(np.append(log_weights[:c], log_weights[c] - math.log1p(-q)))
    return PhaseDistribution(
        log_head=log_weights - log_norm, tail_ratio=q, rho=params.rho, c=c
    )


def mean_drift(params: ModelParams) -> float:
    """Σ_i ξ_i r_i with the geometric tail summed exactly."""
    xi = phase_stationary(params)
    head = xi.head(params.c - 1)
    lower = float(np.dot(head, np.arange(params.c) - params.c))
    return lower + params.r * xi.tail_mass(params.c)


class StabilityVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    stable: bool
    lhs: float
    rhs: float
    mean_drift: float


def is_stable(params: ModelParams) -> StabilityVerdict:
    """Stability inequality (r+1)λ < cμ + (cμ−λ)·S together with the mean drift.

    Equality is classified unstable.
    """
    require_ergodic(params)
    c, lam, mu = params.c, params.lam, params.mu
    lhs = (params.r + 1.0) * lam
    if c == 1:
        weighted_sum = 0.0
    else:
        i = np.arange(c - 1, dtype=float)
        log_terms = (
            np.log(c - i)
            + (c - 1 - i) * math.log(mu / lam)
            + gammaln(c)
            - gammaln(i + 1.0)
        )
        with np.errstate(over="ignore"):
            weighted_sum = float(np.exp(logsumexp(log_terms)))
    rhs = params.cmu + (params.cmu - lam) * weighted_sum
    drift = mean_drift(params)
    return StabilityVerdict(stable=bool(lhs < rhs), lhs=lhs, rhs=rhs, mean_drift=drift)


def require_stable(params: ModelParams) -> StabilityVerdict:
    verdict = is_stable(params)
    if not verdict.stable:
        logger.error(f"Fluid queue is unstable for {params.label()}: {verdict.lhs:g} >= {verdict.rhs:g}")
        raise UnstableModelError(
            "stability condition violated: mean drift is not negative",
            verdict.model_dump(),
        )
    return verdict


class DriftCertificate(BaseModel):
    """Foster-Lyapunov certificate for V(x, i) = e^{αx} v_i.

    v_i = z^i for i >= c, the lower phases carry the weights in ``weights``.
    """

    model_config = ConfigDict(frozen=True)

    alpha: float
    z: float
    s: float
    weights: List[float]


def _lower_schur(alpha, s, params: ModelParams):
    """Last pivot of the lower-phase tridiagonal system, i.e. 1/[M^{-1}]_{c-1,c-1}."""
    lam, mu, c = params.lam, params.mu, params.c
    pivot = lam + c * alpha - s
    for i in range(1, c):
        pivot = lam + i * mu + (c - i) * alpha - s - i * mu * lam / pivot
    return pivot


def _top_margin(alpha, z, s, params: ModelParams):
    lam, cmu, r = params.lam, params.cmu, params.r
    return lam + cmu - r * alpha - s - lam * z - cmu * lam / _lower_schur(alpha, s, params)


def _lower_weights(alpha: float, z: float, s: float, params: ModelParams) -> np.ndarray:
    lam, mu, c = params.lam, params.mu, params.c
    i = np.arange(c, dtype=float)
    banded = np.zeros((3, c))
    banded[0, 1:] = -lam
    banded[1, :] = lam + i * mu + (c - i) * alpha - s
    banded[2, :-1] = -(i[1:] * mu)
    rhs = np.zeros(c)
    rhs[-1] = lam * z ** c
    return solve_banded((1, 1), banded, rhs)


def drift_margins(alpha: float, z: float, weights: np.ndarray, params: ModelParams) -> np.ndarray:
    """−(𝒜V)/V on the lower phases, phase c and the phases above c (one entry)."""
    lam, mu, c, r = params.lam, params.mu, params.c, params.r
    v = np.append(np.asarray(weights, dtype=float), z ** c)
    margins = np.empty(c + 2)
    for i in range(c):
        down = i * mu * v[i - 1] if i > 0 else 0.0
        generator = (i - c) * alpha * v[i] + lam * v[i + 1] + down - (lam + i * mu) * v[i]
        margins[i] = -generator / v[i]
    top = r * alpha * z ** c + lam * z ** (c + 1) + c * mu * v[c - 1] - (lam + c * mu) * z ** c
    margins[c] = -top / z ** c
    margins[c + 1] = lam + c * mu - r * alpha - lam * z - c * mu / z
    return margins


def drift_certificate(
    params: ModelParams,
    alpha_points: int = 60,
    z_points: int = 60,
    bisection_steps: int = 48,
) -> DriftCertificate:
    """Search (α, z) maximizing the certified drift margin s.

    Above phase c the condition is z ∈ (Z₀(α), Z₁(α)), which needs α < α₁.
    For fixed (α, z, s) the smallest admissible lower weights solve an
    M-matrix system, so feasibility reduces to one scalar inequality at phase c.
    """
    require_stable(params)
    lam, cmu, r = params.lam, params.cmu, params.r
    alpha1 = (math.sqrt(cmu) - math.sqrt(lam)) ** 2 / r

    # near the stability boundary the feasible set is a thin cone at small α
    alpha = alpha1 * np.geomspace(1e-8, 0.999, alpha_points)
    b = lam + cmu - r * alpha
    root = np.sqrt(np.maximum(b * b - 4.0 * lam * cmu, 0.0))
    z_lo, z_hi = (b - root) / (2.0 * lam), (b + root) / (2.0 * lam)
    # at s = 0 the phase-c margin is linear in z and vanishes at z_cap
    z_cap = (lam + cmu - r * alpha - cmu * lam / _lower_schur(alpha, 0.0, params)) / lam
    z_top = np.minimum(z_hi, z_cap)
    open_band = z_top > z_lo
    z_top = np.maximum(z_top, z_lo)
    fractions = np.linspace(0.02, 0.98, z_points)
    Z = z_lo[:, None] + fractions[None, :] * (z_top - z_lo)[:, None]
    A = np.broadcast_to(alpha[:, None], Z.shape)

    upper = lam + cmu - r * A - lam * Z - cmu / Z
    cap = np.maximum(np.minimum(upper, A) * (1.0 - 1e-9), 0.0)
    s_lo = np.zeros_like(cap)
    s_hi = cap.copy()
    inside = open_band[:, None] & (Z > 1.0)
    feasible = inside & (_top_margin(A, Z, s_lo, params) > 0.0) & (s_hi > 0.0)
    if not feasible.any():
        raise CertificateNotFoundError(
            "no (alpha, z) pair admits a positive drift margin",
            {"alpha1": alpha1, "params": params.model_dump()},
        )

    at_cap = _top_margin(A, Z, cap, params) >= 0.0
    for _ in range(bisection_steps):
        mid = 0.5 * (s_lo + s_hi)
        ok = _top_margin(A, Z, mid, params) >= 0.0
        s_lo = np.where(ok, mid, s_lo)
        s_hi = np.where(ok, s_hi, mid)
    s_best = np.where(feasible, np.where(at_cap, cap, s_lo), 0.0)

    idx = np.unravel_index(int(np.argmax(s_best)), s_best.shape)
    alpha_star, z_star = float(A[idx]), float(Z[idx])
    target = 0.5 * float(s_best[idx])
    weights = _lower_weights(alpha_star, z_star, target, params)
    margins = drift_margins(alpha_star, z_star, weights, params)
    s = float(margins.min())
    if not (s > 0.0 and z_star > 1.0 and np.all(weights > 0.0)):
        raise CertificateNotFoundError(
            "drift margin is not positive at the selected point",
            {"alpha": alpha_star, "z": z_star, "s": s},
        )
    logger.debug(f"Drift certificate alpha={alpha_star:.6g}, z={z_star:.6g}, s={s:.3g}")
    return DriftCertificate(alpha=alpha_star, z=z_star, s=s, weights=weights.tolist())
