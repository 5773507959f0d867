"""Finite-difference and log-linear regression helpers."""

from typing import Callable, Optional, Tuple

import numpy as np

from .errors import IllConditionedFitError

# Second-order central stencils: offsets in units of h, weights before dividing by h^order.
_STENCILS = {
    1: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    2: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([-0.5, 1.0, -1.0, 0.5])),
    4: (np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


def central_difference(f: Callable[[float], float], x: float, order: int, h: float) -> float:
    offsets, weights = _STENCILS[order]
    values = np.array([f(x + k * h) for k in offsets], dtype=float)
    return float(np.dot(weights, values) / h ** order)


def richardson_derivative(
    f: Callable[[float], float], x: float, order: int, h: float
) -> Tuple[float, float]:
    """Derivative of the given order with one Richardson step; returns (value, error estimate)."""
    if order not in _STENCILS:
        raise ValueError(f"derivative order {order} is not supported")
    coarse = central_difference(f, x, order, h)
    fine = central_difference(f, x, order, 0.5 * h)
    return (4.0 * fine - coarse) / 3.0, abs(fine - coarse) / 3.0


def _regress(x: np.ndarray, y: np.ndarray, design: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least squares with standard errors; rejects near-collinear designs."""
    column_norms = np.linalg.norm(design, axis=0)
    if np.linalg.cond(design / column_norms) > 1e10:
        raise IllConditionedFitError("regression design is ill-conditioned", {"window": [float(x[0]), float(x[-1])]})
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise IllConditionedFitError("regression design is rank deficient", {"rank": int(rank)})
    dof = max(len(y) - design.shape[1], 1)
    sigma2 = float(np.sum((y - design @ beta) ** 2) / dof)
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    return beta, np.sqrt(np.maximum(np.diag(covariance), 0.0))


def fit_log_decay(
    x: np.ndarray, values: np.ndarray, power: Optional[float] = None
) -> Tuple[float, float, float, float, float, float]:
    """Fit values ≈ A·x^p·e^{−θx}; returns (θ, p, A, se_θ, se_p, se_A).

    With ``power`` given, p is held fixed and only θ and A are fitted.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 4 or x[0] <= 0 or x[-1] <= 1.05 * x[0]:
        raise IllConditionedFitError("fit window is too narrow", {"window": [float(x[0]), float(x[-1])]})
    y = np.log(np.abs(values))
    if power is None:
        design = np.column_stack([np.ones_like(x), x, np.log(x)])
        beta, se = _regress(x, y, design)
        fitted_power, power_se = float(beta[2]), float(se[2])
    else:
        design = np.column_stack([np.ones_like(x), x])
        beta, se = _regress(x, y - power * np.log(x), design)
        fitted_power, power_se = float(power), 0.0
    prefactor = float(np.exp(beta[0]))
    return -float(beta[1]), fitted_power, prefactor, float(se[1]), power_se, prefactor * float(se[0])
