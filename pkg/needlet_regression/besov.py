from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .estimator import Estimate
from .frame import CoefficientSet, circle_cubature, floor_power, sphere_cubature

SUP_GRID = 2**14
MIN_RISK_GRID = 256


class TestFunction(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    q: float
    B: float = 2.0
    d: int = 1

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise ValueError(f"smoothness s must be positive, got {self.s}")
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be at least 1 (math.inf allowed)")
        if not self.B > 1:
            raise ValueError("B must exceed 1")


def test_function(fid: TestFunction | str, x: np.ndarray | float) -> np.ndarray | float:
    fid = TestFunction(fid)
    arr = np.asarray(x, dtype=float)
    if fid is TestFunction.F1:
        values = np.full_like(arr, 1.0 / (4.0 * math.pi))
    elif fid is TestFunction.F2:
        values = np.cos(4.0 * arr)
    else:
        values = (np.exp(-((arr - 1.5 * math.pi) ** 2)) + 2.0 * np.exp(-((arr - 2.0) ** 2))) * np.sin(-2.0 * arr)
    return values if np.ndim(x) else float(values)


def truth_function(fid: TestFunction | str) -> Callable[[np.ndarray], np.ndarray]:
    fid = TestFunction(fid)
    return lambda x: test_function(fid, x)


def sup_norm(fid: TestFunction | str, grid_size: int = SUP_GRID) -> float:
    grid = 2.0 * math.pi * np.arange(grid_size) / grid_size
    return float(np.max(np.abs(test_function(fid, grid))))


def _lp(values: np.ndarray, p: float) -> float:
    if values.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(values))
    return float(np.sum(values**p) ** (1.0 / p))


def besov_sequence_norm(coeffs: CoefficientSet, params: BesovParams) -> float:
    inv_p = 0.0 if math.isinf(params.p) else 1.0 / params.p
    per_level = np.array(
        [
            params.B ** (j * (params.s + params.d * (0.5 - inv_p))) * _lp(np.abs(coeffs.level(j)), params.p)
            for j in range(coeffs.J + 1)
        ]
    )
    return _lp(per_level, params.q)


def theta_true(coeffs: CoefficientSet, j: int, p: float) -> float:
    level = np.abs(coeffs.level(j))
    if math.isinf(p):
        return float(level.sum())
    return float(np.sum(level**p))


def risk_grid(d: int, grid_size: int, band_limit: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Uniform circle grid or Gauss-Legendre x longitude product grid on S^2.

    The grid integrates squared differences exactly for frequencies up to band_limit.
    """
    if grid_size < MIN_RISK_GRID:
        raise ValueError(f"grid_size must be at least {MIN_RISK_GRID}")
    if d == 1:
        return circle_cubature(max(grid_size, 2 * band_limit + 1))
    degree = max(int(math.sqrt(2.0 * grid_size)), 2 * band_limit)
    return sphere_cubature(degree)


def lp_risk(
    estimate: Estimate,
    truth: Callable[[np.ndarray], np.ndarray],
    p: float = 2,
    grid_size: int = 4096,
) -> float:
    """||f_hat - f||_p^p by quadrature, or the grid sup for p = inf."""
    frame = estimate.frame
    points, weights = risk_grid(frame.d, grid_size, floor_power(frame.B, estimate.raw.J + 1))
    if frame.d == 1:
        fitted = estimate.evaluate_circle_grid(points.size)
    else:
        fitted = estimate.evaluate(points)
    diff = np.abs(fitted - np.asarray(truth(points), dtype=float))
    if math.isinf(p):
        return float(diff.max())
    return float(weights @ diff**p)


def coefficient_risk(estimate: Estimate, exact: CoefficientSet) -> float:
    kept = estimate.coefficients
    total = (kept.mean_term - exact.mean_term) ** 2
    for j in range(kept.J + 1):
        total += float(np.sum((kept.level(j) - exact.level(j)) ** 2))
    return total


def coefficient_moment(samples: np.ndarray, truth: np.ndarray | float, p: float) -> np.ndarray:
    return np.mean(np.abs(np.asarray(samples, dtype=float) - truth) ** p, axis=0)


def embedding_gaps(values: np.ndarray, p: float, r: float) -> tuple[float, float]:
    """Slack in K^(1/p - 1/r) ||b||_r >= ||b||_p >= ||b||_r for p < r.

    Both gaps are non-negative up to rounding for every vector b of length K.
    """
    if not 1 <= p < r:
        raise ValueError("need 1 <= p < r")
    arr = np.abs(np.asarray(values, dtype=float))
    norm_p = _lp(arr, p)
    norm_r = _lp(arr, r)
    upper = arr.size ** (1.0 / p - (0.0 if math.isinf(r) else 1.0 / r)) * norm_r - norm_p
    return float(upper), float(norm_p - norm_r)
