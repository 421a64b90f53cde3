from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

PARTITION_TOLERANCE = 1e-6
NORMALIZER_TOLERANCE = 1e-10
SELF_CHECK_ELL_MAX = 256
DEFAULT_TABLE_SAMPLES = 2**17
PRIMITIVE_CHUNK = 4096


class WindowError(Exception):
    pass


class WindowVariant(str, Enum):
    SMOOTH_BUMP = "smooth_bump"
    BSPLINE = "bspline"


def bump(t: np.ndarray | float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe**2)), 0.0)


@dataclass(frozen=True, eq=False)
class WindowFunction:
    """The needlet weight b on (0, inf), supported on (1/B, B).

    rho is None for the infinitely smooth bump construction.
    """

    B: float
    variant: WindowVariant
    rho: int | None
    normalizer: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    table: np.ndarray | None = field(default=None, repr=False)

    @property
    def support(self) -> tuple[float, float]:
        return (1.0 / self.B, self.B)

    def primitive(self, u: np.ndarray | float) -> np.ndarray:
        """psi(u): rises from 0 at u=-1 to 1 at u=1, with psi(-u) = 1 - psi(u)."""
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        if self.variant is WindowVariant.BSPLINE:
            return _bernstein_step(u, self.rho or 1)
        flat = u.reshape(-1)
        out = np.empty_like(flat)
        for start in range(0, flat.size, PRIMITIVE_CHUNK):
            half = (flat[start : start + PRIMITIVE_CHUNK] + 1.0) / 2.0
            t = half[:, None] * (self.nodes + 1.0) - 1.0
            out[start : start + PRIMITIVE_CHUNK] = (bump(t) @ self.weights) * half / self.normalizer
        return out.reshape(u.shape)

    def squared(self, u: np.ndarray | float) -> np.ndarray:
        """b^2(u) = phi(u/B) - phi(u), evaluated piecewise without cancellation."""
        shape = np.shape(u)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        B = self.B
        out = np.zeros_like(u)
        lower = (u > 1.0 / B) & (u <= 1.0)
        upper = (u > 1.0) & (u < B)
        if np.any(lower):
            out[lower] = self.primitive(-_phi_argument(u[lower], B))
        if np.any(upper):
            out[upper] = self.primitive(_phi_argument(u[upper] / B, B))
        return np.maximum(out, 0.0).reshape(shape)

    def tabulated(self, samples: int = DEFAULT_TABLE_SAMPLES) -> "WindowFunction":
        if samples < 2:
            raise WindowError("tabulation needs at least 2 samples")
        grid = np.linspace(1.0 / self.B, self.B, samples)
        return replace(self, table=np.sqrt(self.squared(grid)))

    def to_dict(self) -> dict[str, object]:
        return {
            "B": self.B,
            "variant": self.variant.value,
            "rho": self.rho,
            "normalizer": self.normalizer,
            "quadrature_nodes": int(self.nodes.size),
        }


def _phi_argument(t: np.ndarray, B: float) -> np.ndarray:
    return 1.0 - (2.0 * B / (B - 1.0)) * (t - 1.0 / B)


def _bernstein_step(u: np.ndarray, rho: int) -> np.ndarray:
    degree = 2 * rho + 1
    s = (u + 1.0) / 2.0
    total = np.zeros_like(s)
    for k in range(rho + 1, degree + 1):
        total += math.comb(degree, k) * s**k * (1.0 - s) ** (degree - k)
    return total


def build_window(
    B: float,
    variant: WindowVariant | str = WindowVariant.SMOOTH_BUMP,
    quadrature_nodes: int = 128,
    rho: int | None = None,
) -> WindowFunction:
    if not B > 1.0:
        raise WindowError(f"scale B must be greater than 1, got {B}")
    if quadrature_nodes < 64:
        raise WindowError("quadrature_nodes must be at least 64")
    try:
        variant = WindowVariant(variant)
    except ValueError as exc:
        raise WindowError(f"unknown window variant: {variant}") from exc

    if variant is WindowVariant.BSPLINE:
        rho = 1 if rho is None else rho
        if rho < 1:
            raise WindowError("rho must be a positive integer")
    else:
        rho = None

    normalizer, _ = quad(lambda t: float(bump(t)), -1.0, 1.0, epsabs=NORMALIZER_TOLERANCE, limit=200)
    nodes, weights = roots_legendre(quadrature_nodes)
    window = WindowFunction(
        B=float(B),
        variant=variant,
        rho=rho,
        normalizer=float(normalizer),
        nodes=np.asarray(nodes),
        weights=np.asarray(weights),
    )
    error = check_partition_of_unity(window, SELF_CHECK_ELL_MAX)
    if error > PARTITION_TOLERANCE:
        raise WindowError(f"partition of unity check failed: max error {error:.3e}")
    return window


def window_eval(w: WindowFunction, u: np.ndarray | float) -> np.ndarray | float:
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("window argument must be positive")
    if w.table is not None:
        lo, hi = w.support
        values = np.interp(arr, np.linspace(lo, hi, w.table.size), w.table, left=0.0, right=0.0)
    else:
        values = np.sqrt(w.squared(arr))
    return values if np.ndim(u) else float(values)


def max_level(B: float, ell_max: int) -> int:
    return int(math.ceil(math.log(max(ell_max, 1), B))) + 1


def check_partition_of_unity(w: WindowFunction, ell_max: int) -> float:
    if ell_max < 1:
        raise WindowError("ell_max must be at least 1")
    ells = np.arange(1, ell_max + 1, dtype=float)
    levels = np.arange(max_level(w.B, ell_max) + 1, dtype=float)
    u = ells[:, None] / w.B ** levels[None, :]
    totals = np.sum(np.asarray(window_eval(w, u)) ** 2, axis=1)
    return float(np.max(np.abs(totals - 1.0)))
