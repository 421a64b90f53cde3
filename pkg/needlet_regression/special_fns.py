from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

COS_SLACK = 1e-12


@dataclass(frozen=True)
class KernelSpec:

    d: int
    eta: float
    omega_d: float

    @classmethod
    def for_dimension(cls, d: int) -> "KernelSpec":
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        omega = 2.0 * math.pi ** ((d + 1) / 2.0) / float(gamma((d + 1) / 2.0))
        return cls(d=d, eta=(d - 1) / 2.0, omega_d=omega)


def clamp_cosine(t: np.ndarray | float) -> np.ndarray | float:
    if np.any(np.abs(t) > 1.0 + COS_SLACK):
        raise ValueError("cosine argument outside [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def gegenbauer_eval(eta: float, ell: int, t: np.ndarray | float) -> np.ndarray | float:
    if eta <= 0:
        raise ValueError("eta must be positive; use the Fourier projector for d=1")
    if ell < 0:
        raise ValueError("degree must be non-negative")
    t = clamp_cosine(t)
    prev = np.ones_like(t, dtype=float)
    if ell == 0:
        return prev if np.ndim(t) else float(prev)
    cur = 2.0 * eta * np.asarray(t, dtype=float)
    for m in range(2, ell + 1):
        prev, cur = cur, (2.0 * t * (m + eta - 1.0) * cur - (m + 2.0 * eta - 2.0) * prev) / m
    return cur if np.ndim(t) else float(cur)


def gegenbauer_table(eta: float, ell_max: int, t: np.ndarray) -> np.ndarray:
    """All degrees 0..ell_max at once; shape (ell_max + 1, *t.shape)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    t = np.asarray(clamp_cosine(t), dtype=float)
    out = np.empty((ell_max + 1, *t.shape))
    out[0] = 1.0
    if ell_max >= 1:
        out[1] = 2.0 * eta * t
    for m in range(2, ell_max + 1):
        out[m] = (2.0 * t * (m + eta - 1.0) * out[m - 1] - (m + 2.0 * eta - 2.0) * out[m - 2]) / m
    return out


def harmonic_dimension(spec: KernelSpec, ell: int) -> int:
    if spec.d == 1:
        return 1 if ell == 0 else 2
    two_eta = int(round(2 * spec.eta))
    return int(round((ell + spec.eta) / spec.eta * math.comb(ell + two_eta - 1, ell)))


def projector_kernel(spec: KernelSpec, ell: int, cos_angle: np.ndarray | float) -> np.ndarray | float:
    cos_angle = clamp_cosine(cos_angle)
    if spec.d == 1:
        if ell == 0:
            return np.full_like(cos_angle, 1.0 / (2.0 * math.pi), dtype=float) if np.ndim(cos_angle) else 1.0 / (2.0 * math.pi)
        return np.cos(ell * np.arccos(cos_angle)) / math.pi
    factor = (ell + spec.eta) / (spec.eta * spec.omega_d)
    return factor * gegenbauer_eval(spec.eta, ell, cos_angle)


def projector_weights(spec: KernelSpec, ells: np.ndarray) -> np.ndarray:
    ells = np.asarray(ells, dtype=float)
    if spec.d == 1:
        return np.where(ells == 0, 1.0 / (2.0 * math.pi), 1.0 / math.pi)
    return (ells + spec.eta) / (spec.eta * spec.omega_d)


def kernel_sum(spec: KernelSpec, ells: np.ndarray, coefs: np.ndarray, cos_angle: np.ndarray) -> np.ndarray:
    """sum_l coefs[l] * P_{l,d}(cos_angle) for increasing integer degrees ells.

    Runs a single recurrence up to max(ells) instead of one per degree.
    """
    cos_angle = np.asarray(clamp_cosine(cos_angle), dtype=float)
    ells = np.asarray(ells, dtype=int)
    total = np.zeros_like(cos_angle)
    if ells.size == 0:
        return total
    wanted = dict(zip(ells.tolist(), (np.asarray(coefs, dtype=float) * projector_weights(spec, ells)).tolist()))
    # d = 1 runs the Chebyshev recurrence, since cos(l*theta) = T_l(cos theta).
    two_eta = 1.0 if spec.d == 1 else 2.0 * spec.eta
    prev = np.ones_like(cos_angle)
    cur = two_eta * cos_angle
    if 0 in wanted:
        total += wanted[0] * prev
    if 1 in wanted:
        total += wanted[1] * cur
    for m in range(2, int(ells.max()) + 1):
        if spec.d == 1:
            prev, cur = cur, 2.0 * cos_angle * cur - prev
        else:
            prev, cur = cur, (2.0 * cos_angle * (m + spec.eta - 1.0) * cur - (m + 2.0 * spec.eta - 2.0) * prev) / m
        if m in wanted:
            total += wanted[m] * cur
    return total
