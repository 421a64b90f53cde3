from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .special_fns import KernelSpec, kernel_sum, projector_kernel
from .window import WindowFunction, window_eval

logger = logging.getLogger(__name__)

SUPPORTED_DIMENSIONS = (1, 2)
DEFAULT_MAX_CENTERS = 2**20
ANALYSIS_GRID = 4096
ROW_CHUNK = 1024
UNIT_NORM_TOLERANCE = 1e-12

PointFunction = Callable[[np.ndarray], np.ndarray]


class FrameError(Exception):
    pass


class CoefficientKind(str, Enum):
    EXACT = "exact"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class Level:
    j: int
    centers: np.ndarray
    weights: np.ndarray
    ells: np.ndarray
    b: np.ndarray

    @property
    def K(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True, eq=False)
class NeedletFrame:
    d: int
    B: float
    j_max: int
    window: WindowFunction
    levels: tuple[Level, ...]
    kernel: KernelSpec
    include_mean: bool = True

    @property
    def omega(self) -> float:
        return self.kernel.omega_d

    def level(self, j: int) -> Level:
        if not 0 <= j <= self.j_max:
            raise IndexError(f"level {j} outside [0, {self.j_max}]")
        return self.levels[j]

    def describe(self) -> dict[str, object]:
        return {
            "d": self.d,
            "B": self.B,
            "j_max": self.j_max,
            "include_mean": self.include_mean,
            "window": self.window.to_dict(),
            "levels": [
                {
                    "j": level.j,
                    "K": level.K,
                    "ell_min": int(level.ells.min()) if level.ells.size else None,
                    "ell_max": int(level.ells.max()) if level.ells.size else None,
                }
                for level in self.levels
            ],
        }

    def save_description(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.describe(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    values: tuple[np.ndarray, ...]
    kind: CoefficientKind
    mean_term: float

    @property
    def J(self) -> int:
        return len(self.values) - 1

    def level(self, j: int) -> np.ndarray:
        return self.values[j]

    def masked(self, keep: list[bool] | tuple[bool, ...]) -> "CoefficientSet":
        if len(keep) != len(self.values):
            raise FrameError("mask length does not match the number of levels")
        return CoefficientSet(
            values=tuple(v if flag else np.zeros_like(v) for v, flag in zip(self.values, keep)),
            kind=self.kind,
            mean_term=self.mean_term,
        )

    def rows(self) -> list[tuple[int, int, float]]:
        return [(j, k, float(v)) for j, level in enumerate(self.values) for k, v in enumerate(level)]

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["j", "k", "value"])
            writer.writerows(self.rows())


def floor_power(B: float, exponent: int) -> int:
    # slack absorbs rounding in B**exponent for exact integer powers
    return int(math.floor(B**exponent + 1e-9))


def cubature_degree(B: float, j: int) -> int:
    return 2 * floor_power(B, j + 1)


def band(window: WindowFunction, j: int) -> tuple[np.ndarray, np.ndarray]:
    B = window.B
    lo = floor_power(B, j - 1)
    hi = floor_power(B, j + 1)
    ells = np.arange(lo + 1, hi + 1)
    if ells.size == 0:
        return ells, np.zeros(0)
    b = np.asarray(window_eval(window, ells / B**j))
    keep = b > 0.0
    return ells[keep], b[keep]


def circle_cubature(K: int) -> tuple[np.ndarray, np.ndarray]:
    angles = 2.0 * math.pi * np.arange(K) / K
    return angles, np.full(K, 2.0 * math.pi / K)


def sphere_cubature(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) times equispaced longitudes, exact to `degree`."""
    n_lat = degree // 2 + 1
    n_lon = degree + 1
    z, w = roots_legendre(n_lat)
    phi = 2.0 * math.pi * np.arange(n_lon) / n_lon
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    rho = np.sqrt(1.0 - zz**2)
    points = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    weights = (w[:, None] * np.full(n_lon, 2.0 * math.pi / n_lon)[None, :]).reshape(-1)
    return points, weights


def cubature_size(d: int, degree: int) -> int:
    if d == 1:
        return degree + 1
    return (degree // 2 + 1) * (degree + 1)


def build_frame(
    d: int,
    B: float,
    j_max: int,
    window: WindowFunction,
    max_centers: int = DEFAULT_MAX_CENTERS,
    include_mean: bool = True,
) -> NeedletFrame:
    if d not in SUPPORTED_DIMENSIONS:
        raise FrameError(f"dimension {d} is not supported; use one of {SUPPORTED_DIMENSIONS}")
    if j_max < 0:
        raise FrameError("j_max must be non-negative")
    if not math.isclose(window.B, B):
        raise FrameError(f"window scale {window.B} does not match frame scale {B}")
    top = cubature_size(d, cubature_degree(B, j_max))
    if top > max_centers:
        raise FrameError(f"level {j_max} needs {top} cubature points, above the cap of {max_centers}")

    levels = []
    for j in range(j_max + 1):
        degree = cubature_degree(B, j)
        if d == 1:
            centers, weights = circle_cubature(degree + 1)
        else:
            centers, weights = sphere_cubature(degree)
        ells, b = band(window, j)
        levels.append(Level(j=j, centers=centers, weights=weights, ells=ells, b=b))
    logger.debug("built frame d=%d B=%s j_max=%d K=%s", d, B, j_max, [lv.K for lv in levels])
    return NeedletFrame(
        d=d,
        B=float(B),
        j_max=j_max,
        window=window,
        levels=tuple(levels),
        kernel=KernelSpec.for_dimension(d),
        include_mean=include_mean,
    )


def as_points(d: int, x: np.ndarray | float) -> np.ndarray:
    if d == 1:
        return np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != d + 1:
        raise FrameError(f"points on S^{d} need {d + 1} coordinates")
    if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1.0) > UNIT_NORM_TOLERANCE):
        raise FrameError("points must have unit norm")
    return pts


def cosines(d: int, points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    if d == 1:
        return np.cos(points[:, None] - centers[None, :])
    return np.clip(points @ centers.T, -1.0, 1.0)


def geodesic_distance(d: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if d == 1:
        gap = np.mod(np.asarray(x) - np.asarray(y), 2.0 * math.pi)
        return np.minimum(gap, 2.0 * math.pi - gap)
    return np.arccos(np.clip(np.sum(np.asarray(x) * np.asarray(y), axis=-1), -1.0, 1.0))


def needlet_eval(frame: NeedletFrame, j: int, k: int, x: np.ndarray | float) -> float:
    level = frame.level(j)
    if not 0 <= k < level.K:
        raise IndexError(f"center {k} outside [0, {level.K})")
    point = as_points(frame.d, x)[0]
    center = level.centers[k]
    cos_angle = math.cos(point - center) if frame.d == 1 else float(np.clip(point @ center, -1.0, 1.0))
    total = sum(b * projector_kernel(frame.kernel, int(ell), cos_angle) for ell, b in zip(level.ells, level.b))
    return float(math.sqrt(level.weights[k]) * total)


def needlet_matrix(frame: NeedletFrame, j: int, points: np.ndarray) -> np.ndarray:
    level = frame.level(j)
    pts = as_points(frame.d, points)
    out = np.zeros((pts.shape[0], level.K))
    if level.ells.size == 0:
        return out
    for start in range(0, pts.shape[0], ROW_CHUNK):
        chunk = pts[start : start + ROW_CHUNK]
        if frame.d == 1:
            out[start : start + ROW_CHUNK] = _circle_rows(level, chunk)
        else:
            cos = cosines(frame.d, chunk, level.centers)
            out[start : start + ROW_CHUNK] = kernel_sum(frame.kernel, level.ells, level.b, cos) * np.sqrt(level.weights)
    return out


def _circle_rows(level: Level, angles: np.ndarray) -> np.ndarray:
    # Centers are equispaced, so each row is one inverse real FFT of length K.
    K = level.K
    spectrum = np.zeros((angles.size, K // 2 + 1), dtype=complex)
    spectrum[:, level.ells] = level.b * np.exp(-1j * np.outer(angles, level.ells))
    scale = math.sqrt(level.weights[0]) / math.pi * (K / 2.0)
    return np.fft.irfft(spectrum, n=K, axis=1) * scale


def _circle_spectrum(frame: NeedletFrame, coeffs: CoefficientSet, keep: list[bool]) -> np.ndarray:
    """Complex c_l with sum_{j,k} beta_{j,k} psi_{j,k}(x) = Re sum_l c_l e^{i l x}."""
    top = max((int(frame.levels[j].ells.max()) for j in range(coeffs.J + 1) if frame.levels[j].ells.size), default=0)
    spectrum = np.zeros(top + 1, dtype=complex)
    for j in range(coeffs.J + 1):
        level = frame.levels[j]
        if not keep[j] or level.ells.size == 0:
            continue
        fourier = np.fft.rfft(coeffs.level(j))
        spectrum[level.ells] += math.sqrt(level.weights[0]) / math.pi * level.b * fourier[level.ells]
    return spectrum


def _constant_level(frame: NeedletFrame, coeffs: CoefficientSet) -> float:
    return coeffs.mean_term / math.sqrt(frame.omega) if frame.include_mean else 0.0


def _check_indexing(frame: NeedletFrame, coeffs: CoefficientSet) -> None:
    if coeffs.J > frame.j_max:
        raise FrameError(f"coefficients reach level {coeffs.J}, frame stops at {frame.j_max}")
    for j, values in enumerate(coeffs.values):
        if values.shape != (frame.levels[j].K,):
            raise FrameError(f"level {j} has {values.shape[0]} coefficients, frame has {frame.levels[j].K}")


def synthesize_many(
    frame: NeedletFrame,
    coeffs: CoefficientSet,
    points: np.ndarray,
    keep: list[bool] | None = None,
) -> np.ndarray:
    _check_indexing(frame, coeffs)
    keep = [True] * (coeffs.J + 1) if keep is None else list(keep)
    pts = as_points(frame.d, points)
    out = np.full(pts.shape[0], _constant_level(frame, coeffs))
    if frame.d == 1:
        spectrum = _circle_spectrum(frame, coeffs, keep)
        ells = np.nonzero(spectrum)[0]
        for start in range(0, pts.shape[0], ROW_CHUNK):
            chunk = pts[start : start + ROW_CHUNK]
            out[start : start + ROW_CHUNK] += np.real(np.exp(1j * np.outer(chunk, ells)) @ spectrum[ells])
        return out
    for j in range(coeffs.J + 1):
        if keep[j]:
            out += needlet_matrix(frame, j, pts) @ coeffs.level(j)
    return out


def synthesize_circle_grid(
    frame: NeedletFrame,
    coeffs: CoefficientSet,
    size: int,
    keep: list[bool] | None = None,
) -> np.ndarray:
    if frame.d != 1:
        raise FrameError("grid synthesis is defined on the circle only")
    _check_indexing(frame, coeffs)
    keep = [True] * (coeffs.J + 1) if keep is None else list(keep)
    spectrum = _circle_spectrum(frame, coeffs, keep)
    if 2 * (spectrum.size - 1) >= size:
        raise FrameError(f"grid of {size} points aliases frequency {spectrum.size - 1}")
    padded = np.zeros(size // 2 + 1, dtype=complex)
    padded[1 : spectrum.size] = spectrum[1:]
    return np.fft.irfft(padded, n=size) * (size / 2.0) + _constant_level(frame, coeffs)


def synthesize(frame: NeedletFrame, coeffs: CoefficientSet, x: np.ndarray | float) -> float:
    return float(synthesize_many(frame, coeffs, as_points(frame.d, x)[:1])[0])


def analysis_grid(frame: NeedletFrame, J: int) -> tuple[np.ndarray, np.ndarray]:
    degree = cubature_degree(frame.B, J)
    if frame.d == 1:
        return circle_cubature(max(degree + 1, ANALYSIS_GRID))
    return sphere_cubature(max(degree, 16))


def analyze(frame: NeedletFrame, f: PointFunction, J: int | None = None) -> CoefficientSet:
    J = frame.j_max if J is None else J
    if not 0 <= J <= frame.j_max:
        raise FrameError(f"analysis level {J} outside [0, {frame.j_max}]")
    grid, weights = analysis_grid(frame, J)
    fvals = np.asarray(f(grid), dtype=float)
    mean_term = float(weights @ fvals / math.sqrt(frame.omega))
    values = []
    if frame.d == 1:
        # f_hat_l = int f(x) e^{-ilx} dx on the uniform grid
        fourier = np.fft.rfft(fvals) * (2.0 * math.pi / grid.size)
        for level in frame.levels[: J + 1]:
            K = level.K
            spectrum = np.zeros(K // 2 + 1, dtype=complex)
            spectrum[level.ells] = level.b * fourier[level.ells]
            scale = math.sqrt(level.weights[0]) / math.pi * (K / 2.0)
            values.append(np.fft.irfft(spectrum, n=K) * scale)
    else:
        weighted = weights * fvals
        for level in frame.levels[: J + 1]:
            values.append(needlet_matrix(frame, level.j, grid).T @ weighted)
    return CoefficientSet(values=tuple(values), kind=CoefficientKind.EXACT, mean_term=mean_term)


def zero_coefficients(frame: NeedletFrame, J: int, kind: CoefficientKind = CoefficientKind.EXACT) -> CoefficientSet:
    return CoefficientSet(
        values=tuple(np.zeros(level.K) for level in frame.levels[: J + 1]),
        kind=kind,
        mean_term=0.0,
    )


def level_grid(frame: NeedletFrame, j: int, oversample: int = 32) -> tuple[np.ndarray, np.ndarray]:
    degree = cubature_degree(frame.B, j)
    if frame.d == 1:
        return circle_cubature(oversample * (degree + 1))
    return sphere_cubature(4 * max(degree, 8))


def needlet_values(frame: NeedletFrame, j: int, k: int, grid: np.ndarray) -> np.ndarray:
    level = frame.level(j)
    if not 0 <= k < level.K:
        raise IndexError(f"center {k} outside [0, {level.K})")
    if frame.d == 1:
        cos = np.cos(grid - level.centers[k])
    else:
        cos = np.clip(grid @ level.centers[k], -1.0, 1.0)
    return kernel_sum(frame.kernel, level.ells, level.b, cos) * math.sqrt(level.weights[k])


def needlet_lp_norm(frame: NeedletFrame, j: int, k: int, p: float) -> float:
    grid, weights = level_grid(frame, j)
    values = np.abs(needlet_values(frame, j, k, grid))
    if math.isinf(p):
        return float(values.max())
    return float((weights @ values**p) ** (1.0 / p))


def gram_row(frame: NeedletFrame, j: int, k: int) -> np.ndarray:
    """<psi_{j,k}, psi_{j,k'}> for all k', via the reproducing property of P_{l,d}."""
    level = frame.level(j)
    cos = cosines(frame.d, level.centers[k : k + 1], level.centers)[0]
    return kernel_sum(frame.kernel, level.ells, level.b**2, cos) * np.sqrt(level.weights[k] * level.weights)
