from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frame import (
    CoefficientKind,
    CoefficientSet,
    FrameError,
    NeedletFrame,
    as_points,
    needlet_matrix,
    synthesize_circle_grid,
    synthesize_many,
)

logger = logging.getLogger(__name__)

BRUTEFORCE_CAP = 10**7


class EstimatorError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    d: int = 1
    noise_sd: float = 0.0

    def __post_init__(self) -> None:
        if self.noise_sd < 0:
            raise EstimatorError("noise_sd must be non-negative")
        try:
            points = as_points(self.d, self.X)
        except FrameError as exc:
            raise EstimatorError(str(exc)) from exc
        if points.shape[0] != np.asarray(self.Y).shape[0]:
            raise EstimatorError(f"{points.shape[0]} locations but {np.asarray(self.Y).shape[0]} responses")
        object.__setattr__(self, "X", points)
        object.__setattr__(self, "Y", np.asarray(self.Y, dtype=float).reshape(-1))

    @property
    def n(self) -> int:
        return int(self.Y.size)

    def to_csv(self, path: Path) -> None:
        if self.d != 1:
            raise EstimatorError("CSV export covers circle data only")
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["x", "y"])
            writer.writerows(zip(self.X.tolist(), self.Y.tolist()))


def load_dataset_csv(path: Path, noise_sd: float = 0.0) -> Dataset:
    if not path.exists():
        raise EstimatorError(f"Data file was not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
            raise EstimatorError("data CSV must have columns x and y")
        try:
            rows = [(float(row["x"]), float(row["y"])) for row in reader]
        except ValueError as exc:
            raise EstimatorError(f"non-numeric value in {path}: {exc}") from exc
    if not rows:
        return Dataset(X=np.zeros(0), Y=np.zeros(0), noise_sd=noise_sd)
    x, y = zip(*rows)
    return Dataset(X=np.array(x), Y=np.array(y), noise_sd=noise_sd)


@dataclass(frozen=True, eq=False)
class EmpiricalCoefficients:
    coefficients: CoefficientSet
    Z: tuple[np.ndarray, ...]
    n: int
    omega: float

    def sampling(self) -> CoefficientSet:
        """Coefficients on the probability scale, (1/n) sum_i Z_{i;j,k}."""
        return CoefficientSet(
            values=tuple(v / self.omega for v in self.coefficients.values),
            kind=CoefficientKind.EMPIRICAL,
            mean_term=self.coefficients.mean_term / self.omega,
        )


@dataclass(frozen=True)
class LevelDecision:
    j: int
    theta: float
    threshold: float
    tau: int


@dataclass(frozen=True)
class ThresholdReport:
    p: float
    n: int
    B: float
    d: int
    J: int
    levels: tuple[LevelDecision, ...]
    forced: bool = False

    @property
    def taus(self) -> tuple[int, ...]:
        return tuple(level.tau for level in self.levels)

    @property
    def selected(self) -> tuple[int, ...]:
        return tuple(level.j for level in self.levels if level.tau)

    def to_dict(self) -> dict[str, object]:
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "n": self.n,
            "B": self.B,
            "d": self.d,
            "J": self.J,
            "forced": self.forced,
            "levels": [
                {"j": lv.j, "theta": lv.theta, "threshold": lv.threshold, "tau": lv.tau} for lv in self.levels
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ThresholdReport":
        try:
            p = math.inf if data["p"] == "inf" else float(data["p"])
            levels = tuple(
                LevelDecision(j=int(lv["j"]), theta=float(lv["theta"]), threshold=float(lv["threshold"]), tau=int(lv["tau"]))
                for lv in data["levels"]
            )
            return cls(
                p=p,
                n=int(data["n"]),
                B=float(data["B"]),
                d=int(data["d"]),
                J=int(data["J"]),
                levels=levels,
                forced=bool(data.get("forced", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EstimatorError(f"malformed threshold report: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Estimate:
    frame: NeedletFrame
    raw: CoefficientSet
    report: ThresholdReport | None = field(default=None)

    @property
    def taus(self) -> tuple[int, ...]:
        if self.report is None:
            return (1,) * (self.raw.J + 1)
        return self.report.taus

    @property
    def coefficients(self) -> CoefficientSet:
        return self.raw.masked([bool(t) for t in self.taus])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return synthesize_many(self.frame, self.coefficients, points, keep=[bool(t) for t in self.taus])

    def evaluate_circle_grid(self, size: int) -> np.ndarray:
        return synthesize_circle_grid(self.frame, self.coefficients, size, keep=[bool(t) for t in self.taus])

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        taus = self.taus
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["j", "k", "beta_hat", "tau"])
            for j, k, value in self.raw.rows():
                writer.writerow([j, k, value, taus[j]])


def truncation_level(n: int, B: float, d: int) -> int:
    if n < 2:
        raise EstimatorError("truncation level needs n >= 2")
    return int(math.floor(math.log(n) / (d * math.log(B)) + 1e-9))


def empirical_coefficients(frame: NeedletFrame, data: Dataset, J: int) -> EmpiricalCoefficients:
    if data.n == 0:
        raise EstimatorError("dataset is empty")
    if data.d != frame.d:
        raise EstimatorError(f"dataset lives on S^{data.d}, frame on S^{frame.d}")
    if not 0 <= J <= frame.j_max:
        raise EstimatorError(f"level {J} outside the frame range [0, {frame.j_max}]")
    # Z averages to the coefficient under the uniform probability measure; times
    # omega it is the surface-measure coefficient the frame synthesizes.
    Z = tuple(data.Y[:, None] * needlet_matrix(frame, j, data.X) for j in range(J + 1))
    omega = frame.omega
    coefficients = CoefficientSet(
        values=tuple(omega * z.mean(axis=0) for z in Z),
        kind=CoefficientKind.EMPIRICAL,
        mean_term=math.sqrt(omega) * float(data.Y.mean()),
    )
    return EmpiricalCoefficients(coefficients=coefficients, Z=Z, n=data.n, omega=omega)


def _as_columns(Z: np.ndarray | list) -> np.ndarray:
    arr = np.asarray(Z, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise EstimatorError("Z must be an (n, K) array")
    return arr


def _check_order(p: int, n: int) -> None:
    if p != int(p) or int(p) % 2 or p < 2:
        raise EstimatorError(f"U-statistic order must be an even integer >= 2, got {p}")
    if p > n:
        raise EstimatorError(f"U-statistic order {p} exceeds the sample size {n}")


def elementary_symmetric(Z: np.ndarray, p: int) -> np.ndarray:
    """e_p of each column from power sums through Newton's identities."""
    power = np.stack([np.sum(Z**m, axis=0) for m in range(1, p + 1)])
    e = [np.ones(Z.shape[1])]
    for m in range(1, p + 1):
        acc = np.zeros(Z.shape[1])
        for i in range(1, m + 1):
            acc += (-1) ** (i - 1) * e[m - i] * power[i - 1]
        e.append(acc / m)
    return e[p]


def ustat_theta(Z: np.ndarray | list, p: int) -> float:
    cols = _as_columns(Z)
    n = cols.shape[0]
    _check_order(p, n)
    p = int(p)
    return float(math.fsum(elementary_symmetric(cols, p)) / math.comb(n, p))


def ustat_subset_count(n: int, p: int) -> int:
    return math.comb(n, p)


def ustat_theta_bruteforce(Z: np.ndarray | list, p: int) -> float:
    cols = _as_columns(Z)
    n = cols.shape[0]
    _check_order(p, n)
    p = int(p)
    count = math.comb(n, p)
    if count > BRUTEFORCE_CAP:
        raise EstimatorError(f"{count} subsets exceed the enumeration cap of {BRUTEFORCE_CAP}")
    total = np.zeros(cols.shape[1])
    for subset in itertools.combinations(range(n), p):
        total += np.prod(cols[list(subset)], axis=0)
    return float(math.fsum(total) / count)


def ustat_theta_interpolated(Z: np.ndarray | list, p: float) -> float:
    if p <= 2:
        raise EstimatorError(f"interpolated order must exceed 2, got {p}")
    if float(p).is_integer() and int(p) % 2 == 0:
        raise EstimatorError(f"order {p} is even; use ustat_theta")
    low = 2 * int(math.floor(p / 2.0))
    high = low + 2
    delta = (high - p) / 2.0
    theta_low = max(ustat_theta(Z, low), 0.0)
    theta_high = max(ustat_theta(Z, high), 0.0)
    if theta_low == 0.0 or theta_high == 0.0:
        return 0.0
    return float(theta_low**delta * theta_high ** (1.0 - delta))


def theta_infty(coeffs: CoefficientSet, j: int) -> float:
    if not 0 <= j <= coeffs.J:
        raise EstimatorError(f"level {j} is not present")
    return float(np.sum(np.abs(coeffs.level(j))))


def level_statistic(emp: EmpiricalCoefficients, j: int, p: float) -> float:
    if math.isinf(p):
        return theta_infty(emp.sampling(), j)
    if float(p).is_integer() and int(p) % 2 == 0:
        return ustat_theta(emp.Z[j], int(p))
    return ustat_theta_interpolated(emp.Z[j], p)


def threshold_value(j: int, n: int, B: float, d: int, p: float) -> float:
    exponent = 0.5 if math.isinf(p) else p / 2.0
    return B ** (d * j) * n ** (-exponent)


def threshold_levels(
    stats: list[float] | tuple[float, ...],
    n: int,
    B: float,
    d: int,
    p: float,
    force: bool = False,
) -> ThresholdReport:
    levels = []
    for j, theta in enumerate(stats):
        threshold = threshold_value(j, n, B, d, p)
        tau = 1 if force or theta >= threshold else 0
        levels.append(LevelDecision(j=j, theta=float(theta), threshold=threshold, tau=tau))
    return ThresholdReport(p=float(p), n=n, B=B, d=d, J=len(stats) - 1, levels=tuple(levels), forced=force)


def global_estimate(frame: NeedletFrame, emp: EmpiricalCoefficients, p: float = 2, force: bool = False) -> Estimate:
    J = emp.coefficients.J
    stats = [level_statistic(emp, j, p) for j in range(J + 1)]
    report = threshold_levels(stats, emp.n, frame.B, frame.d, p, force=force)
    logger.debug("levels selected %s (p=%s, n=%d)", report.selected, p, emp.n)
    return Estimate(frame=frame, raw=emp.coefficients, report=report)


def linear_estimate(frame: NeedletFrame, emp: EmpiricalCoefficients) -> Estimate:
    return global_estimate(frame, emp, p=2, force=True)


def _resolve_level(frame: NeedletFrame, data: Dataset, J: int | None) -> int:
    if J is None:
        J = truncation_level(data.n, frame.B, frame.d)
    if J > frame.j_max:
        raise EstimatorError(f"level {J} needs a frame built to at least that level (j_max={frame.j_max})")
    return J


def fit_global(frame: NeedletFrame, data: Dataset, p: float = 2, J: int | None = None, force: bool = False) -> Estimate:
    emp = empirical_coefficients(frame, data, _resolve_level(frame, data, J))
    return global_estimate(frame, emp, p=p, force=force)


def fit_linear(frame: NeedletFrame, data: Dataset, J: int | None = None) -> Estimate:
    emp = empirical_coefficients(frame, data, _resolve_level(frame, data, J))
    return linear_estimate(frame, emp)
