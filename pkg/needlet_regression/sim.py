from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .besov import lp_risk, risk_grid, sup_norm, truth_function
from .config import ExperimentConfig, format_order, threads_from_env
from .estimator import (
    Dataset,
    Estimate,
    empirical_coefficients,
    global_estimate,
    linear_estimate,
    truncation_level,
)
from .frame import NeedletFrame, build_frame, floor_power
from .runlog import RunLog, RunLogError, recorded_run
from .window import build_window

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "test_fn",
    "n",
    "J_n",
    "sigma_frac",
    "p",
    "R",
    "global_mean",
    "global_se",
    "linear_mean",
    "linear_se",
    "levels_selected_mode",
)
EMPTY_SELECTION = "-"


class SimulationError(Exception):
    pass


class NoiseFamily(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM_BOUNDED = "uniform_bounded"
    RADEMACHER_SCALED = "rademacher_scaled"


SeedLike = int | np.random.SeedSequence | np.random.Generator


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replicate_seed(base: int, cell: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=base, spawn_key=(cell, replicate))


def sample_noise(rng: np.random.Generator, family: NoiseFamily | str, sigma: float, n: int) -> np.ndarray:
    family = NoiseFamily(family)
    if family is NoiseFamily.GAUSSIAN:
        return sigma * rng.standard_normal(n)
    if family is NoiseFamily.UNIFORM_BOUNDED:
        half = math.sqrt(3.0) * sigma
        return rng.uniform(-half, half, n)
    return sigma * rng.choice(np.array([-1.0, 1.0]), size=n)


def generate_dataset(
    f: Callable[[np.ndarray], np.ndarray],
    n: int,
    sigma: float,
    family: NoiseFamily | str = NoiseFamily.GAUSSIAN,
    seed: SeedLike = 0,
    d: int = 1,
) -> Dataset:
    if n < 1:
        raise SimulationError("n must be at least 1")
    if sigma < 0:
        raise SimulationError("noise standard deviation must be non-negative")
    rng = _generator(seed)
    if d == 1:
        X = rng.uniform(0.0, 2.0 * math.pi, n)
    else:
        raw = rng.standard_normal((n, d + 1))
        X = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    Y = np.asarray(f(X), dtype=float)
    if sigma > 0:
        Y = Y + sample_noise(rng, family, sigma, n)
    return Dataset(X=X, Y=Y, d=d, noise_sd=sigma)


@dataclass(frozen=True)
class CellResult:
    test_fn: str
    n: int
    J_n: int
    sigma_frac: float
    sigma: float
    p: float | str
    R: int
    global_mean: float
    global_se: float
    linear_mean: float
    linear_se: float
    level_histogram: dict[str, int]
    level_counts: tuple[int, ...]
    theta_means: tuple[float, ...]
    thresholds: tuple[float, ...]
    wall_clock: float

    @property
    def levels_selected_mode(self) -> str:
        if not self.level_histogram:
            return EMPTY_SELECTION
        return Counter(self.level_histogram).most_common(1)[0][0]

    def csv_row(self) -> list[object]:
        return [
            self.test_fn,
            self.n,
            self.J_n,
            self.sigma_frac,
            self.p,
            self.R,
            self.global_mean,
            self.global_se,
            self.linear_mean,
            self.linear_se,
            self.levels_selected_mode,
        ]

    def to_dict(self) -> dict[str, object]:
        data = asdict(self)
        data["level_counts"] = list(self.level_counts)
        data["theta_means"] = list(self.theta_means)
        data["thresholds"] = list(self.thresholds)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CellResult":
        return cls(
            test_fn=str(data["test_fn"]),
            n=int(data["n"]),
            J_n=int(data["J_n"]),
            sigma_frac=float(data["sigma_frac"]),
            sigma=float(data["sigma"]),
            p="inf" if data["p"] == "inf" else float(data["p"]),
            R=int(data["R"]),
            global_mean=float(data["global_mean"]),
            global_se=float(data["global_se"]),
            linear_mean=float(data["linear_mean"]),
            linear_se=float(data["linear_se"]),
            level_histogram={str(k): int(v) for k, v in data["level_histogram"].items()},
            level_counts=tuple(int(v) for v in data["level_counts"]),
            theta_means=tuple(float(v) for v in data["theta_means"]),
            thresholds=tuple(float(v) for v in data["thresholds"]),
            wall_clock=float(data["wall_clock"]),
        )


@dataclass(frozen=True)
class RiskReport:
    config: dict[str, object]
    seed: int
    cells: tuple[CellResult, ...]
    complete: bool = True

    def to_dict(self) -> dict[str, object]:
        return {
            "config": self.config,
            "seed": self.seed,
            "complete": self.complete,
            "cells": [cell.to_dict() for cell in self.cells],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RiskReport":
        try:
            return cls(
                config=dict(data["config"]),
                seed=int(data["seed"]),
                cells=tuple(CellResult.from_dict(cell) for cell in data["cells"]),
                complete=bool(data.get("complete", True)),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SimulationError(f"malformed risk report: {exc}") from exc


@dataclass(frozen=True)
class _Replicate:
    global_loss: float
    linear_loss: float
    selected: tuple[int, ...]
    thetas: tuple[float, ...]
    thresholds: tuple[float, ...]


def selection_key(selected: tuple[int, ...]) -> str:
    return " ".join(str(j) for j in selected) if selected else EMPTY_SELECTION


def mean_and_se(values: list[float]) -> tuple[float, float]:
    R = len(values)
    mean = math.fsum(values) / R
    if R < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (R - 1)
    return mean, math.sqrt(variance / R)


def _fit_replicate(
    frame: NeedletFrame,
    cfg: ExperimentConfig,
    truth: Callable[[np.ndarray], np.ndarray],
    n: int,
    J: int,
    sigma: float,
    cell: int,
    replicate: int,
) -> tuple[Estimate, Estimate]:
    data = generate_dataset(truth, n, sigma, cfg.noise, replicate_seed(cfg.seed, cell, replicate), d=cfg.d)
    emp = empirical_coefficients(frame, data, J)
    return global_estimate(frame, emp, p=cfg.p), linear_estimate(frame, emp)


def _run_replicate(
    frame: NeedletFrame,
    cfg: ExperimentConfig,
    truth: Callable[[np.ndarray], np.ndarray],
    n: int,
    J: int,
    sigma: float,
    cell: int,
    replicate: int,
) -> _Replicate:
    fitted, linear = _fit_replicate(frame, cfg, truth, n, J, sigma, cell, replicate)
    report = fitted.report
    return _Replicate(
        global_loss=lp_risk(fitted, truth, cfg.loss_p, cfg.grid_size),
        linear_loss=lp_risk(linear, truth, cfg.loss_p, cfg.grid_size),
        selected=report.selected,
        thetas=tuple(lv.theta for lv in report.levels),
        thresholds=tuple(lv.threshold for lv in report.levels),
    )


def summarize_cell(
    cfg: ExperimentConfig,
    n: int,
    J: int,
    sigma_frac: float,
    sigma: float,
    outcomes: list[_Replicate],
    wall_clock: float,
) -> CellResult:
    global_mean, global_se = mean_and_se([o.global_loss for o in outcomes])
    linear_mean, linear_se = mean_and_se([o.linear_loss for o in outcomes])
    histogram = Counter(selection_key(o.selected) for o in outcomes)
    counts = [0] * (J + 1)
    for outcome in outcomes:
        for j in outcome.selected:
            counts[j] += 1
    R = len(outcomes)
    return CellResult(
        test_fn=cfg.test_function,
        n=n,
        J_n=J,
        sigma_frac=sigma_frac,
        sigma=sigma,
        p=format_order(cfg.p),
        R=R,
        global_mean=global_mean,
        global_se=global_se,
        linear_mean=linear_mean,
        linear_se=linear_se,
        level_histogram=dict(histogram),
        level_counts=tuple(counts),
        theta_means=tuple(math.fsum(o.thetas[j] for o in outcomes) / R for j in range(J + 1)),
        thresholds=outcomes[0].thresholds,
        wall_clock=wall_clock,
    )


def run_experiment(
    cfg: ExperimentConfig,
    run_log: Path | None = None,
    workers: int | None = None,
) -> RiskReport:
    truth = truth_function(cfg.test_function)
    M = sup_norm(cfg.test_function)
    levels = {n: truncation_level(n, cfg.B, cfg.d) for n in cfg.n}
    frame = _experiment_frame(cfg, max(levels.values()))
    workers = threads_from_env() if workers is None else workers
    log = RunLog(run_log) if run_log is not None else None
    if log is not None:
        log.start(cfg.to_dict(), cfg.seed, len(cfg.n) * len(cfg.sigma_fracs))
        logger.info("run %s logged to %s", log.run_id, run_log)

    run_started = time.perf_counter()
    cells: list[CellResult] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        cell_index = 0
        for n in cfg.n:
            J = levels[n]
            for sigma_frac in cfg.sigma_fracs:
                sigma = sigma_frac * M
                started = time.perf_counter()
                outcomes = list(
                    pool.map(
                        lambda r, c=cell_index, n=n, J=J, s=sigma: _run_replicate(frame, cfg, truth, n, J, s, c, r),
                        range(cfg.replicates),
                    )
                )
                cell = summarize_cell(cfg, n, J, sigma_frac, sigma, outcomes, time.perf_counter() - started)
                cells.append(cell)
                logger.info(
                    "cell n=%d sigma=%.2fM: global %.4g linear %.4g mode %s",
                    n,
                    sigma_frac,
                    cell.global_mean,
                    cell.linear_mean,
                    cell.levels_selected_mode,
                )
                if log is not None:
                    log.cell(cell_index, cell.to_dict())
                cell_index += 1
    if log is not None:
        log.finish(len(cells), time.perf_counter() - run_started)
    return RiskReport(config=cfg.to_dict(), seed=cfg.seed, cells=tuple(cells))


def _experiment_frame(cfg: ExperimentConfig, j_max: int) -> NeedletFrame:
    try:
        window = build_window(cfg.B, variant=cfg.window)
        return build_frame(cfg.d, cfg.B, j_max, window, max_centers=cfg.max_centers)
    except Exception as exc:
        raise SimulationError(f"cannot build the needlet frame: {exc}") from exc


def recover_report(path: Path, run_id: str | None = None) -> RiskReport:
    try:
        run = recorded_run(path, run_id)
    except RunLogError as exc:
        raise SimulationError(str(exc)) from exc
    try:
        cells = tuple(CellResult.from_dict(cell) for cell in run.cells)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise SimulationError(f"malformed cell record in run '{run.run_id}': {exc}") from exc
    complete = run.finished and len(cells) == run.expected_cells
    if not complete:
        logger.warning("run %s is incomplete: %d of %d cells", run.run_id, len(cells), run.expected_cells)
    return RiskReport(config=run.config, seed=run.seed, cells=cells, complete=complete)


@dataclass(frozen=True, eq=False)
class CurveTable:
    test_fn: str
    n: int
    J_n: int
    sigma: float
    selected: tuple[int, ...]
    x: np.ndarray
    truth: np.ndarray
    global_fit: np.ndarray
    linear_fit: np.ndarray

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["x", "truth", "global", "linear"])
        for row in zip(self.x.tolist(), self.truth.tolist(), self.global_fit.tolist(), self.linear_fit.tolist()):
            writer.writerow(row)
        return buffer.getvalue()


def fitted_curve(cfg: ExperimentConfig, n: int, sigma_frac: float, replicate: int = 0) -> CurveTable:
    """Truth, global fit and linear fit of one replicate on the risk grid.

    The replicate uses the same seed stream as in `run_experiment`, so the
    curve belongs to the cell it is taken from.
    """
    if n not in cfg.n:
        raise SimulationError(f"n={n} is not one of the configured sample sizes {list(cfg.n)}")
    matches = [i for i, s in enumerate(cfg.sigma_fracs) if math.isclose(s, sigma_frac)]
    if not matches:
        raise SimulationError(f"sigma_frac={sigma_frac} is not one of {list(cfg.sigma_fracs)}")
    if not 0 <= replicate < cfg.replicates:
        raise SimulationError(f"replicate must be in [0, {cfg.replicates})")
    cell = cfg.n.index(n) * len(cfg.sigma_fracs) + matches[0]

    truth = truth_function(cfg.test_function)
    sigma = cfg.sigma_fracs[matches[0]] * sup_norm(cfg.test_function)
    J = truncation_level(n, cfg.B, cfg.d)
    frame = _experiment_frame(cfg, J)
    fitted, linear = _fit_replicate(frame, cfg, truth, n, J, sigma, cell, replicate)
    x, _ = risk_grid(cfg.d, cfg.grid_size, floor_power(cfg.B, J + 1))
    return CurveTable(
        test_fn=cfg.test_function,
        n=n,
        J_n=J,
        sigma=sigma,
        selected=fitted.report.selected,
        x=x,
        truth=np.asarray(truth(x), dtype=float),
        global_fit=fitted.evaluate_circle_grid(x.size),
        linear_fit=linear.evaluate_circle_grid(x.size),
    )


def curve_emit(table: CurveTable, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table.to_csv(), encoding="utf-8")
    except OSError as exc:
        raise SimulationError(f"cannot write curve to {path}: {exc}") from exc


def report_csv(report: RiskReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for cell in report.cells:
        writer.writerow(cell.csv_row())
    return buffer.getvalue()


def report_json(report: RiskReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def render_report(report: RiskReport, fmt: str) -> str:
    if fmt == "csv":
        return report_csv(report)
    if fmt == "json":
        return report_json(report)
    raise SimulationError(f"unknown report format '{fmt}'; use csv or json")


def report_emit(report: RiskReport, path: Path, fmt: str = "csv") -> None:
    text = render_report(report, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise SimulationError(f"cannot write report to {path}: {exc}") from exc


def _looks_like_run_log(text: str) -> bool:
    first = next((line for line in text.splitlines() if line.strip()), "")
    try:
        record = json.loads(first)
    except json.JSONDecodeError:
        return False
    return isinstance(record, dict) and "event" in record


def load_report(path: Path, run_id: str | None = None) -> RiskReport:
    if not path.exists():
        raise SimulationError(f"Report file was not found: {path}")
    text = path.read_text(encoding="utf-8")
    if run_id is not None or _looks_like_run_log(text):
        return recover_report(path, run_id)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SimulationError(f"Report file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SimulationError("Report file must contain a JSON object")
    return RiskReport.from_dict(raw)
