from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

APP_NAME = "needlet-regression"
THREADS_ENV = "NEEDLET_THREADS"
TEST_FUNCTIONS = ("F1", "F2", "F3")
NOISE_FAMILIES = ("gaussian", "uniform_bounded", "rademacher_scaled")
WINDOWS = ("smooth_bump", "bspline")
PRESET_SIGMA_FRACS = (0.25, 0.5, 0.75)
PRESET_SIZES = (2**6, 2**7, 2**8)


class ConfigError(Exception):
    pass


def default_config_path() -> Path:
    return Path.home() / ".config" / APP_NAME / "experiment.json"


def default_run_log_path() -> Path:
    return Path.home() / ".local" / "state" / APP_NAME / "runs.log"


def _positive_int(data: dict, key: str, default: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"'{key}' must be a positive integer")
    return value


def _number(data: dict, key: str, default: float) -> float:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number")
    return float(value)


def _choice(data: dict, key: str, default: str, allowed: tuple[str, ...]) -> str:
    value = data.get(key, default)
    if value not in allowed:
        raise ConfigError(f"'{key}' must be one of {', '.join(allowed)}")
    return value


def parse_order(value: object, key: str = "p") -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number or \"inf\"")
    if value < 2:
        raise ConfigError(f"'{key}' must be at least 2")
    return float(value)


def format_order(p: float) -> str | float:
    return "inf" if math.isinf(p) else p


@dataclass(frozen=True)
class ExperimentConfig:
    test_function: str = "F2"
    d: int = 1
    B: float = 2.0
    n: tuple[int, ...] = PRESET_SIZES
    p: float = 2.0
    noise: str = "gaussian"
    sigma_fracs: tuple[float, ...] = PRESET_SIGMA_FRACS
    replicates: int = 200
    seed: int = 0
    grid_size: int = 4096
    output: Path | None = None
    window: str = "smooth_bump"
    max_centers: int = 2**20
    loss_p: float = 2.0

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        test_function = _choice(data, "test_function", "F2", TEST_FUNCTIONS)
        d = _positive_int(data, "d", 1)
        if d != 1:
            raise ConfigError("'d' must be 1: the test functions live on the circle")
        B = _number(data, "B", 2.0)
        if not B > 1:
            raise ConfigError("'B' must be greater than 1")

        n_values = data.get("n", list(PRESET_SIZES))
        if isinstance(n_values, int) and not isinstance(n_values, bool):
            n_values = [n_values]
        if not isinstance(n_values, list) or not n_values:
            raise ConfigError("'n' must be an integer or a non-empty list of integers")
        for value in n_values:
            if isinstance(value, bool) or not isinstance(value, int) or value < 2:
                raise ConfigError("'n' entries must be integers >= 2")

        sigma_values = data.get("sigma_fracs", list(PRESET_SIGMA_FRACS))
        if not isinstance(sigma_values, list) or not sigma_values:
            raise ConfigError("'sigma_fracs' must be a non-empty list")
        for value in sigma_values:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise ConfigError("'sigma_fracs' entries must be non-negative numbers")

        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("'seed' must be a non-negative integer")

        grid_size = _positive_int(data, "grid_size", 4096)
        if grid_size < 256:
            raise ConfigError("'grid_size' must be at least 256")

        output = data.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("'output' must be a string path or null")

        loss_p = data.get("loss_p", 2.0)
        loss_p = math.inf if loss_p == "inf" else _number(data, "loss_p", 2.0)
        if loss_p < 1:
            raise ConfigError("'loss_p' must be at least 1")

        return cls(
            test_function=test_function,
            d=d,
            B=B,
            n=tuple(n_values),
            p=parse_order(data.get("p", 2)),
            noise=_choice(data, "noise", "gaussian", NOISE_FAMILIES),
            sigma_fracs=tuple(float(v) for v in sigma_values),
            replicates=_positive_int(data, "replicates", 200),
            seed=seed,
            grid_size=grid_size,
            output=Path(output).expanduser() if output is not None else None,
            window=_choice(data, "window", "smooth_bump", WINDOWS),
            max_centers=_positive_int(data, "max_centers", 2**20),
            loss_p=loss_p,
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "test_function": self.test_function,
            "d": self.d,
            "B": self.B,
            "n": list(self.n),
            "p": format_order(self.p),
            "noise": self.noise,
            "sigma_fracs": list(self.sigma_fracs),
            "replicates": self.replicates,
            "seed": self.seed,
            "grid_size": self.grid_size,
            "output": str(self.output) if self.output is not None else None,
            "window": self.window,
            "max_centers": self.max_centers,
            "loss_p": format_order(self.loss_p),
        }


PRESETS = {
    "example-4.1": "F1",
    "example-4.2": "F2",
    "example-4.3": "F3",
}
PRESET_ALIASES = {
    "constant": "example-4.1",
    "single-mode": "example-4.2",
    "mixed": "example-4.3",
}


def preset(name: str) -> ExperimentConfig:
    key = PRESET_ALIASES.get(name, name)
    if key not in PRESETS:
        choices = ", ".join([*PRESETS, *PRESET_ALIASES])
        raise ConfigError(f"unknown preset '{name}'; choose from {choices}")
    return ExperimentConfig(test_function=PRESETS[key])


def with_overrides(cfg: ExperimentConfig, **changes: object) -> ExperimentConfig:
    changes = {key: value for key, value in changes.items() if value is not None}
    return replace(cfg, **changes) if changes else cfg


def threads_from_env(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return default if default is not None else min(8, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def load_config(path: Path) -> ExperimentConfig:
    if not path.exists():
        raise ConfigError(f"Config file was not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("Config file must contain a JSON object")
    return ExperimentConfig.from_dict(raw)


def save_config(path: Path, cfg: ExperimentConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")


def write_default_config(path: Path, overwrite: bool = False) -> None:
    if path.exists() and not overwrite:
        if path.stat().st_size > 0:
            return
    save_config(path, ExperimentConfig())
