from __future__ import annotations

import json
import logging
import os
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

import fcntl

logger = logging.getLogger(__name__)

MAX_RUN_LOG_BYTES = 2 * 1024 * 1024
ROTATED_RUN_LOGS = 3

RUN_START = "run_start"
CELL = "cell"
RUN_END = "run_end"
FIT = "fit"


class RunLogError(Exception):
    pass


def iso_utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


@contextmanager
def _run_log_lock(lock_path: Path) -> Iterator[None]:
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    fd = os.open(lock_path, os.O_CREAT | os.O_RDWR, 0o600)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def rotated_paths(path: Path) -> list[Path]:
    older = [path.with_name(f"{path.name}.{idx}") for idx in range(ROTATED_RUN_LOGS, 0, -1)]
    return [p for p in [*older, path] if p.exists()]


def _rotate_if_needed(path: Path) -> None:
    if not path.exists() or path.stat().st_size < MAX_RUN_LOG_BYTES:
        return
    oldest = path.with_name(f"{path.name}.{ROTATED_RUN_LOGS}")
    if oldest.exists():
        oldest.unlink()
    for idx in range(ROTATED_RUN_LOGS - 1, 0, -1):
        src = path.with_name(f"{path.name}.{idx}")
        if src.exists():
            src.replace(path.with_name(f"{path.name}.{idx + 1}"))
    path.replace(path.with_name(f"{path.name}.1"))


def _append(path: Path, record: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    line = (json.dumps(record, ensure_ascii=True, default=str) + "\n").encode("utf-8")
    with _run_log_lock(path.with_name(f"{path.name}.lock")):
        _rotate_if_needed(path)
        fd = os.open(path, os.O_APPEND | os.O_CREAT | os.O_WRONLY, 0o644)
        try:
            os.write(fd, line)
        finally:
            os.close(fd)


@dataclass(frozen=True)
class RunLog:
    """Records of one experiment run or fit; cells are flushed as they finish."""

    path: Path
    run_id: str = field(default_factory=new_run_id)

    def _write(self, event: str, payload: dict[str, Any]) -> None:
        _append(self.path, {"ts": iso_utc_now(), "event": event, "run": self.run_id, **payload})

    def start(self, config: dict[str, Any], seed: int, cells: int) -> None:
        self._write(RUN_START, {"config": config, "seed": seed, "cells": cells})

    def cell(self, index: int, cell: dict[str, Any]) -> None:
        self._write(CELL, {"index": index, "cell": cell})

    def finish(self, cells: int, wall_clock: float) -> None:
        self._write(RUN_END, {"cells": cells, "wall_clock": wall_clock})

    def fit(self, record: dict[str, Any]) -> None:
        self._write(FIT, record)


def read_records(path: Path) -> list[dict[str, Any]]:
    records: list[dict[str, Any]] = []
    for source in rotated_paths(path):
        for lineno, line in enumerate(source.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                # a run killed mid-write leaves a truncated last line
                logger.warning("skipping unreadable run-log line %s:%d", source.name, lineno)
                continue
            if isinstance(record, dict):
                records.append(record)
    return records


@dataclass(frozen=True)
class RecordedRun:
    run_id: str
    config: dict[str, Any]
    seed: int
    expected_cells: int
    cells: tuple[dict[str, Any], ...]
    finished: bool


def recorded_run(path: Path, run_id: str | None = None) -> RecordedRun:
    """The most recently started run unless `run_id` is given."""
    if not path.exists():
        raise RunLogError(f"Run log was not found: {path}")
    records = read_records(path)
    starts = [r for r in records if r.get("event") == RUN_START]
    if run_id is not None:
        starts = [r for r in starts if r.get("run") == run_id]
    if not starts:
        target = f"run '{run_id}'" if run_id is not None else "any experiment run"
        raise RunLogError(f"Run log {path} has no start record for {target}")
    start = starts[-1]
    run_id = str(start["run"])
    by_index: dict[int, dict[str, Any]] = {}
    finished = False
    for record in records:
        if record.get("run") != run_id:
            continue
        if record.get("event") == CELL:
            by_index[int(record["index"])] = record["cell"]
        elif record.get("event") == RUN_END:
            finished = True
    try:
        return RecordedRun(
            run_id=run_id,
            config=dict(start["config"]),
            seed=int(start["seed"]),
            expected_cells=int(start["cells"]),
            cells=tuple(by_index[idx] for idx in sorted(by_index)),
            finished=finished,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RunLogError(f"malformed start record for run '{run_id}': {exc}") from exc
