"""Canonical drive-log data model, CSV ingestion and signal extraction.

A drive log is one repetition's time-indexed channel set:

    t,s_dist,v_lon,a_lon,a_lat,target_in_lane,target_detected

All values are SI.  An empty cell means "absent" (stored as NaN), which is
only meaningful for ``s_dist`` before a threat is tracked.  Booleans are
0/1.  A sidecar JSON document carries the repetition metadata
(``repetition_id, scenario_id, source, annotation_t, collision_flag``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyLog,
    LogInvariantViolation,
    NonMonotonicTime,
    ParseError,
    SchemaMismatch,
    SignalAllAbsent,
)
from .scenarios import ScenarioClass

CSV_HEADER = "t,s_dist,v_lon,a_lon,a_lat,target_in_lane,target_detected"
_COLUMNS = CSV_HEADER.split(",")

JITTER_TOLERANCE = 0.2  # allowed sample-period deviation from the median


class LogSource(str, Enum):
    TRACK = "Track"
    SIMULATION = "Simulation"


class Signal(str, Enum):
    S_DIST = "s_dist"
    V_LON = "v_lon"
    A_LON = "a_lon"
    A_LAT = "a_lat"


@dataclass(eq=False)
class DriveLog:
    """One repetition's channels plus its annotation mark."""

    repetition_id: str
    scenario_id: str
    source: LogSource
    annotation_t: float
    t: np.ndarray
    s_dist: np.ndarray          # NaN where no threat is tracked
    v_lon: np.ndarray
    a_lon: np.ndarray
    a_lat: np.ndarray
    target_in_lane: np.ndarray  # bool
    target_detected: np.ndarray  # bool
    collision_flag: bool = False

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        for name in ("s_dist", "v_lon", "a_lon", "a_lat"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("target_in_lane", "target_detected"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=bool))

    def validate(self) -> None:
        n = self.t.size
        if n == 0:
            raise EmptyLog(f"{self.repetition_id}: no samples")
        for name in _COLUMNS[1:]:
            if getattr(self, name).size != n:
                raise SchemaMismatch(f"{self.repetition_id}: channel {name} length mismatch")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            row = int(np.argmax(dt <= 0)) + 1
            raise NonMonotonicTime(f"{self.repetition_id}: row {row + 1} not after row {row}")
        if n >= 3:
            med = float(np.median(dt))
            if np.any(np.abs(dt - med) > JITTER_TOLERANCE * med):
                raise LogInvariantViolation(
                    f"{self.repetition_id}: sample period jitter exceeds "
                    f"{JITTER_TOLERANCE:.0%} of the median period"
                )
        if not (self.t[0] <= self.annotation_t <= self.t[-1]):
            raise LogInvariantViolation(
                f"{self.repetition_id}: annotation_t {self.annotation_t} outside log span"
            )

    def signal_values(self, signal: Signal) -> np.ndarray:
        return getattr(self, signal.value)

    def meta_dict(self) -> dict:
        return {
            "repetition_id": self.repetition_id,
            "scenario_id": self.scenario_id,
            "source": self.source.value,
            "annotation_t": self.annotation_t,
            "collision_flag": self.collision_flag,
        }


@dataclass(eq=False)
class SignalSeries:
    name: Signal
    t: np.ndarray
    values: np.ndarray


@dataclass(eq=False)
class RepetitionSet:
    """All recordings of one scenario: track repetitions plus an optional
    simulation log."""

    scenario_id: str
    scenario_class: ScenarioClass
    track_logs: list[DriveLog]
    simulation: DriveLog | None = None

    def __post_init__(self) -> None:
        if not self.track_logs:
            raise EmptyLog(f"{self.scenario_id}: repetition set needs >= 1 track log")

    def all_logs(self) -> list[DriveLog]:
        logs = list(self.track_logs)
        if self.simulation is not None:
            logs.append(self.simulation)
        return logs


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def emit_drive_log(log: DriveLog) -> str:
    """Render a log as canonical CSV text (exact float round-trip)."""
    log.validate()
    lines = [CSV_HEADER]
    for i in range(log.t.size):
        lines.append(
            ",".join(
                (
                    repr(float(log.t[i])),
                    _fmt(float(log.s_dist[i])),
                    repr(float(log.v_lon[i])),
                    repr(float(log.a_lon[i])),
                    repr(float(log.a_lat[i])),
                    "1" if log.target_in_lane[i] else "0",
                    "1" if log.target_detected[i] else "0",
                )
            )
        )
    return "\n".join(lines) + "\n"


def _parse_bool(cell: str, line: int, column: str) -> bool:
    if cell == "0":
        return False
    if cell == "1":
        return True
    raise ParseError(f"column {column}: expected 0/1, got {cell!r}", line=line)


def ingest_drive_log(document: str, meta: dict) -> DriveLog:
    """Parse canonical CSV text plus sidecar metadata into a validated log."""
    lines = [ln for ln in document.splitlines() if ln.strip()]
    if not lines:
        raise EmptyLog("document is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header != _COLUMNS:
        missing = [c for c in _COLUMNS if c not in header]
        raise SchemaMismatch(
            f"header {lines[0]!r} does not match {CSV_HEADER!r}"
            + (f" (missing {missing})" if missing else "")
        )
    if len(lines) == 1:
        raise EmptyLog("no data rows")

    columns: dict[str, list] = {c: [] for c in _COLUMNS}
    for idx, raw in enumerate(lines[1:], start=2):
        cells = raw.split(",")
        if len(cells) != len(_COLUMNS):
            raise ParseError(f"expected {len(_COLUMNS)} cells, got {len(cells)}", line=idx)
        for col, cell in zip(_COLUMNS, cells):
            cell = cell.strip()
            if col == "s_dist":
                columns[col].append(math.nan if cell == "" else float(cell))
            elif col in ("target_in_lane", "target_detected"):
                columns[col].append(_parse_bool(cell, idx, col))
            else:
                if cell == "":
                    raise ParseError(f"column {col} may not be empty", line=idx)
                try:
                    columns[col].append(float(cell))
                except ValueError as exc:
                    raise ParseError(f"column {col}: bad decimal {cell!r}", line=idx) from exc

    t = np.asarray(columns["t"])
    dt = np.diff(t)
    if np.any(dt <= 0):
        row = int(np.argmax(dt <= 0)) + 2  # 1-based data row after the offender
        raise NonMonotonicTime(f"row {row + 1} (t={t[row - 1]}) not after row {row}")

    try:
        log = DriveLog(
            repetition_id=str(meta["repetition_id"]),
            scenario_id=str(meta.get("scenario_id", "")),
            source=LogSource(meta.get("source", "Track")),
            annotation_t=float(meta["annotation_t"]),
            t=t,
            s_dist=np.asarray(columns["s_dist"]),
            v_lon=np.asarray(columns["v_lon"]),
            a_lon=np.asarray(columns["a_lon"]),
            a_lat=np.asarray(columns["a_lat"]),
            target_in_lane=np.asarray(columns["target_in_lane"]),
            target_detected=np.asarray(columns["target_detected"]),
            collision_flag=bool(meta.get("collision_flag", False)),
        )
    except KeyError as exc:
        raise SchemaMismatch(f"sidecar metadata missing field {exc}") from exc
    log.validate()
    return log


def save_drive_log(log: DriveLog, csv_path: Path) -> None:
    csv_path = Path(csv_path)
    csv_path.write_text(emit_drive_log(log), encoding="utf-8")
    meta_path = csv_path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(log.meta_dict(), indent=2) + "\n", encoding="utf-8")


def load_drive_log(csv_path: Path) -> DriveLog:
    csv_path = Path(csv_path)
    meta_path = csv_path.with_suffix(".meta.json")
    if not meta_path.exists():
        raise SchemaMismatch(f"missing sidecar metadata {meta_path.name}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    return ingest_drive_log(csv_path.read_text(encoding="utf-8"), meta)


def extract_signal(log: DriveLog, name: Signal | str) -> SignalSeries:
    """Series of the present samples of one signal, in log order.

    Never fabricates values: every (t, v) pair exists verbatim in the log.
    """
    signal = Signal(name)
    values = log.signal_values(signal)
    mask = ~np.isnan(values)
    if not mask.any():
        raise SignalAllAbsent(f"{log.repetition_id}: {signal.value} has no present samples")
    return SignalSeries(signal, log.t[mask].copy(), values[mask].copy())
