"""Synchronization of repeated recordings and scenario parameter tuning.

Every repetition of a scenario responds to the target at a slightly
different distance.  The response distance of a repetition is the threat
distance at its class-specific event:

* stationary target - the target enters the sensor's field of view
  (first ``target_detected`` sample),
* cut-in - the cutting vehicle enters the ego lane
  (first ``target_in_lane`` sample),
* cut-out - the occluded secondary vehicle becomes detected
  (first ``target_detected`` sample).

From the response distances an anchor distance is derived and each
repetition is shifted in time so that its crossing of the anchor maps to
t = 0.  Before the response event the distance to the scenario target is
not directly logged, so it is reconstructed backwards from the event by
integrating velocity (ego velocity for stationary objects, the early
measured closing rate for a cut-in).  All repetitions are then resampled
onto a common uniform grid and averaged pointwise into a mean repetition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .drive_logs import DriveLog, RepetitionSet, Signal
from .errors import (
    DegenerateRange,
    EmptyOverlap,
    EventNotFound,
    InconsistentScenario,
    NoCrossing,
)
from .geometry import ms_to_kmh
from .scenarios import ScenarioClass, ScenarioSpec
from .sensors import SensorConfig

DEFAULT_GRID_PERIOD = 0.02

# Refinements smaller than representation noise are treated as no-ops so a
# tuned parameter that already matches the data stays bit-identical.
_NOOP_RTOL = 1e-9

# Window for estimating the closing rate right after a cut-in enters the lane.
_RATE_WINDOW = 1.0


class SyncFormula(str, Enum):
    EQ1_LITERAL = "Eq1Literal"   # (S_at - S_min) / 2
    MIDPOINT = "Midpoint"        # (S_at + S_min) / 2


@dataclass(frozen=True)
class RepetitionSync:
    """Per-repetition synchronization quantities."""

    response_distance: float      # S_d
    response_t: float             # event timestamp in the log's own time
    annotation_distance: float    # reconstructed threat distance at annotation
    v_at_annotation: float
    anchor_crossing_t: float
    offset: float                 # shift that maps the crossing to t = 0


@dataclass(frozen=True)
class SyncSolution:
    scenario_id: str
    scenario_class: ScenarioClass
    formula: SyncFormula
    s_min: float
    t_min: float
    s_at: float
    s_sync: float
    per_rep: dict[str, RepetitionSync] = field(default_factory=dict)
    simulation: RepetitionSync | None = None

    def to_json(self) -> str:
        def entry(r: RepetitionSync) -> dict:
            return {
                "S_d": r.response_distance,
                "response_t": r.response_t,
                "annotation_distance": r.annotation_distance,
                "v_at_annotation": r.v_at_annotation,
                "anchor_crossing_t": r.anchor_crossing_t,
                "offset": r.offset,
            }

        doc = {
            "scenario_id": self.scenario_id,
            "scenario_class": self.scenario_class.value,
            "formula": self.formula.value,
            "S_min": self.s_min,
            "t_min": self.t_min,
            "S_at": self.s_at,
            "S_sync": self.s_sync,
            "repetitions": {rid: entry(r) for rid, r in sorted(self.per_rep.items())},
            "simulation": None if self.simulation is None else entry(self.simulation),
        }
        return json.dumps(doc, indent=2)


@dataclass(eq=False)
class AlignedRepetitionSet:
    """Repetitions and simulation resampled onto one uniform time grid.

    Arrays hold NaN where a signal is absent or outside a log's domain;
    the mean repetition averages the contributing track repetitions at
    each grid point.
    """

    scenario_id: str
    grid: np.ndarray
    repetitions: dict[str, dict[Signal, np.ndarray]]
    mean_rep: dict[Signal, np.ndarray]
    simulation: dict[Signal, np.ndarray] | None = None


def _event_index(log: DriveLog, scenario_class: ScenarioClass) -> int:
    if scenario_class is ScenarioClass.CUT_IN:
        flags = log.target_in_lane
        what = "target_in_lane"
    else:
        flags = log.target_detected
        what = "target_detected"
    hits = np.flatnonzero(flags)
    if hits.size == 0:
        raise EventNotFound(f"{log.repetition_id}: {what} never set")
    idx = int(hits[0])
    if math.isnan(log.s_dist[idx]):
        raise EventNotFound(
            f"{log.repetition_id}: s_dist absent at the {what} event (t={log.t[idx]})"
        )
    return idx


def response_event(log: DriveLog, scenario_class: ScenarioClass) -> tuple[float, float]:
    """(S_d, event time) for one repetition."""
    idx = _event_index(log, scenario_class)
    return float(log.s_dist[idx]), float(log.t[idx])


def response_distance(log: DriveLog, scenario_class: ScenarioClass) -> float:
    """Threat distance at the repetition's class-specific response event."""
    return response_event(log, scenario_class)[0]


def _closing_rate_after(log: DriveLog, idx: int) -> float:
    """Least-squares closing rate of s_dist over a short window after idx."""
    t0 = log.t[idx]
    mask = (log.t >= t0) & (log.t <= t0 + _RATE_WINDOW) & ~np.isnan(log.s_dist)
    ts, ds = log.t[mask], log.s_dist[mask]
    if ts.size < 2:
        return 0.0
    slope = float(np.polyfit(ts, ds, 1)[0])
    return max(-slope, 0.0)


def sync_distance_series(
    log: DriveLog, scenario_class: ScenarioClass
) -> tuple[np.ndarray, np.ndarray]:
    """Distance to the scenario target over [annotation, end of log].

    From the response event onward the logged threat distance is used
    directly.  Before the event the series is reconstructed backwards from
    (event time, S_d): for stationary objects by the trapezoidal integral
    of ego velocity, for a cut-in by the closing rate measured right after
    lane entry.
    """
    idx = _event_index(log, scenario_class)
    s_d = float(log.s_dist[idx])
    t_event = float(log.t[idx])
    ann = log.annotation_t

    after = (log.t >= t_event) & ~np.isnan(log.s_dist)
    t_after = log.t[after]
    d_after = log.s_dist[after]

    before = (log.t >= ann) & (log.t < t_event)
    t_before = log.t[before]
    if t_before.size == 0 or t_before[0] > ann:
        t_before = np.concatenate(([ann], t_before))
    if scenario_class is ScenarioClass.CUT_IN:
        rate = _closing_rate_after(log, idx)
        d_before = s_d + rate * (t_event - t_before)
    else:
        # Stationary object: the closing speed is the ego speed itself.
        t_seg = np.concatenate((t_before, [t_event]))
        v_seg = np.interp(t_seg, log.t, log.v_lon)
        cum = np.concatenate(([0.0], np.cumsum(np.diff(t_seg) * (v_seg[:-1] + v_seg[1:]) / 2.0)))
        d_before = s_d + (cum[-1] - cum[:-1])

    return np.concatenate((t_before, t_after)), np.concatenate((d_before, d_after))


def annotation_distance(log: DriveLog, scenario_class: ScenarioClass) -> float:
    t, d = sync_distance_series(log, scenario_class)
    return float(np.interp(log.annotation_t, t, d))


def _anchor_crossing(t: np.ndarray, d: np.ndarray, s_sync: float, t_event: float) -> float:
    """Time at which the distance series crosses the anchor, by linear
    interpolation of the bracketing samples.

    Prefers the last downward crossing at or before the response event
    (guarding against early transients); falls back to the first crossing
    after it.
    """
    down = np.flatnonzero((d[:-1] > s_sync) & (d[1:] <= s_sync))
    if down.size == 0:
        raise NoCrossing(f"series never crosses S_sync={s_sync:.3f}")

    def interp(i: int) -> float:
        if d[i + 1] == d[i]:
            return float(t[i + 1])
        frac = (d[i] - s_sync) / (d[i] - d[i + 1])
        return float(t[i] + frac * (t[i + 1] - t[i]))

    crossing_times = [interp(int(i)) for i in down]
    before = [ct for ct in crossing_times if ct <= t_event + 1e-12]
    if before:
        return before[-1]
    return crossing_times[0]


def _rep_sync(
    log: DriveLog, scenario_class: ScenarioClass, s_sync: float | None
) -> RepetitionSync:
    s_d, t_event = response_event(log, scenario_class)
    t, d = sync_distance_series(log, scenario_class)
    ann_dist = float(np.interp(log.annotation_t, t, d))
    v_ann = float(np.interp(log.annotation_t, log.t, log.v_lon))
    if s_sync is None:
        crossing = math.nan
        offset = math.nan
    else:
        crossing = _anchor_crossing(t, d, s_sync, t_event)
        offset = -crossing
    return RepetitionSync(s_d, t_event, ann_dist, v_ann, crossing, offset)


def anchor_distance(s_at: float, s_min: float, formula: SyncFormula) -> float:
    """Anchor from the annotation-time and minimum response distances."""
    if formula is SyncFormula.EQ1_LITERAL:
        return (s_at - s_min) / 2.0
    return (s_at + s_min) / 2.0


def solve_sync(
    rep_set: RepetitionSet, formula: SyncFormula = SyncFormula.MIDPOINT
) -> SyncSolution:
    """Anchor quantities and per-repetition offsets for one scenario.

    S_min is the smallest response distance across track repetitions and
    t_min its timestamp; S_at is the smallest reconstructed threat distance
    at annotation time.  The anchor is (S_at - S_min)/2 in literal mode and
    the interval midpoint (S_at + S_min)/2 otherwise.
    """
    ids = {log.scenario_id for log in rep_set.all_logs() if log.scenario_id}
    if len(ids) > 1:
        raise InconsistentScenario(f"mixed scenario ids in one set: {sorted(ids)}")

    cls = rep_set.scenario_class
    events = {log.repetition_id: response_event(log, cls) for log in rep_set.track_logs}
    s_min = min(sd for sd, _ in events.values())
    # Deterministic under permutation: ties broken by repetition id.
    min_rep = sorted(rid for rid, (sd, _) in events.items() if sd == s_min)[0]
    t_min = events[min_rep][1]
    s_at = min(annotation_distance(log, cls) for log in rep_set.track_logs)
    if s_at <= s_min:
        raise DegenerateRange(f"S_at={s_at:.3f} <= S_min={s_min:.3f}")

    s_sync = anchor_distance(s_at, s_min, formula)

    per_rep: dict[str, RepetitionSync] = {}
    for log in rep_set.track_logs:
        try:
            per_rep[log.repetition_id] = _rep_sync(log, cls, s_sync)
        except NoCrossing as exc:
            raise NoCrossing(f"{log.repetition_id}: {exc}") from exc

    simulation = None
    if rep_set.simulation is not None:
        simulation = _rep_sync(rep_set.simulation, cls, s_sync)

    return SyncSolution(
        scenario_id=rep_set.scenario_id,
        scenario_class=cls,
        formula=formula,
        s_min=s_min,
        t_min=t_min,
        s_at=s_at,
        s_sync=s_sync,
        per_rep=per_rep,
        simulation=simulation,
    )


def attach_simulation(sol: SyncSolution, rep_set: RepetitionSet) -> SyncSolution:
    """Add the simulation's offset to an existing solution, reusing its
    anchor (the simulation never influences S_min/S_at)."""
    if rep_set.simulation is None:
        return sol
    sim_sync = _rep_sync(rep_set.simulation, rep_set.scenario_class, sol.s_sync)
    return replace(sol, simulation=sim_sync)


def _resample(log: DriveLog, offset: float, grid: np.ndarray) -> dict[Signal, np.ndarray]:
    out: dict[Signal, np.ndarray] = {}
    for signal in Signal:
        values = log.signal_values(signal)
        mask = ~np.isnan(values)
        ts = log.t[mask] + offset
        if ts.size == 0:
            out[signal] = np.full(grid.size, np.nan)
            continue
        resampled = np.interp(grid, ts, values[mask])
        resampled[(grid < ts[0]) | (grid > ts[-1])] = np.nan
        out[signal] = resampled
    return out


def align(
    rep_set: RepetitionSet,
    sol: SyncSolution,
    grid_period: float = DEFAULT_GRID_PERIOD,
) -> AlignedRepetitionSet:
    """Shift every log so its anchor crossing maps to t = 0 and resample all
    signals onto a shared uniform grid (the intersection of the shifted
    annotation-to-end windows)."""
    cls = rep_set.scenario_class
    entries: list[tuple[str, DriveLog, RepetitionSync]] = []
    for log in rep_set.track_logs:
        sync = sol.per_rep.get(log.repetition_id)
        if sync is None or math.isnan(sync.offset):
            sync = _rep_sync(log, cls, sol.s_sync)
        entries.append((log.repetition_id, log, sync))
    if rep_set.simulation is not None:
        sync = sol.simulation
        if sync is None or math.isnan(sync.offset):
            sync = _rep_sync(rep_set.simulation, cls, sol.s_sync)
        entries.append(("__sim__", rep_set.simulation, sync))

    start = max(max(log.annotation_t, float(log.t[0])) + sync.offset for _, log, sync in entries)
    end = min(float(log.t[-1]) + sync.offset for _, log, sync in entries)
    i0 = math.ceil(start / grid_period - 1e-9)
    i1 = math.floor(end / grid_period + 1e-9)
    if i1 < i0:
        raise EmptyOverlap(f"shifted domains do not intersect: [{start:.3f}, {end:.3f}]")
    grid = np.arange(i0, i1 + 1) * grid_period

    repetitions: dict[str, dict[Signal, np.ndarray]] = {}
    simulation: dict[Signal, np.ndarray] | None = None
    for key, log, sync in entries:
        resampled = _resample(log, sync.offset, grid)
        if key == "__sim__":
            simulation = resampled
        else:
            repetitions[key] = resampled

    mean_rep: dict[Signal, np.ndarray] = {}
    for signal in Signal:
        stack = np.vstack([repetitions[rid][signal] for rid in sorted(repetitions)])
        counts = np.sum(~np.isnan(stack), axis=0)
        sums = np.nansum(np.where(np.isnan(stack), 0.0, stack), axis=0)
        mean = np.full(grid.size, np.nan)
        nonzero = counts > 0
        mean[nonzero] = sums[nonzero] / counts[nonzero]
        mean_rep[signal] = mean

    return AlignedRepetitionSet(
        scenario_id=rep_set.scenario_id,
        grid=grid,
        repetitions=repetitions,
        mean_rep=mean_rep,
        simulation=simulation,
    )


@dataclass(frozen=True)
class TuningResult:
    """Refined scenario parameters derived from the synchronized data."""

    spec: ScenarioSpec
    sensor: SensorConfig
    set_speed: float                      # m/s, exact tuned value
    initial_speeds: dict[str, float] = field(default_factory=dict)
    response_distances: dict[str, float] = field(default_factory=dict)


def tune_scenario(
    spec: ScenarioSpec,
    aligned: AlignedRepetitionSet,
    sol: SyncSolution,
    sensor: SensorConfig | None = None,
) -> TuningResult:
    """Refine the scenario set speed (mean initial speed across repetitions)
    and, for scenario classes whose response is a pure detection event
    (stationary target, cut-out), the sensor's maximum range (mean response
    distance).  A refinement within float noise of the current value is a
    no-op, keeping already-consistent parameters bit-identical."""
    if not sol.per_rep:
        raise EventNotFound("no repetitions to tune from")
    sensor = sensor if sensor is not None else SensorConfig()

    initial_speeds = {rid: r.v_at_annotation for rid, r in sorted(sol.per_rep.items())}
    mean_speed = float(np.mean(list(initial_speeds.values())))
    current_speed = spec.ads_init_speed / 3.6
    if math.isclose(mean_speed, current_speed, rel_tol=_NOOP_RTOL, abs_tol=1e-12):
        set_speed = current_speed
        refined_spec = spec
    else:
        set_speed = mean_speed
        refined_spec = replace(spec, ads_init_speed=ms_to_kmh(mean_speed))

    response_distances = {rid: r.response_distance for rid, r in sorted(sol.per_rep.items())}
    refined_sensor = sensor
    if spec.scenario_class is not ScenarioClass.CUT_IN:
        mean_range = float(np.mean(list(response_distances.values())))
        if not math.isclose(mean_range, sensor.max_range, rel_tol=_NOOP_RTOL, abs_tol=1e-12):
            refined_sensor = replace(sensor, max_range=mean_range)

    return TuningResult(refined_spec, refined_sensor, set_speed, initial_speeds, response_distances)
