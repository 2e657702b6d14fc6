"""Parameterized driving scenarios and target reference trajectories.

Three scenario classes are supported: an ego vehicle approaching a
stationary target, a slower vehicle cutting into the ego lane and braking,
and a lead vehicle cutting out of the ego lane to expose a stationary
secondary target.  Generation produces timed x/y reference trajectories for
the target actors; the ego vehicle itself is represented only by its initial
state, since it is driven closed-loop by the simulator.

Target trajectories can be exported to / imported from a line-oriented text
document (``.pmc``) whose header carries the bumper-to-bumper distance that
triggers the target maneuver.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (
    NonMonotonicTime,
    ParseError,
    SpecInvariantViolation,
    TooFewSamples,
    UnreachableTrigger,
)
from .geometry import (
    VEHICLE_LENGTH,
    LaneFrame,
    kmh_to_ms,
    quintic_step,
)

DEFAULT_SAMPLE_PERIOD = 0.02   # 50 Hz reference trajectories
DEFAULT_LANE_WIDTH = 3.5

# Nominal-ego staging defaults used to place actors before the trigger fires.
LEAD_IN_TIME = 5.0             # settle time before the trigger gap is reached
POST_EVENT_TIME = 15.0         # horizon margin after the scenario event
STATIONARY_START_GAP = 200.0   # initial bumper gap for stationary targets
SECONDARY_GAP_AHEAD = 40.0     # secondary target placed ahead of the lead

_MAX_SAMPLE_SPEED = 100.0      # m/s, sanity bound on consecutive samples
_CLOSING_EPS = 1e-9


class ScenarioClass(str, Enum):
    STATIONARY_TARGET = "StationaryTarget"
    CUT_IN = "CutIn"
    CUT_OUT = "CutOut"


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameter vector describing one scenario.

    Speeds are km/h; the trigger distance is bumper-to-bumper along the lane
    centerline.  Optional fields are required or forbidden depending on the
    scenario class, see :meth:`validate`.
    """

    scenario_class: ScenarioClass
    ads_init_speed: float
    target_init_speed: float
    curvature: float = 0.0
    lane_width: float = DEFAULT_LANE_WIDTH
    target_decel: float | None = None
    trigger_distance: float | None = None
    event_duration: float | None = None
    scenario_id: str = ""

    def validate(self) -> None:
        if self.ads_init_speed < 0 or self.target_init_speed < 0:
            raise SpecInvariantViolation("speeds must be >= 0")
        if self.curvature < 0:
            raise SpecInvariantViolation("curvature must be >= 0")
        if self.lane_width <= 0:
            raise SpecInvariantViolation("lane_width must be > 0")
        if self.trigger_distance is not None and self.trigger_distance <= 0:
            raise SpecInvariantViolation("trigger_distance must be > 0 when present")
        if self.event_duration is not None and self.event_duration <= 0:
            raise SpecInvariantViolation("event_duration must be > 0 when present")
        cls = self.scenario_class
        if cls is ScenarioClass.STATIONARY_TARGET:
            if self.target_init_speed != 0:
                raise SpecInvariantViolation("stationary target must have zero speed")
            if self.trigger_distance is not None or self.event_duration is not None:
                raise SpecInvariantViolation("stationary target takes no trigger/duration")
        elif cls is ScenarioClass.CUT_IN:
            if self.trigger_distance is None or self.event_duration is None or self.target_decel is None:
                raise SpecInvariantViolation("cut-in requires trigger, duration and decel")
        elif cls is ScenarioClass.CUT_OUT:
            if self.trigger_distance is None or self.event_duration is None:
                raise SpecInvariantViolation("cut-out requires trigger and duration")

    def to_json(self) -> str:
        doc = {
            "scenario_class": self.scenario_class.value,
            "ads_init_speed": self.ads_init_speed,
            "target_init_speed": self.target_init_speed,
            "curvature": self.curvature,
            "lane_width": self.lane_width,
            "target_decel": self.target_decel,
            "trigger_distance": self.trigger_distance,
            "event_duration": self.event_duration,
            "scenario_id": self.scenario_id,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        doc = json.loads(text)
        try:
            spec = cls(
                scenario_class=ScenarioClass(doc["scenario_class"]),
                ads_init_speed=float(doc["ads_init_speed"]),
                target_init_speed=float(doc["target_init_speed"]),
                curvature=float(doc.get("curvature", 0.0)),
                lane_width=float(doc.get("lane_width", DEFAULT_LANE_WIDTH)),
                target_decel=None if doc.get("target_decel") is None else float(doc["target_decel"]),
                trigger_distance=None if doc.get("trigger_distance") is None else float(doc["trigger_distance"]),
                event_duration=None if doc.get("event_duration") is None else float(doc["event_duration"]),
                scenario_id=str(doc.get("scenario_id", "")),
            )
        except (KeyError, ValueError) as exc:
            raise SpecInvariantViolation(f"bad scenario document: {exc}") from exc
        spec.validate()
        return spec


@dataclass(frozen=True)
class RoadSpec:
    """Constant-curvature road with equally wide concentric lanes."""

    curvature: float
    lane_width: float
    num_lanes: int
    length: float

    def validate(self) -> None:
        if self.length <= 0:
            raise SpecInvariantViolation("road length must be > 0")
        if self.lane_width <= 0 or self.curvature < 0 or self.num_lanes < 1:
            raise SpecInvariantViolation("bad road geometry")

    def frame(self) -> LaneFrame:
        return LaneFrame(self.curvature)


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    x: float
    y: float


@dataclass(frozen=True)
class TargetTrajectory:
    """Timed x/y reference path for one target actor."""

    actor_id: str
    samples: tuple[TrajectorySample, ...]
    trigger_bumper_distance: float | None = None

    def validate(self) -> None:
        if len(self.samples) < 2:
            raise TooFewSamples(f"{self.actor_id}: need >= 2 samples")
        prev = self.samples[0]
        for s in self.samples[1:]:
            if s.t <= prev.t:
                raise NonMonotonicTime(f"{self.actor_id}: t {s.t} after {prev.t}")
            step = math.hypot(s.x - prev.x, s.y - prev.y)
            if step > _MAX_SAMPLE_SPEED * (s.t - prev.t):
                raise SpecInvariantViolation(
                    f"{self.actor_id}: implied speed exceeds {_MAX_SAMPLE_SPEED} m/s"
                )
            prev = s

    def duration(self) -> float:
        return self.samples[-1].t - self.samples[0].t


@dataclass(frozen=True)
class EgoInit:
    """Initial ego state in lane coordinates (speed in m/s)."""

    station: float
    lateral: float
    speed: float


@dataclass(frozen=True)
class StaticPose:
    station: float
    lateral: float


@dataclass(frozen=True)
class ScenarioArtifacts:
    spec: ScenarioSpec
    road: RoadSpec
    ego_init: EgoInit
    targets: tuple[TargetTrajectory, ...] = field(default_factory=tuple)
    secondary_target: StaticPose | None = None


def _sample_times(horizon: float, dt: float) -> list[float]:
    n = int(math.floor(horizon / dt + 1e-9)) + 1
    return [i * dt for i in range(n)]


def _station_after_decel(v0: float, a: float, tau: float) -> float:
    """Distance covered after tau seconds of constant deceleration a from v0."""
    if a <= 0:
        return v0 * tau
    t_stop = v0 / a
    if tau >= t_stop:
        return v0 * t_stop - 0.5 * a * t_stop * t_stop
    return v0 * tau - 0.5 * a * tau * tau


def _moving_target_samples(
    spec: ScenarioSpec,
    times: list[float],
    t_maneuver: float,
    lat_from: float,
    lat_to: float,
    start_station: float,
    decel_after_maneuver: bool,
) -> list[TrajectorySample]:
    """Build samples for a target that may change lane and later brake.

    The commanded speed acts along the target's own (possibly curved) path;
    on a curved road the angular coordinate is advanced with a per-interval
    Simpson rule so the along-arc speed tracks the command to well under 1%.
    """
    v0 = kmh_to_ms(spec.target_init_speed)
    duration = spec.event_duration or 0.0
    decel = spec.target_decel or 0.0
    t_decel = t_maneuver + duration if decel_after_maneuver else math.inf
    frame = LaneFrame(spec.curvature)
    k = spec.curvature

    def lat(t: float) -> float:
        if duration <= 0:
            return lat_from
        return lat_from + (lat_to - lat_from) * quintic_step((t - t_maneuver) / duration)

    def speed(t: float) -> float:
        if t <= t_decel:
            return v0
        return max(0.0, v0 - decel * (t - t_decel))

    samples: list[TrajectorySample] = []
    if k == 0.0:
        # Closed-form longitudinal advance: constant speed, then constant decel.
        for t in times:
            if t <= t_decel:
                s = start_station + v0 * t
            else:
                s = start_station + v0 * t_decel + _station_after_decel(v0, decel, t - t_decel)
            x, y = frame.to_world(s, lat(t))
            samples.append(TrajectorySample(t, x, y))
        return samples

    r = 1.0 / k
    phi = start_station * k
    prev_t = times[0]
    x, y = frame.to_world(frame.angle_to_station(phi), lat(prev_t))
    samples.append(TrajectorySample(prev_t, x, y))
    for t in times[1:]:
        h = t - prev_t
        tm = prev_t + 0.5 * h
        rate0 = speed(prev_t) / (r + lat(prev_t))
        rate_m = speed(tm) / (r + lat(tm))
        rate1 = speed(t) / (r + lat(t))
        phi += h * (rate0 + 4.0 * rate_m + rate1) / 6.0
        x, y = frame.to_world(frame.angle_to_station(phi), lat(t))
        samples.append(TrajectorySample(t, x, y))
        prev_t = t
    return samples


def _find_trigger_time(gap0: float, closing: float, trigger: float, times: list[float]) -> float:
    """First sample time at which the nominal bumper gap is <= trigger."""
    if gap0 <= trigger:
        return times[0]
    if closing <= _CLOSING_EPS:
        raise UnreachableTrigger(
            f"gap starts at {gap0:.1f} m with closing speed {closing:.3f} m/s; "
            f"trigger {trigger:.1f} m never reached"
        )
    for t in times:
        if gap0 - closing * t <= trigger:
            return t
    raise UnreachableTrigger("trigger gap not reached within the generation horizon")


def generate_scenario(
    spec: ScenarioSpec,
    sample_period: float = DEFAULT_SAMPLE_PERIOD,
    *,
    initial_gap: float | None = None,
    lead_in_time: float = LEAD_IN_TIME,
    post_event_time: float = POST_EVENT_TIME,
    stationary_start_gap: float = STATIONARY_START_GAP,
    secondary_gap_ahead: float = SECONDARY_GAP_AHEAD,
    horizon: float | None = None,
) -> ScenarioArtifacts:
    """Build road, ego initial state and target trajectories for a scenario.

    Actors are staged against a nominal constant-speed ego starting at
    station 0 so that the bumper-to-bumper trigger gap is reached after
    ``lead_in_time`` of steady driving.  When the nominal closing speed is
    zero (e.g. a cut-out with matched speeds) the actors are placed at the
    trigger gap and the maneuver starts immediately.
    """
    spec.validate()
    if not 0.0 < sample_period <= 0.5:
        raise SpecInvariantViolation("sample_period must be in (0, 0.5] s")

    v_ego = kmh_to_ms(spec.ads_init_speed)
    v_tgt = kmh_to_ms(spec.target_init_speed)
    cls = spec.scenario_class
    ego_init = EgoInit(station=0.0, lateral=0.0, speed=v_ego)

    if cls is ScenarioClass.STATIONARY_TARGET:
        gap0 = initial_gap if initial_gap is not None else stationary_start_gap
        hz = horizon if horizon is not None else (gap0 / max(v_ego, 0.1) + post_event_time)
        times = _sample_times(hz, sample_period)
        frame = LaneFrame(spec.curvature)
        x, y = frame.to_world(gap0 + VEHICLE_LENGTH, 0.0)
        samples = tuple(TrajectorySample(t, x, y) for t in times)
        target = TargetTrajectory("target", samples, trigger_bumper_distance=None)
        target.validate()
        road = RoadSpec(spec.curvature, spec.lane_width, 1, gap0 + VEHICLE_LENGTH + 50.0)
        return ScenarioArtifacts(spec, road, ego_init, (target,), None)

    trigger = spec.trigger_distance or 0.0
    duration = spec.event_duration or 0.0
    # Closing speed of the nominal ego measured along the ego centerline;
    # targets in an adjacent lane advance slower in projected station.
    if spec.curvature > 0.0:
        r = 1.0 / spec.curvature
        lane_radius = r + (spec.lane_width if cls is ScenarioClass.CUT_IN else 0.0)
        v_tgt_proj = v_tgt * r / lane_radius
    else:
        v_tgt_proj = v_tgt
    closing = v_ego - v_tgt_proj

    if initial_gap is not None:
        gap0 = initial_gap
        if gap0 > trigger and closing <= _CLOSING_EPS:
            raise UnreachableTrigger(
                f"explicit initial gap {gap0:.1f} m cannot close onto trigger {trigger:.1f} m"
            )
    elif closing > _CLOSING_EPS:
        gap0 = trigger + closing * lead_in_time
    else:
        gap0 = trigger

    if cls is ScenarioClass.CUT_IN:
        decel = spec.target_decel or 0.0
        stop_time = (v_tgt / decel) if decel > 0 else 0.0
        est_trigger_t = 0.0 if gap0 <= trigger else (gap0 - trigger) / max(closing, _CLOSING_EPS)
        hz = horizon if horizon is not None else est_trigger_t + duration + stop_time + post_event_time
        times = _sample_times(hz, sample_period)
        t_m = _find_trigger_time(gap0, closing, trigger, times)
        start_station = gap0 + VEHICLE_LENGTH
        samples = _moving_target_samples(
            spec, times, t_m,
            lat_from=spec.lane_width, lat_to=0.0,
            start_station=start_station, decel_after_maneuver=True,
        )
        target = TargetTrajectory("target", tuple(samples), trigger_bumper_distance=trigger)
        target.validate()
        road_len = max(v_ego, v_tgt) * hz + start_station + 100.0
        road = RoadSpec(spec.curvature, spec.lane_width, 2, road_len)
        return ScenarioArtifacts(spec, road, ego_init, (target,), None)

    # Cut-out: lead leaves the ego lane, exposing a stationary secondary.
    lead_start = gap0 + VEHICLE_LENGTH
    secondary_station = lead_start + secondary_gap_ahead + VEHICLE_LENGTH
    est_trigger_t = 0.0 if gap0 <= trigger else (gap0 - trigger) / max(closing, _CLOSING_EPS)
    reach_time = (secondary_station - VEHICLE_LENGTH) / max(v_ego, 0.1)
    hz = horizon if horizon is not None else max(est_trigger_t + duration, reach_time) + post_event_time
    times = _sample_times(hz, sample_period)
    t_m = _find_trigger_time(gap0, closing, trigger, times)
    samples = _moving_target_samples(
        spec, times, t_m,
        lat_from=0.0, lat_to=spec.lane_width,
        start_station=lead_start, decel_after_maneuver=False,
    )
    lead = TargetTrajectory("lead", tuple(samples), trigger_bumper_distance=trigger)
    lead.validate()
    road_len = max(v_ego, v_tgt) * hz + secondary_station + 100.0
    road = RoadSpec(spec.curvature, spec.lane_width, 2, road_len)
    secondary = StaticPose(station=secondary_station, lateral=0.0)
    return ScenarioArtifacts(spec, road, ego_init, (lead,), secondary)


# --- .pmc text format ------------------------------------------------------
#
# line 1: "#pmc v1"
# line 2: "trigger_bumper_distance=<decimal|none>"
# then one "t x y" sample per line, SI units.  Floats are written with up to
# 17 significant digits so the document round-trips exactly.

_PMC_MAGIC = "#pmc v1"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def export_pmc(traj: TargetTrajectory) -> str:
    traj.validate()
    trig = "none" if traj.trigger_bumper_distance is None else _fmt(traj.trigger_bumper_distance)
    lines = [_PMC_MAGIC, f"trigger_bumper_distance={trig}"]
    for s in traj.samples:
        lines.append(f"{_fmt(s.t)} {_fmt(s.x)} {_fmt(s.y)}")
    return "\n".join(lines) + "\n"


def import_pmc(document: str, actor_id: str = "target") -> TargetTrajectory:
    lines = document.splitlines()
    if not lines or lines[0].strip() != _PMC_MAGIC:
        raise ParseError(f"expected '{_PMC_MAGIC}' magic", line=1)
    if len(lines) < 2 or not lines[1].startswith("trigger_bumper_distance="):
        raise ParseError("expected trigger_bumper_distance header", line=2)
    trig_text = lines[1].split("=", 1)[1].strip()
    if trig_text == "none" or trig_text == "":
        trigger = None
    else:
        try:
            trigger = float(trig_text)
        except ValueError as exc:
            raise ParseError(f"bad trigger value {trig_text!r}", line=2) from exc

    samples: list[TrajectorySample] = []
    for idx, raw in enumerate(lines[2:], start=3):
        text = raw.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(f"expected 't x y', got {text!r}", line=idx)
        try:
            t, x, y = (float(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"bad decimal in {text!r}", line=idx) from exc
        if samples and t <= samples[-1].t:
            raise NonMonotonicTime(f"line {idx}: t={t} not after {samples[-1].t}")
        samples.append(TrajectorySample(t, x, y))

    if len(samples) < 2:
        raise TooFewSamples(f"need >= 2 samples, got {len(samples)}")
    traj = TargetTrajectory(actor_id, tuple(samples), trigger_bumper_distance=trigger)
    traj.validate()
    return traj


def refine_spec_speed(spec: ScenarioSpec, set_speed_kmh: float) -> ScenarioSpec:
    return replace(spec, ads_init_speed=set_speed_kmh)
