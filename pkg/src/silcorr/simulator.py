"""Closed-loop longitudinal simulation of the ego vehicle along a lane.

The ego is locked to the lane centerline; lateral acceleration is the
kinematic v^2 * curvature.  Longitudinally a reference cruise/follow
controller commands acceleration, actuation is rate-limited by the jerk
bound and applied through a first-order lag, and the resulting motion is
integrated with fixed-step semi-implicit Euler.  Targets replay their
reference trajectories exactly.

Logged channels: t, s_dist (bumper distance to the active in-lane threat,
absent until one is tracked), v_lon, a_lon (actuation acceleration), a_lat,
target_in_lane (a tracked object currently occupies the ego lane) and
target_detected (the active threat is an actor that was not visible at the
start of the run).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drive_logs import DriveLog, LogSource
from .geometry import VEHICLE_LENGTH, VEHICLE_WIDTH, LaneFrame, Rectangle
from .scenarios import ScenarioArtifacts, TargetTrajectory
from .sensors import SensedActor, SensorConfig, SensorFusion, TrackedObject, visibility

ACTUATION_LAG = 0.2     # s, first-order lag between commanded and achieved accel
DEFAULT_OVERSAMPLE = 4
DEFAULT_LOG_PERIOD = 0.02

# Threat selection: a tracked object predicted to leave the lane stops being
# the braking target even while its footprint still overlaps the lane.
_EXIT_LATERAL = 0.5     # m
_EXIT_RATE = 0.05       # m/s

_SPEED_GAIN = 0.6       # cruise P-gain on speed error
_GAP_GAIN = 0.25        # follow PD-gains on spacing error
_RATE_GAIN = 0.9
_GAP_EPS = 0.5          # m, floor of the braking-distance denominator

# Stop assist: finish the asymptotic tail of an approach to a (near-)
# stationary object with a firm stop, then hold at standstill.
_STOP_TARGET_SPEED = 0.1
_STOP_EGO_SPEED = 0.05
_HOLD_BAND = 0.7        # m above the standstill gap where holding applies
_CREEP_SPEED = 1.0      # m/s below which the stop brake engages
_CREEP_BAND = 6.0       # m above the standstill gap where it engages
_STOP_BRAKE = 0.8       # m/s^2


@dataclass(frozen=True)
class AdsConfig:
    """Reference longitudinal policy parameters (SI units)."""

    set_speed: float
    time_gap: float = 1.5
    standstill_gap: float = 5.0
    comfort_decel: float = 3.5
    emergency_decel: float = 6.0
    max_accel: float = 2.0
    jerk_limit: float = 2.5
    controller_period: float = 0.04

    def validate(self) -> None:
        if not 0.0 < self.comfort_decel < self.emergency_decel:
            raise ValueError("need 0 < comfort_decel < emergency_decel")
        if self.time_gap <= 0 or self.standstill_gap <= 0:
            raise ValueError("time_gap and standstill_gap must be > 0")
        if self.controller_period <= 0 or self.max_accel <= 0 or self.jerk_limit <= 0:
            raise ValueError("controller_period, max_accel, jerk_limit must be > 0")


@dataclass(frozen=True)
class EgoState:
    t: float
    station: float
    lateral_offset: float
    v_lon: float
    a_lon: float
    a_lat: float


def required_decel(v_ego: float, v_target: float, gap: float, standstill_gap: float) -> float:
    """Constant deceleration needed to match speeds at the standstill gap."""
    if v_ego <= v_target:
        return 0.0
    return (v_ego * v_ego - v_target * v_target) / (2.0 * max(_GAP_EPS, gap - standstill_gap))


def pick_threat(tracked: list[TrackedObject]) -> TrackedObject | None:
    """Nearest in-lane tracked object that is not predicted to exit."""
    best: TrackedObject | None = None
    for obj in tracked:
        if not obj.in_ego_lane:
            continue
        exiting = (
            abs(obj.lateral_offset) > _EXIT_LATERAL
            and obj.lateral_offset * obj.lateral_rate > 0.0
            and abs(obj.lateral_rate) > _EXIT_RATE
        )
        if exiting:
            continue
        if best is None or obj.range < best.range:
            best = obj
    return best


def policy_accel(v_ego: float, threat: TrackedObject | None, cfg: AdsConfig) -> float:
    """Un-rate-limited commanded acceleration for the current cycle.

    Cruise drives the speed error down under the acceleration cap; with a
    threat the command is the smaller of cruise and a PD spacing law, and
    the braking clamp is the comfort deceleration unless the kinematically
    required deceleration exceeds it, in which case the emergency level is
    allowed.
    """
    accel = _SPEED_GAIN * (cfg.set_speed - v_ego)
    floor = -cfg.comfort_decel
    if threat is not None:
        gap = max(threat.range, 0.0)
        v_target = max(v_ego + threat.range_rate, 0.0)
        near_standstill = v_target <= _STOP_TARGET_SPEED
        if (
            near_standstill
            and v_ego <= _STOP_EGO_SPEED
            and gap <= cfg.standstill_gap + _HOLD_BAND
        ):
            return 0.0
        desired_gap = cfg.standstill_gap + cfg.time_gap * v_ego
        accel = min(accel, _GAP_GAIN * (gap - desired_gap) + _RATE_GAIN * (v_target - v_ego))
        if (
            near_standstill
            and v_ego <= _CREEP_SPEED
            and gap <= cfg.standstill_gap + _CREEP_BAND
        ):
            accel = min(accel, -_STOP_BRAKE)
        if required_decel(v_ego, v_target, gap, cfg.standstill_gap) > cfg.comfort_decel:
            floor = -cfg.emergency_decel
    return min(max(accel, floor), cfg.max_accel)


def controller_step(ego: EgoState, tracked: list[TrackedObject], cfg: AdsConfig) -> float:
    """Commanded acceleration, rate-limited by the jerk bound against the
    previous command carried in ``ego.a_lon``."""
    accel = policy_accel(ego.v_lon, pick_threat(tracked), cfg)
    max_step = cfg.jerk_limit * cfg.controller_period
    return min(max(accel, ego.a_lon - max_step), ego.a_lon + max_step)


class _TargetTrack:
    """A target trajectory resampled onto the controller-cycle grid."""

    def __init__(self, traj: TargetTrajectory, frame: LaneFrame, cycle_times: np.ndarray):
        ts = np.array([s.t for s in traj.samples])
        xs = np.array([s.x for s in traj.samples])
        ys = np.array([s.y for s in traj.samples])
        self.actor_id = traj.actor_id
        self.x = np.interp(cycle_times, ts, xs)
        self.y = np.interp(cycle_times, ts, ys)
        station = np.empty_like(self.x)
        lateral = np.empty_like(self.x)
        for i in range(self.x.size):
            station[i], lateral[i] = frame.from_world(float(self.x[i]), float(self.y[i]))
        self.station = station
        self.lateral = lateral
        self.speed = np.gradient(station, cycle_times) if station.size > 1 else np.zeros(1)


def simulate(
    artifacts: ScenarioArtifacts,
    ads: AdsConfig,
    sensor: SensorConfig,
    duration: float | None = None,
    *,
    oversample: int = DEFAULT_OVERSAMPLE,
    log_period: float = DEFAULT_LOG_PERIOD,
    n_confirm: int = 3,
    n_coast: int = 5,
    smoothing: float = 0.4,
    repetition_id: str = "sim",
) -> DriveLog:
    """Run one closed-loop scenario and emit its drive log.

    Deterministic: identical inputs produce bit-identical logs.
    """
    ads.validate()
    sensor.validate()
    road = artifacts.road
    frame = road.frame()
    half_lane = road.lane_width / 2.0

    if duration is None:
        duration = max((t.samples[-1].t for t in artifacts.targets), default=30.0)

    period = ads.controller_period
    dt = period / oversample
    substeps_per_log = max(1, round(log_period / dt))
    n_cycles = int(math.floor(duration / period + 1e-9))
    cycle_times = np.arange(n_cycles + 1) * period

    tracks = [_TargetTrack(t, frame, cycle_times) for t in artifacts.targets]
    static_actors: list[SensedActor] = []
    if artifacts.secondary_target is not None:
        pose = artifacts.secondary_target
        x, y = frame.to_world(pose.station, pose.lateral)
        static_actors.append(
            SensedActor(
                actor_id="secondary",
                rect=Rectangle(x, y, frame.heading(pose.station)),
                station=pose.station,
                lateral=pose.lateral,
                speed_along_lane=0.0,
                in_ego_lane=abs(pose.lateral) <= half_lane,
            )
        )

    fusion = SensorFusion(period, n_confirm=n_confirm, n_coast=n_coast, smoothing=smoothing)

    station = artifacts.ego_init.station
    v = artifacts.ego_init.speed
    accel = 0.0          # plant (actuation) acceleration
    command = 0.0        # jerk-limited actuation command
    kappa = road.curvature
    lag_gain = dt / ACTUATION_LAG

    pre_tracked: set[str] | None = None
    collision = False

    log_t: list[float] = []
    log_sdist: list[float] = []
    log_v: list[float] = []
    log_alon: list[float] = []
    log_alat: list[float] = []
    log_inlane: list[bool] = []
    log_detected: list[bool] = []

    substep_index = 0
    for k in range(n_cycles + 1):
        t_k = float(cycle_times[k])
        actors: list[SensedActor] = []
        for tr in tracks:
            st = float(tr.station[k])
            lat = float(tr.lateral[k])
            actors.append(
                SensedActor(
                    actor_id=tr.actor_id,
                    rect=Rectangle(float(tr.x[k]), float(tr.y[k]), frame.heading(st)),
                    station=st,
                    lateral=lat,
                    speed_along_lane=float(tr.speed[k]),
                    in_ego_lane=abs(lat) <= half_lane,
                )
            )
        actors.extend(static_actors)

        ego_x, ego_y = frame.to_world(station, 0.0)
        ego_rect = Rectangle(ego_x, ego_y, frame.heading(station))
        detections = visibility(ego_rect, v, sensor, actors)
        if pre_tracked is None:
            pre_tracked = {d.actor_id for d in detections}
        tracked = fusion.step(t_k, detections)
        threat = pick_threat(tracked)

        s_dist = math.nan if threat is None else threat.range
        any_in_lane = any(o.in_ego_lane for o in tracked)
        detected_new = threat is not None and threat.actor_id not in pre_tracked

        for actor in actors:
            gap = actor.station - station - VEHICLE_LENGTH
            if abs(actor.lateral) < VEHICLE_WIDTH and 0.0 >= gap > -VEHICLE_LENGTH:
                collision = True

        target_cmd = policy_accel(v, threat, ads)

        for _ in range(oversample):
            if substep_index % substeps_per_log == 0:
                log_t.append(substep_index * dt)
                log_sdist.append(s_dist)
                log_v.append(v)
                log_alon.append(accel)
                log_alat.append(v * v * kappa)
                log_inlane.append(any_in_lane)
                log_detected.append(detected_new)
            if k == n_cycles:
                break
            # Jerk limiting at the substep keeps the achieved acceleration
            # within the bound even across controller-period boundaries.
            max_step = ads.jerk_limit * dt
            command = min(max(target_cmd, command - max_step), command + max_step)
            accel += lag_gain * (command - accel)
            v = max(0.0, v + accel * dt)
            station += v * dt
            substep_index += 1
        if k == n_cycles:
            break

    log = DriveLog(
        repetition_id=repetition_id,
        scenario_id=artifacts.spec.scenario_id,
        source=LogSource.SIMULATION,
        annotation_t=0.0,
        t=np.asarray(log_t),
        s_dist=np.asarray(log_sdist),
        v_lon=np.asarray(log_v),
        a_lon=np.asarray(log_alon),
        a_lat=np.asarray(log_alat),
        target_in_lane=np.asarray(log_inlane),
        target_detected=np.asarray(log_detected),
        collision_flag=collision,
    )
    log.validate()
    return log
