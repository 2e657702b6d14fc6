"""Ideal forward sensor with range/FOV/occlusion, and object-list fusion.

The sensor reports an actor when (a) the nearest point of its footprint is
within range of the sensor origin, (b) at least one of its five key points
(center + corners) lies inside the field-of-view cone, and (c) at least one
sight ray from the sensor origin to a key point is not blocked by any other
actor's footprint.

The fusion stage turns per-cycle detections into a tracked object list:
objects are reported only after a number of consecutive confirmation cycles,
ranges and rates are smoothed with an exponential moving average, and lost
objects coast for a few cycles before being dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Rectangle, wrap_angle


@dataclass(frozen=True)
class SensorConfig:
    """Ideal sensor parameters.  The origin sits mount_offset behind the
    ego front bumper, on the vehicle centerline."""

    max_range: float = 150.0
    fov_half_angle: float = math.radians(60.0)
    mount_offset: float = 0.0

    def validate(self) -> None:
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")
        if not 0.0 < self.fov_half_angle <= math.pi:
            raise ValueError("fov_half_angle must be in (0, pi]")


@dataclass(frozen=True)
class SensedActor:
    """World pose and lane-frame state of one actor, as known to the sim."""

    actor_id: str
    rect: Rectangle
    station: float
    lateral: float
    speed_along_lane: float
    in_ego_lane: bool


@dataclass(frozen=True)
class Detection:
    actor_id: str
    range: float                 # sensor origin to nearest footprint point
    relative_speed: float        # actor along-lane speed minus ego speed
    in_ego_lane: bool
    lateral_offset: float
    first_seen_t: float | None = None


def sensor_origin(ego_rect: Rectangle, sensor: SensorConfig) -> tuple[float, float]:
    ahead = ego_rect.length / 2.0 - sensor.mount_offset
    return (
        ego_rect.cx + ahead * math.cos(ego_rect.heading),
        ego_rect.cy + ahead * math.sin(ego_rect.heading),
    )


def visibility(
    ego_rect: Rectangle,
    ego_speed: float,
    sensor: SensorConfig,
    actors: list[SensedActor],
) -> list[Detection]:
    """Detections for the current cycle, ordered by range then actor id."""
    origin = sensor_origin(ego_rect, sensor)
    heading = ego_rect.heading
    detections: list[Detection] = []
    for actor in actors:
        dist = actor.rect.nearest_distance(*origin)
        if dist > sensor.max_range:
            continue
        points = actor.rect.key_points()
        in_fov = False
        for px, py in points:
            bearing = math.atan2(py - origin[1], px - origin[0])
            if abs(wrap_angle(bearing - heading)) <= sensor.fov_half_angle:
                in_fov = True
                break
        if not in_fov:
            continue
        occluders = [a.rect for a in actors if a.actor_id != actor.actor_id]
        seen = False
        for point in points:
            if not any(rect.blocks_segment(origin, point) for rect in occluders):
                seen = True
                break
        if not seen:
            continue
        detections.append(
            Detection(
                actor_id=actor.actor_id,
                range=dist,
                relative_speed=actor.speed_along_lane - ego_speed,
                in_ego_lane=actor.in_ego_lane,
                lateral_offset=actor.lateral,
            )
        )
    detections.sort(key=lambda d: (d.range, d.actor_id))
    return detections


@dataclass(frozen=True)
class TrackedObject:
    actor_id: str
    range: float
    range_rate: float
    in_ego_lane: bool
    lateral_offset: float
    lateral_rate: float
    confirmation_age: int
    first_seen_t: float
    coasting: bool


class _Track:
    __slots__ = ("first_seen_t", "hits", "misses", "range", "range_rate",
                 "lateral", "lateral_rate", "in_ego_lane")

    def __init__(self, t: float, det: Detection):
        self.first_seen_t = t
        self.hits = 1
        self.misses = 0
        self.range = det.range
        self.range_rate = det.relative_speed
        self.lateral = det.lateral_offset
        self.lateral_rate = 0.0
        self.in_ego_lane = det.in_ego_lane


class SensorFusion:
    """Stateful tracker; call :meth:`step` once per controller cycle."""

    def __init__(self, period: float, n_confirm: int = 3, n_coast: int = 5,
                 smoothing: float = 0.4):
        if not 0.0 < smoothing <= 1.0:
            raise ValueError("smoothing must be in (0, 1]")
        self.period = period
        self.n_confirm = n_confirm
        self.n_coast = n_coast
        self.alpha = smoothing
        self._tracks: dict[str, _Track] = {}

    def step(self, t: float, detections: list[Detection]) -> list[TrackedObject]:
        seen = {d.actor_id: d for d in detections}
        for actor_id, det in seen.items():
            track = self._tracks.get(actor_id)
            if track is None:
                self._tracks[actor_id] = _Track(t, det)
                continue
            a = self.alpha
            raw_lat_rate = (det.lateral_offset - track.lateral) / self.period
            track.range = a * det.range + (1 - a) * track.range
            track.range_rate = a * det.relative_speed + (1 - a) * track.range_rate
            track.lateral_rate = a * raw_lat_rate + (1 - a) * track.lateral_rate
            track.lateral = a * det.lateral_offset + (1 - a) * track.lateral
            track.in_ego_lane = det.in_ego_lane
            track.hits += 1
            track.misses = 0

        for actor_id in list(self._tracks):
            if actor_id in seen:
                continue
            track = self._tracks[actor_id]
            if track.hits < self.n_confirm or track.misses >= self.n_coast:
                del self._tracks[actor_id]
                continue
            # Coast: dead-reckon the range so the threat distance stays smooth.
            track.misses += 1
            track.range += track.range_rate * self.period
            track.lateral += track.lateral_rate * self.period

        out = [
            TrackedObject(
                actor_id=actor_id,
                range=tr.range,
                range_rate=tr.range_rate,
                in_ego_lane=tr.in_ego_lane,
                lateral_offset=tr.lateral,
                lateral_rate=tr.lateral_rate,
                confirmation_age=tr.hits,
                first_seen_t=tr.first_seen_t,
                coasting=tr.misses > 0,
            )
            for actor_id, tr in self._tracks.items()
            if tr.hits >= self.n_confirm
        ]
        out.sort(key=lambda o: (o.range, o.actor_id))
        return out
