"""Lane-frame geometry for straight and constant-curvature roads.

Coordinates: the reference line (ego lane centerline) starts at the world
origin heading +x.  Positive curvature bends the road to the right, so the
arc center sits at (0, -R) with R = 1/curvature.  Lane coordinates are
(station, lateral) where positive lateral points left of the direction of
travel; on a curved road that is radially away from the arc center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Single footprint for every vehicle; gaps are bumper-to-bumper.
VEHICLE_LENGTH = 4.8
VEHICLE_WIDTH = 1.9

_GRAZE_EPS = 1e-9


@dataclass(frozen=True)
class LaneFrame:
    """Bidirectional mapping between lane (station, lateral) and world x/y."""

    curvature: float = 0.0

    def to_world(self, station: float, lateral: float) -> tuple[float, float]:
        k = self.curvature
        if k == 0.0:
            return station, lateral
        r = 1.0 / k
        phi = station * k
        rad = r + lateral
        return rad * math.sin(phi), rad * math.cos(phi) - r

    def from_world(self, x: float, y: float) -> tuple[float, float]:
        k = self.curvature
        if k == 0.0:
            return x, y
        r = 1.0 / k
        phi = math.atan2(x, y + r)
        rad = math.hypot(x, y + r)
        return r * phi, rad - r

    def heading(self, station: float) -> float:
        """World heading of the direction of travel at a station."""
        return -self.curvature * station

    def angle_to_station(self, phi: float) -> float:
        if self.curvature == 0.0:
            return phi
        return phi / self.curvature


@dataclass(frozen=True)
class Rectangle:
    """Oriented rectangle footprint (vehicle outline) in world coordinates."""

    cx: float
    cy: float
    heading: float
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH

    def _to_local(self, x: float, y: float) -> tuple[float, float]:
        dx, dy = x - self.cx, y - self.cy
        c, s = math.cos(self.heading), math.sin(self.heading)
        return c * dx + s * dy, -s * dx + c * dy

    def corners(self) -> list[tuple[float, float]]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = self.length / 2.0, self.width / 2.0
        out = []
        for lx, ly in ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)):
            out.append((self.cx + c * lx - s * ly, self.cy + s * lx + c * ly))
        return out

    def key_points(self) -> list[tuple[float, float]]:
        """Center plus the four corners, the sight-ray targets."""
        return [(self.cx, self.cy)] + self.corners()

    def nearest_distance(self, x: float, y: float) -> float:
        lx, ly = self._to_local(x, y)
        dx = max(abs(lx) - self.length / 2.0, 0.0)
        dy = max(abs(ly) - self.width / 2.0, 0.0)
        return math.hypot(dx, dy)

    def blocks_segment(self, p: tuple[float, float], q: tuple[float, float]) -> bool:
        """True if the open segment p->q passes through this rectangle.

        Grazing contact (chord shorter than 1e-9 of the segment) does not
        count as blocking, so rays to a shared corner are not self-occluded.
        """
        px, py = self._to_local(*p)
        qx, qy = self._to_local(*q)
        dx, dy = qx - px, qy - py
        t0, t1 = 0.0, 1.0
        # Shrink the box a hair so rays running exactly along an edge count
        # as tangent, not blocked.
        for start, delta, half in (
            (px, dx, self.length / 2.0 - _GRAZE_EPS),
            (py, dy, self.width / 2.0 - _GRAZE_EPS),
        ):
            if abs(delta) < 1e-15:
                if abs(start) > half:
                    return False
                continue
            ta = (-half - start) / delta
            tb = (half - start) / delta
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 >= t1:
                return False
        return (t1 - t0) > _GRAZE_EPS

    def ray_entry(self, origin: tuple[float, float], direction: tuple[float, float]) -> float | None:
        """Distance along a unit-direction ray to the first boundary hit, if any."""
        px, py = self._to_local(*origin)
        c, s = math.cos(self.heading), math.sin(self.heading)
        dx = c * direction[0] + s * direction[1]
        dy = -s * direction[0] + c * direction[1]
        t0, t1 = 0.0, math.inf
        for start, delta, half in ((px, dx, self.length / 2.0), (py, dy, self.width / 2.0)):
            if abs(delta) < 1e-15:
                if abs(start) > half:
                    return None
                continue
            ta = (-half - start) / delta
            tb = (half - start) / delta
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return None
        return t0


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def kmh_to_ms(v: float) -> float:
    return v / 3.6


def ms_to_kmh(v: float) -> float:
    return v * 3.6


def quintic_step(u: float) -> float:
    """Smooth 0->1 transition with zero slope and curvature at both ends."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)
