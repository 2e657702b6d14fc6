from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import ray_sweep_visible, sample_occlusion_config
from silcorr.geometry import Rectangle
from silcorr.sensors import (
    Detection,
    SensedActor,
    SensorConfig,
    SensorFusion,
    sensor_origin,
    visibility,
)


def actor(actor_id, x, y, heading=0.0, lateral=0.0, speed=0.0, in_lane=True,
          length=4.8, width=1.9):
    return SensedActor(
        actor_id=actor_id,
        rect=Rectangle(x, y, heading, length=length, width=width),
        station=x,
        lateral=lateral,
        speed_along_lane=speed,
        in_ego_lane=in_lane,
    )


EGO = Rectangle(0.0, 0.0, 0.0)  # sensor origin at the front bumper (2.4, 0)


class TestVisibility:
    def test_actor_just_beyond_range_not_detected(self):
        sensor = SensorConfig(max_range=100.0)
        # Nearest footprint point sits at range + 0.1.
        a = actor("a", 2.4 + 100.0 + 0.1 + 2.4, 0.0)
        assert visibility(EGO, 0.0, sensor, [a]) == []

    def test_actor_within_range_detected_with_nearest_point_range(self):
        sensor = SensorConfig(max_range=100.0)
        a = actor("a", 2.4 + 99.0 + 2.4, 0.0)
        dets = visibility(EGO, 0.0, sensor, [a])
        assert len(dets) == 1
        assert dets[0].range == pytest.approx(99.0)

    def test_collinear_secondary_behind_wider_lead_not_detected(self):
        sensor = SensorConfig(max_range=150.0)
        lead = actor("lead", 45.0, 0.0, width=2.2)
        secondary = actor("sec", 90.0, 0.0)
        dets = visibility(EGO, 0.0, sensor, [lead, secondary])
        assert [d.actor_id for d in dets] == ["lead"]

    def test_collinear_secondary_behind_equal_width_lead_not_detected(self):
        sensor = SensorConfig(max_range=150.0)
        lead = actor("lead", 45.0, 0.0)
        secondary = actor("sec", 90.0, 0.0)
        assert [d.actor_id for d in visibility(EGO, 0.0, sensor, [lead, secondary])] == ["lead"]

    def test_offset_lead_exposes_secondary_cross_checked_by_ray_sweep(self):
        sensor = SensorConfig(max_range=150.0)
        secondary = actor("sec", 90.0, 0.0)
        origin = sensor_origin(EGO, sensor)
        for offset in (0.0, 0.5, 1.0, 1.5, 2.1, 2.8, 3.5):
            lead = actor("lead", 45.0, offset, lateral=offset)
            dets = visibility(EGO, 0.0, sensor, [lead, secondary])
            mine = "sec" in {d.actor_id for d in dets}
            oracle = ray_sweep_visible(
                origin, 0.0, sensor, [lead.rect, secondary.rect], target_index=1
            )
            assert mine == oracle, f"offset={offset}: mine={mine}, sweep={oracle}"

    def test_outside_fov_not_detected(self):
        sensor = SensorConfig(max_range=100.0, fov_half_angle=math.radians(30.0))
        a = actor("a", 10.0, 40.0)  # bearing ~76 degrees
        assert visibility(EGO, 0.0, sensor, [a]) == []

    def test_relative_speed_is_actor_minus_ego(self):
        sensor = SensorConfig()
        a = actor("a", 50.0, 0.0, speed=5.0)
        det = visibility(EGO, 15.0, sensor, [a])[0]
        assert det.relative_speed == pytest.approx(-10.0)

    def test_detections_sorted_by_range(self):
        sensor = SensorConfig()
        far = actor("far", 80.0, 3.5, lateral=3.5, in_lane=False)
        near = actor("near", 40.0, -3.5, lateral=-3.5, in_lane=False)
        ids = [d.actor_id for d in visibility(EGO, 0.0, sensor, [far, near])]
        assert ids == ["near", "far"]

    def test_random_configurations_agree_with_ray_sweep(self):
        # Same check as the acceptance gate, at a smaller sample count.
        rng = np.random.default_rng(7)
        sensor = SensorConfig(max_range=120.0, fov_half_angle=math.radians(60.0))
        origin = sensor_origin(EGO, sensor)
        agree = 0
        trials = 1500
        for _ in range(trials):
            actors = sample_occlusion_config(rng, origin, sensor)
            dets = {d.actor_id for d in visibility(EGO, 0.0, sensor, actors)}
            rects = [a.rect for a in actors]
            sweep = {
                a.actor_id
                for idx, a in enumerate(actors)
                if ray_sweep_visible(origin, 0.0, sensor, rects, idx)
            }
            agree += dets == sweep
        assert agree / trials >= 0.999


class TestSensorFusion:
    def det(self, actor_id="a", rng=50.0, rel=-5.0, in_lane=True, lat=0.0):
        return Detection(actor_id, rng, rel, in_lane, lat)

    def test_single_cycle_not_confirmed(self):
        fusion = SensorFusion(period=0.04, n_confirm=3)
        assert fusion.step(0.0, [self.det()]) == []

    def test_confirmed_after_n_cycles_with_smoothed_range(self):
        fusion = SensorFusion(period=0.04, n_confirm=3, smoothing=0.4)
        raws = [50.0, 49.8, 49.6]
        out = []
        for k, r in enumerate(raws):
            out = fusion.step(k * 0.04, [self.det(rng=r)])
        assert len(out) == 1
        track = out[0]
        assert track.confirmation_age == 3
        assert min(raws) <= track.range <= max(raws)  # EMA convexity
        assert track.first_seen_t == 0.0

    def test_coasting_keeps_identity_then_drops(self):
        fusion = SensorFusion(period=0.04, n_confirm=3, n_coast=5)
        for k in range(4):
            fusion.step(k * 0.04, [self.det(rng=50.0 - k * 0.2)])
        # Occluded for 3 cycles (< n_coast): track persists and coasts.
        for k in range(4, 7):
            out = fusion.step(k * 0.04, [])
            assert [o.actor_id for o in out] == ["a"]
            assert out[0].coasting
        # Reappears: same identity, original first_seen preserved.
        out = fusion.step(7 * 0.04, [self.det(rng=48.0)])
        assert out[0].actor_id == "a" and out[0].first_seen_t == 0.0
        assert not out[0].coasting

    def test_dropped_after_coast_budget(self):
        fusion = SensorFusion(period=0.04, n_confirm=3, n_coast=2)
        for k in range(3):
            fusion.step(k * 0.04, [self.det()])
        fusion.step(0.12, [])
        fusion.step(0.16, [])
        assert fusion.step(0.20, []) == []
        # A later sighting starts an unconfirmed track from scratch.
        assert fusion.step(0.24, [self.det()]) == []

    def test_coasted_range_dead_reckons(self):
        fusion = SensorFusion(period=0.5, n_confirm=1, smoothing=1.0)
        fusion.step(0.0, [self.det(rng=50.0, rel=-4.0)])
        out = fusion.step(0.5, [])
        assert out[0].range == pytest.approx(50.0 - 4.0 * 0.5)

    def test_scripted_visibility_sequence(self):
        # Visible 3, occluded 2, visible again: one continuous track whose
        # confirmation age keeps growing.
        fusion = SensorFusion(period=0.04, n_confirm=3, n_coast=5)
        script = [True, True, True, False, False, True, True]
        ages = []
        for k, vis in enumerate(script):
            out = fusion.step(k * 0.04, [self.det(rng=60.0 - k)] if vis else [])
            ages.append(out[0].confirmation_age if out else None)
        assert ages == [None, None, 3, 3, 3, 4, 5]
