from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import (
    CUT_IN_SPEC,
    CUT_OUT_SENSOR,
    CUT_OUT_SPEC,
    STATIONARY_SPEC,
    default_ads,
)
from silcorr.drive_logs import emit_drive_log
from silcorr.scenarios import (
    EgoInit,
    RoadSpec,
    ScenarioArtifacts,
    ScenarioClass,
    ScenarioSpec,
    generate_scenario,
)
from silcorr.sensors import SensorConfig, TrackedObject
from silcorr.simulator import (
    AdsConfig,
    EgoState,
    controller_step,
    pick_threat,
    policy_accel,
    required_decel,
    simulate,
)


def tracked(rng=50.0, rate=-5.0, in_lane=True, lat=0.0, lat_rate=0.0):
    return TrackedObject(
        actor_id="t", range=rng, range_rate=rate, in_ego_lane=in_lane,
        lateral_offset=lat, lateral_rate=lat_rate, confirmation_age=5,
        first_seen_t=0.0, coasting=False,
    )


def cruise_artifacts(spec_speed_kmh: float, ego_speed_kmh: float, curvature: float = 0.0):
    """Target-free road for pure longitudinal-control tests."""
    return ScenarioArtifacts(
        spec=ScenarioSpec(ScenarioClass.STATIONARY_TARGET, spec_speed_kmh, 0.0,
                          curvature=curvature, scenario_id="cruise"),
        road=RoadSpec(curvature, 3.5, 1, 2000.0),
        ego_init=EgoInit(0.0, 0.0, ego_speed_kmh / 3.6),
        targets=(),
    )


class TestControllerPolicy:
    def test_required_decel_hand_value(self):
        # 19.44 m/s against a stationary object 80 m ahead with a 5 m
        # standstill gap: 19.44^2 / (2 * 75).
        assert required_decel(19.44, 0.0, 80.0, 5.0) == pytest.approx(
            19.44**2 / 150.0, abs=1e-12
        )
        assert required_decel(19.44, 0.0, 80.0, 5.0) == pytest.approx(2.519424, abs=1e-6)

    def test_comfort_regime_engaged_at_80m(self):
        cfg = AdsConfig(set_speed=19.44)
        cmd = policy_accel(19.44, tracked(rng=80.0, rate=-19.44), cfg)
        d_req = required_decel(19.44, 0.0, 80.0, cfg.standstill_gap)
        assert d_req < cfg.comfort_decel            # comfort regime
        assert cmd == -cfg.comfort_decel            # braking clamped at comfort

    def test_emergency_regime_when_required_decel_exceeds_comfort(self):
        cfg = AdsConfig(set_speed=19.44)
        d_req = required_decel(19.44, 0.0, 25.0, cfg.standstill_gap)
        assert d_req > cfg.comfort_decel
        cmd = policy_accel(19.44, tracked(rng=25.0, rate=-19.44), cfg)
        assert -cfg.emergency_decel <= cmd < -cfg.comfort_decel

    def test_steady_cruise_commands_zero(self):
        cfg = AdsConfig(set_speed=15.0)
        assert policy_accel(15.0, None, cfg) == 0.0

    def test_standstill_hold_commands_zero(self):
        cfg = AdsConfig(set_speed=15.0)
        cmd = policy_accel(0.0, tracked(rng=cfg.standstill_gap, rate=0.0), cfg)
        assert cmd == 0.0

    def test_command_capped_by_max_accel(self):
        cfg = AdsConfig(set_speed=30.0, max_accel=2.0)
        assert policy_accel(0.0, None, cfg) == 2.0

    def test_controller_step_rate_limited_by_jerk(self):
        cfg = AdsConfig(set_speed=30.0, jerk_limit=2.5, controller_period=0.04)
        ego = EgoState(t=0.0, station=0.0, lateral_offset=0.0, v_lon=10.0,
                       a_lon=0.0, a_lat=0.0)
        cmd = controller_step(ego, [], cfg)
        assert cmd == pytest.approx(2.5 * 0.04)

    def test_threat_selection_ignores_exiting_and_out_of_lane(self):
        near_exiting = tracked(rng=30.0, lat=1.0, lat_rate=0.8)
        out_of_lane = tracked(rng=20.0, in_lane=False)
        far_in_lane = tracked(rng=60.0)
        assert pick_threat([near_exiting, out_of_lane, far_in_lane]).range == 60.0
        entering = tracked(rng=30.0, lat=1.0, lat_rate=-0.8)
        assert pick_threat([entering, far_in_lane]).range == 30.0


class TestSimulatorPhysics:
    def test_cruise_settles_to_set_speed(self):
        art = cruise_artifacts(70.0, 50.0)
        log = simulate(art, AdsConfig(set_speed=70.0 / 3.6), SensorConfig(), duration=30.0)
        assert log.v_lon[-1] == pytest.approx(19.444, abs=0.01)

    def test_zero_command_keeps_speed_bit_constant(self):
        art = cruise_artifacts(70.0, 70.0)
        log = simulate(art, AdsConfig(set_speed=70.0 / 3.6), SensorConfig(), duration=10.0)
        assert np.all(log.v_lon == 70.0 / 3.6)
        assert np.all(log.a_lon == 0.0)

    def test_lateral_acceleration_is_definitional(self):
        art = cruise_artifacts(55.0, 55.0, curvature=1.0 / 140.0)
        log = simulate(art, AdsConfig(set_speed=55.0 / 3.6), SensorConfig(), duration=20.0)
        assert np.array_equal(log.a_lat, log.v_lon**2 * (1.0 / 140.0))
        assert log.a_lat[-1] == pytest.approx((55.0 / 3.6) ** 2 / 140.0, rel=0.02)

    @pytest.mark.parametrize("spec,sensor", [
        (STATIONARY_SPEC, SensorConfig()),
        (CUT_IN_SPEC, SensorConfig()),
        (CUT_OUT_SPEC, CUT_OUT_SENSOR),
    ], ids=["stationary", "cut_in", "cut_out"])
    def test_jerk_bound_never_violated(self, spec, sensor):
        ads = default_ads(spec)
        log = simulate(generate_scenario(spec), ads, sensor)
        dt = np.diff(log.t)
        assert np.all(np.abs(np.diff(log.a_lon)) <= ads.jerk_limit * dt + 1e-9)

    def test_stationary_run_stops_cleanly(self, stationary_sim):
        log = stationary_sim
        ads = default_ads(STATIONARY_SPEC)
        assert log.v_lon[-1] == 0.0
        assert not log.collision_flag
        min_gap = np.nanmin(log.s_dist)
        assert min_gap >= ads.standstill_gap - 0.5

    def test_stationary_stop_within_kinematic_envelope(self, stationary_sim):
        # Independent kinematic bracket: from brake onset the log must cover
        # at least the comfort-limited stopping distance, and come to rest
        # without eating into the standstill gap.
        log = stationary_sim
        ads = default_ads(STATIONARY_SPEC)
        onset = int(np.argmax(log.a_lon < -0.2))
        assert onset > 0
        v0 = log.v_lon[onset]
        gap0 = log.s_dist[onset]
        assert not math.isnan(gap0)
        stop_distance = gap0 - np.nanmin(log.s_dist)
        assert stop_distance >= v0**2 / (2.0 * ads.comfort_decel) - 1.0
        assert stop_distance <= gap0 - (ads.standstill_gap - 0.5)

    def test_cut_in_run_brakes_for_braking_target(self, cut_in_sim):
        log = cut_in_sim
        assert not log.collision_flag
        assert log.v_lon[-1] == 0.0          # target braked to a stop, ego held behind
        assert np.nanmin(log.s_dist) >= default_ads(CUT_IN_SPEC).standstill_gap - 0.5

    def test_sdist_absent_until_first_threat(self, cut_in_sim):
        log = cut_in_sim
        first_present = int(np.argmax(~np.isnan(log.s_dist)))
        assert first_present > 0
        assert np.all(np.isnan(log.s_dist[:first_present]))
        assert bool(log.target_in_lane[first_present])

    def test_cut_out_switches_threat_to_secondary(self, cut_out_sim):
        log = cut_out_sim
        detected = np.flatnonzero(log.target_detected)
        assert detected.size > 0
        idx = detected[0]
        # The exposed stationary vehicle is farther than the departing lead.
        assert log.s_dist[idx] > np.nanmax(log.s_dist[: max(idx - 25, 1)])
        assert log.v_lon[-1] == 0.0
        assert not log.collision_flag

    def test_determinism_bit_identical(self):
        art = generate_scenario(CUT_IN_SPEC)
        ads = default_ads(CUT_IN_SPEC)
        a = emit_drive_log(simulate(art, ads, SensorConfig()))
        b = emit_drive_log(simulate(art, ads, SensorConfig()))
        assert a == b

    def test_late_detection_reports_collision_flag(self):
        spec = ScenarioSpec(ScenarioClass.STATIONARY_TARGET, 70.0, 0.0, scenario_id="crash")
        art = generate_scenario(spec, initial_gap=60.0, horizon=15.0)
        log = simulate(art, AdsConfig(set_speed=70.0 / 3.6), SensorConfig(max_range=20.0))
        assert log.collision_flag

    def test_log_grid_is_uniform_50hz(self, cut_in_sim):
        dt = np.diff(cut_in_sim.t)
        assert np.allclose(dt, 0.02, atol=1e-9)

    def test_annotation_at_run_start(self, cut_in_sim):
        assert cut_in_sim.annotation_t == 0.0
