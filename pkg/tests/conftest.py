from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from silcorr.drive_logs import DriveLog, LogSource
from silcorr.scenarios import ScenarioClass, ScenarioSpec, generate_scenario
from silcorr.sensors import SensorConfig
from silcorr.simulator import AdsConfig, simulate

# The three reference scenario parameterizations exercised throughout.
STATIONARY_SPEC = ScenarioSpec(
    scenario_class=ScenarioClass.STATIONARY_TARGET,
    ads_init_speed=70.0,
    target_init_speed=0.0,
    curvature=0.0,
    scenario_id="stationary_target",
)
CUT_IN_SPEC = ScenarioSpec(
    scenario_class=ScenarioClass.CUT_IN,
    ads_init_speed=30.0,
    target_init_speed=20.0,
    target_decel=1.0,
    trigger_distance=60.0,
    event_duration=10.0,
    curvature=0.0,
    scenario_id="cut_in",
)
CUT_OUT_SPEC = ScenarioSpec(
    scenario_class=ScenarioClass.CUT_OUT,
    ads_init_speed=55.0,
    target_init_speed=55.0,
    trigger_distance=40.0,
    event_duration=4.0,
    curvature=1.0 / 140.0,
    scenario_id="cut_out",
)

# The curved cut-out relies on a range-calibrated sensor for the exposure
# event (2-D sight rays cut the inside of the curve past the lead vehicle).
CUT_OUT_SENSOR = SensorConfig(max_range=75.0)


def default_ads(spec: ScenarioSpec, **overrides) -> AdsConfig:
    return AdsConfig(set_speed=spec.ads_init_speed / 3.6, **overrides)


@pytest.fixture(scope="session")
def stationary_sim() -> DriveLog:
    return simulate(generate_scenario(STATIONARY_SPEC), default_ads(STATIONARY_SPEC), SensorConfig())


@pytest.fixture(scope="session")
def cut_in_sim() -> DriveLog:
    return simulate(generate_scenario(CUT_IN_SPEC), default_ads(CUT_IN_SPEC), SensorConfig())


@pytest.fixture(scope="session")
def cut_out_sim() -> DriveLog:
    return simulate(generate_scenario(CUT_OUT_SPEC), default_ads(CUT_OUT_SPEC), CUT_OUT_SENSOR)


def as_track_rep(
    log: DriveLog,
    rep_id: str,
    time_shift: float = 0.0,
    v_noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> DriveLog:
    """Relabel a simulated log as a track repetition, optionally shifting its
    time axis and perturbing the speed channel."""
    v = log.v_lon.copy()
    if v_noise > 0.0:
        assert rng is not None
        v = v * (1.0 + v_noise * rng.standard_normal(v.size))
    return DriveLog(
        repetition_id=rep_id,
        scenario_id=log.scenario_id,
        source=LogSource.TRACK,
        annotation_t=log.annotation_t + time_shift,
        t=log.t + time_shift,
        s_dist=log.s_dist.copy(),
        v_lon=v,
        a_lon=log.a_lon.copy(),
        a_lat=log.a_lat.copy(),
        target_in_lane=log.target_in_lane.copy(),
        target_detected=log.target_detected.copy(),
        collision_flag=log.collision_flag,
    )


def varied_track_reps(
    spec: ScenarioSpec,
    n: int,
    seed: int,
    base_sensor: SensorConfig | None = None,
) -> list[DriveLog]:
    """Independent track-like repetitions: each is its own simulation with a
    jittered sensor range and set speed, plus a time shift."""
    rng = np.random.default_rng(seed)
    base_sensor = base_sensor or SensorConfig()
    reps = []
    artifacts = generate_scenario(spec)
    for i in range(n):
        sensor = SensorConfig(
            max_range=base_sensor.max_range * float(1.0 + 0.04 * rng.uniform(-1, 1)),
            fov_half_angle=base_sensor.fov_half_angle,
            mount_offset=base_sensor.mount_offset,
        )
        ads = AdsConfig(set_speed=spec.ads_init_speed / 3.6 * float(1.0 + 0.01 * rng.uniform(-1, 1)))
        log = simulate(artifacts, ads, sensor, repetition_id=str(i))
        reps.append(as_track_rep(log, str(i), time_shift=float(rng.uniform(-0.5, 0.5))))
    return reps


def write_workspace(
    root: Path,
    spec: ScenarioSpec,
    track_logs: list[DriveLog],
    sensor: SensorConfig | None = None,
    **config_extra,
) -> Path:
    """Lay out spec + track logs + pipeline config on disk; returns the
    config path."""
    from silcorr.drive_logs import save_drive_log

    root.mkdir(parents=True, exist_ok=True)
    spec_path = root / f"{spec.scenario_id}.json"
    spec_path.write_text(spec.to_json(), encoding="utf-8")
    logs_dir = root / "track"
    logs_dir.mkdir(exist_ok=True)
    for log in track_logs:
        save_drive_log(log, logs_dir / f"{spec.scenario_id}_{log.repetition_id}.csv")
    sensor = sensor or SensorConfig()
    config = {
        "scenario_specs": [spec_path.name],
        "track_log_dir": "track",
        "output_dir": "out",
        "sensor": {
            "max_range": sensor.max_range,
            "fov_half_angle": sensor.fov_half_angle,
            "mount_offset": sensor.mount_offset,
        },
        **config_extra,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config_path
