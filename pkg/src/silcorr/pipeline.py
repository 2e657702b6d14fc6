"""End-to-end batch pipeline: ingest track logs, synchronize, tune, re-run
the simulation and render rating-banded correlation reports.

Per scenario the output directory receives::

    out/<scenario_id>/
        sync.json           anchor quantities and per-repetition offsets
        refined_spec.json   tuned scenario description
        targets/*.pmc       regenerated reference trajectories
        sim_log.csv(+meta)  simulation drive log
        report.md/.csv      rating-banded correlation report
        report.json         full-precision metric dump
        plots/*.csv         aligned series per signal, one column per source
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .drive_logs import (
    DriveLog,
    LogSource,
    RepetitionSet,
    Signal,
    load_drive_log,
    save_drive_log,
)
from .errors import ConfigError, EmptyLog, PipelineStageError, SilcorrError, ZeroRMS, ZeroVariance
from .metrics import MetricInput, MetricResult, evaluate
from .scenarios import ScenarioArtifacts, ScenarioSpec, export_pmc, generate_scenario
from .sensors import SensorConfig
from .simulator import AdsConfig, simulate
from .syncing import (
    AlignedRepetitionSet,
    SyncFormula,
    SyncSolution,
    TuningResult,
    align,
    attach_simulation,
    response_distance,
    solve_sync,
    tune_scenario,
)

VALIDATION_STAGES = {"config", "spec", "ingest"}


@dataclass(frozen=True)
class PipelineConfig:
    scenario_specs: tuple[Path, ...]
    track_log_dir: Path
    output_dir: Path
    sync_formula: SyncFormula = SyncFormula.MIDPOINT
    grid_period: float = 0.02
    sample_period: float = 0.02
    sim_duration: float | None = None
    ads_params: dict = field(default_factory=dict)
    sensor: SensorConfig = SensorConfig()
    signals: tuple[Signal, ...] | None = None
    exclude_repetitions: tuple[str, ...] = ()

    @classmethod
    def from_json(cls, path: Path) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent

        def resolve(p: str) -> Path:
            q = Path(p)
            return q if q.is_absolute() else base / q

        try:
            specs = tuple(resolve(p) for p in doc["scenario_specs"])
            track_dir = resolve(doc["track_log_dir"])
            out_dir = resolve(doc.get("output_dir", "out"))
        except KeyError as exc:
            raise ConfigError(f"config missing field {exc}") from exc
        for spec_path in specs:
            if not spec_path.exists():
                raise ConfigError(f"scenario spec not found: {spec_path}")
        if not track_dir.is_dir():
            raise ConfigError(f"track_log_dir not found: {track_dir}")

        sensor_doc = doc.get("sensor", {})
        sensor = SensorConfig(
            max_range=float(sensor_doc.get("max_range", 150.0)),
            fov_half_angle=float(sensor_doc.get("fov_half_angle", math.radians(60.0))),
            mount_offset=float(sensor_doc.get("mount_offset", 0.0)),
        )
        signals = doc.get("signals")
        return cls(
            scenario_specs=specs,
            track_log_dir=track_dir,
            output_dir=out_dir,
            sync_formula=SyncFormula(doc.get("sync_formula", "Midpoint")),
            grid_period=float(doc.get("grid_period", 0.02)),
            sample_period=float(doc.get("sample_period", 0.02)),
            sim_duration=None if doc.get("sim_duration") is None else float(doc["sim_duration"]),
            ads_params=dict(doc.get("ads", {})),
            sensor=sensor,
            signals=None if signals is None else tuple(Signal(s) for s in signals),
            exclude_repetitions=tuple(doc.get("exclude_repetitions", ())),
        )


@dataclass(eq=False)
class ReportRow:
    repetition_id: str
    cells: dict[Signal, MetricResult | None]


@dataclass(eq=False)
class CorrelationReport:
    scenario_id: str
    scenario_class: str
    signals: list[Signal]
    rows: list[ReportRow]
    harmonized: bool
    sync_formula: str
    s_sync: float


@dataclass(eq=False)
class ScenarioOutcome:
    scenario_id: str
    report: CorrelationReport
    sync: SyncSolution
    tuning: TuningResult
    aligned: AlignedRepetitionSet
    out_dir: Path
    notices: list[str] = field(default_factory=list)


def select_signals(spec: ScenarioSpec, explicit: tuple[Signal, ...] | None) -> list[Signal]:
    """Lateral acceleration is only meaningful on a curved road."""
    if explicit is not None:
        if Signal.A_LAT in explicit and spec.curvature == 0.0:
            raise ConfigError("a_lat requested for a straight road")
        return list(explicit)
    signals = [Signal.S_DIST, Signal.V_LON, Signal.A_LON]
    if spec.curvature > 0.0:
        signals.append(Signal.A_LAT)
    return signals


def discover_track_logs(config: PipelineConfig, scenario_id: str) -> list[DriveLog]:
    logs = []
    for csv_path in sorted(config.track_log_dir.glob("*.csv")):
        meta_path = csv_path.with_suffix(".meta.json")
        if not meta_path.exists():
            continue
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("scenario_id") != scenario_id:
            continue
        if meta.get("source") != LogSource.TRACK.value:
            continue
        if meta.get("repetition_id") in config.exclude_repetitions:
            continue
        logs.append(load_drive_log(csv_path))
    if not logs:
        raise EmptyLog(f"no track logs for scenario {scenario_id!r} in {config.track_log_dir}")
    logs.sort(key=lambda lg: lg.repetition_id)
    return logs


def _metric_cell(
    m: np.ndarray, g: np.ndarray, signal: Signal, notices: list[str], row: str
) -> MetricResult | None:
    valid = ~np.isnan(m) & ~np.isnan(g)
    if int(valid.sum()) < 3:
        notices.append(f"{row}/{signal.value}: fewer than 3 paired samples, skipped")
        return None
    try:
        return evaluate(MetricInput(tuple(m[valid]), tuple(g[valid]), signal=signal.value))
    except (ZeroVariance, ZeroRMS) as exc:
        notices.append(f"{row}/{signal.value}: {exc}")
        return None


def build_report(
    aligned: AlignedRepetitionSet,
    signals: list[Signal],
    sync: SyncSolution,
    harmonized: bool,
    notices: list[str],
) -> CorrelationReport:
    """Metric rows for every repetition plus the mean repetition, each
    compared against the aligned simulation."""
    if aligned.simulation is None:
        raise ConfigError("aligned set carries no simulation to compare against")
    rows: list[ReportRow] = []
    for rep_id in sorted(aligned.repetitions):
        cells = {
            sig: _metric_cell(aligned.repetitions[rep_id][sig], aligned.simulation[sig],
                              sig, notices, rep_id)
            for sig in signals
        }
        rows.append(ReportRow(rep_id, cells))
    mean_cells = {
        sig: _metric_cell(aligned.mean_rep[sig], aligned.simulation[sig], sig, notices, "mean")
        for sig in signals
    }
    rows.append(ReportRow("mean", mean_cells))
    return CorrelationReport(
        scenario_id=aligned.scenario_id,
        scenario_class=sync.scenario_class.value,
        signals=signals,
        rows=rows,
        harmonized=harmonized,
        sync_formula=sync.formula.value,
        s_sync=sync.s_sync,
    )


def render_report(report: CorrelationReport, fmt: str = "md") -> str:
    if fmt == "md":
        return _render_md(report)
    if fmt == "csv":
        return _render_csv(report)
    raise ConfigError(f"unknown report format {fmt!r}")


def _render_md(report: CorrelationReport) -> str:
    lines = [f"# Correlation report: {report.scenario_id}", ""]
    lines.append(
        f"Scenario class: {report.scenario_class} | sync formula: {report.sync_formula} "
        f"| anchor distance: {report.s_sync:.2f} m"
    )
    lines.append(
        "Initial threat-distance harmonization: "
        + ("OK" if report.harmonized else "NOT-HARMONIZED")
    )
    lines.append("")
    header = ["Rep"]
    for sig in report.signals:
        header += [f"{sig.value} r", f"{sig.value} R (%)"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for row in report.rows:
        cells = [row.repetition_id]
        for sig in report.signals:
            res = row.cells.get(sig)
            if res is None:
                cells += ["n/a", "n/a"]
            else:
                star = "*" if res.significant else ""
                cells.append(f"{res.r:.2f}{star} ({res.r_band.value})")
                cells.append(f"{res.rrmse * 100:.2f} ({res.rrmse_band.value})")
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("`*` marks correlation significant at p < 0.05.")
    return "\n".join(lines) + "\n"


def _render_csv(report: CorrelationReport) -> str:
    lines = ["scenario_id,repetition,signal,n,r,p_value,rrmse,r_band,rrmse_band,significant"]
    for row in report.rows:
        for sig in report.signals:
            res = row.cells.get(sig)
            if res is None:
                continue
            lines.append(
                ",".join(
                    (
                        report.scenario_id,
                        row.repetition_id,
                        sig.value,
                        str(res.n),
                        repr(res.r),
                        repr(res.p_value),
                        repr(res.rrmse),
                        res.r_band.value,
                        res.rrmse_band.value,
                        "1" if res.significant else "0",
                    )
                )
            )
    return "\n".join(lines) + "\n"


def report_to_json(report: CorrelationReport) -> str:
    doc = {
        "scenario_id": report.scenario_id,
        "scenario_class": report.scenario_class,
        "signals": [s.value for s in report.signals],
        "harmonized": report.harmonized,
        "sync_formula": report.sync_formula,
        "s_sync": report.s_sync,
        "rows": [
            {
                "repetition_id": row.repetition_id,
                "cells": {
                    sig.value: None
                    if row.cells.get(sig) is None
                    else {
                        "n": row.cells[sig].n,
                        "r": row.cells[sig].r,
                        "p_value": row.cells[sig].p_value,
                        "rrmse": row.cells[sig].rrmse,
                        "r_band": row.cells[sig].r_band.value,
                        "rrmse_band": row.cells[sig].rrmse_band.value,
                        "significant": row.cells[sig].significant,
                    }
                    for sig in report.signals
                },
            }
            for row in report.rows
        ],
    }
    return json.dumps(doc, indent=2)


def report_from_json(text: str) -> CorrelationReport:
    from .metrics import AccuracyBand, CorrelationBand

    doc = json.loads(text)
    signals = [Signal(s) for s in doc["signals"]]
    rows = []
    for row_doc in doc["rows"]:
        cells: dict[Signal, MetricResult | None] = {}
        for sig in signals:
            cell = row_doc["cells"].get(sig.value)
            cells[sig] = (
                None
                if cell is None
                else MetricResult(
                    signal=sig.value,
                    n=int(cell["n"]),
                    r=float(cell["r"]),
                    p_value=float(cell["p_value"]),
                    rrmse=float(cell["rrmse"]),
                    r_band=CorrelationBand(cell["r_band"]),
                    rrmse_band=AccuracyBand(cell["rrmse_band"]),
                    significant=bool(cell["significant"]),
                )
            )
        rows.append(ReportRow(row_doc["repetition_id"], cells))
    return CorrelationReport(
        scenario_id=doc["scenario_id"],
        scenario_class=doc["scenario_class"],
        signals=signals,
        rows=rows,
        harmonized=bool(doc["harmonized"]),
        sync_formula=doc["sync_formula"],
        s_sync=float(doc["s_sync"]),
    )


def export_plot_data(aligned: AlignedRepetitionSet, signal: Signal | str) -> str:
    """Wide CSV of one aligned signal: grid time, one column per repetition,
    the mean repetition, and the simulation when present."""
    signal = Signal(signal)
    rep_ids = sorted(aligned.repetitions)
    header = ["t"] + [f"rep_{rid}" for rid in rep_ids] + ["mean"]
    columns = [aligned.grid] + [aligned.repetitions[rid][signal] for rid in rep_ids]
    columns.append(aligned.mean_rep[signal])
    if aligned.simulation is not None:
        header.append("sim")
        columns.append(aligned.simulation[signal])
    lines = [",".join(header)]
    for i in range(aligned.grid.size):
        cells = []
        for col in columns:
            v = float(col[i])
            cells.append("" if math.isnan(v) else repr(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _stage(name: str):
    """Decorator-free stage guard: re-raise package errors with a stage tag."""

    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, SilcorrError) and not isinstance(
                exc, PipelineStageError
            ):
                raise PipelineStageError(name, exc) from exc
            return False

    return _Guard()


def write_scenario_artifacts(artifacts: ScenarioArtifacts, out_dir: Path) -> None:
    targets_dir = out_dir / "targets"
    targets_dir.mkdir(parents=True, exist_ok=True)
    for traj in artifacts.targets:
        (targets_dir / f"{traj.actor_id}.pmc").write_text(export_pmc(traj), encoding="utf-8")


def run_scenario(config: PipelineConfig, spec_path: Path) -> ScenarioOutcome:
    """Execute the full validation chain for one scenario."""
    notices: list[str] = []

    with _stage("spec"):
        spec = ScenarioSpec.from_json(Path(spec_path).read_text(encoding="utf-8"))
        signals = select_signals(spec, config.signals)
    out_dir = config.output_dir / (spec.scenario_id or spec_path.stem)
    out_dir.mkdir(parents=True, exist_ok=True)

    with _stage("ingest"):
        track_logs = discover_track_logs(config, spec.scenario_id)
        rep_set = RepetitionSet(spec.scenario_id, spec.scenario_class, track_logs)

    with _stage("sync"):
        sync = solve_sync(rep_set, config.sync_formula)
        (out_dir / "sync.json").write_text(sync.to_json(), encoding="utf-8")
        aligned_track = align(rep_set, sync, config.grid_period)

    with _stage("tune"):
        tuning = tune_scenario(spec, aligned_track, sync, config.sensor)
        (out_dir / "refined_spec.json").write_text(tuning.spec.to_json(), encoding="utf-8")

    with _stage("generate"):
        artifacts = generate_scenario(tuning.spec, config.sample_period)
        write_scenario_artifacts(artifacts, out_dir)

    with _stage("simulate"):
        ads = AdsConfig(set_speed=tuning.set_speed, **config.ads_params)
        sim_log = simulate(
            artifacts, ads, tuning.sensor, config.sim_duration, repetition_id="sim"
        )
        save_drive_log(sim_log, out_dir / "sim_log.csv")

    with _stage("align"):
        full_set = RepetitionSet(spec.scenario_id, spec.scenario_class, track_logs, sim_log)
        sync = attach_simulation(sync, full_set)
        (out_dir / "sync.json").write_text(sync.to_json(), encoding="utf-8")
        aligned = align(full_set, sync, config.grid_period)

    with _stage("analyze"):
        sim_sd = response_distance(sim_log, spec.scenario_class)
        track_sds = [r.response_distance for r in sync.per_rep.values()]
        harmonized = min(track_sds) <= sim_sd <= max(track_sds)
        if not harmonized:
            notices.append(
                f"simulation first-threat distance {sim_sd:.2f} m outside the track "
                f"range [{min(track_sds):.2f}, {max(track_sds):.2f}] m"
            )
        report = build_report(aligned, signals, sync, harmonized, notices)

    with _stage("report"):
        (out_dir / "report.md").write_text(render_report(report, "md"), encoding="utf-8")
        (out_dir / "report.csv").write_text(render_report(report, "csv"), encoding="utf-8")
        (out_dir / "report.json").write_text(report_to_json(report), encoding="utf-8")
        plots_dir = out_dir / "plots"
        plots_dir.mkdir(exist_ok=True)
        for sig in Signal:
            if sig not in signals:
                notices.append(f"plot for {sig.value} omitted (signal not selected)")
                continue
            (plots_dir / f"{sig.value}.csv").write_text(
                export_plot_data(aligned, sig), encoding="utf-8"
            )

    return ScenarioOutcome(spec.scenario_id, report, sync, tuning, aligned, out_dir, notices)


def run_pipeline(config: PipelineConfig) -> dict[str, ScenarioOutcome]:
    """Run every configured scenario; scenarios execute on parallel workers."""
    if len(config.scenario_specs) == 1:
        outcome = run_scenario(config, config.scenario_specs[0])
        return {outcome.scenario_id: outcome}
    outcomes: dict[str, ScenarioOutcome] = {}
    with ThreadPoolExecutor(max_workers=len(config.scenario_specs)) as pool:
        futures = [pool.submit(run_scenario, config, p) for p in config.scenario_specs]
        for future in futures:
            outcome = future.result()
            outcomes[outcome.scenario_id] = outcome
    return outcomes


def with_output_dir(config: PipelineConfig, out_dir: Path | None) -> PipelineConfig:
    if out_dir is None:
        return config
    return replace(config, output_dir=Path(out_dir))
