"""Command-line entry point.

Verbs: generate, simulate, ingest, sync, tune, analyze, run, report.
Every verb takes --config pointing at a JSON pipeline configuration; the
SILCORR_OUT environment variable or --out overrides the output directory.
Exit codes: 0 success, 2 validation error, 3 analysis error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .drive_logs import RepetitionSet, save_drive_log
from .errors import PipelineStageError, SilcorrError
from .pipeline import (
    VALIDATION_STAGES,
    PipelineConfig,
    build_report,
    discover_track_logs,
    render_report,
    report_from_json,
    run_pipeline,
    select_signals,
    with_output_dir,
    write_scenario_artifacts,
)
from .scenarios import ScenarioSpec, generate_scenario
from .simulator import AdsConfig, simulate
from .syncing import align, attach_simulation, solve_sync, tune_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ANALYSIS = 3


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_json(Path(args.config))
    out = os.environ.get("SILCORR_OUT") or args.out
    return with_output_dir(config, Path(out) if out else None)


def _each_spec(config: PipelineConfig):
    for path in config.scenario_specs:
        spec = ScenarioSpec.from_json(path.read_text(encoding="utf-8"))
        yield path, spec


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for path, spec in _each_spec(config):
        artifacts = generate_scenario(spec, config.sample_period)
        out_dir = config.output_dir / (spec.scenario_id or path.stem)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_scenario_artifacts(artifacts, out_dir)
        print(f"{spec.scenario_id}: wrote {len(artifacts.targets)} target trajectory file(s)")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for path, spec in _each_spec(config):
        artifacts = generate_scenario(spec, config.sample_period)
        ads = AdsConfig(set_speed=spec.ads_init_speed / 3.6, **config.ads_params)
        log = simulate(artifacts, ads, config.sensor, config.sim_duration)
        out_dir = config.output_dir / (spec.scenario_id or path.stem)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_drive_log(log, out_dir / "sim_log.csv")
        print(f"{spec.scenario_id}: simulated {log.t[-1]:.1f} s, "
              f"collision={'yes' if log.collision_flag else 'no'}")
    return EXIT_OK


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for _, spec in _each_spec(config):
        logs = discover_track_logs(config, spec.scenario_id)
        reps = ", ".join(log.repetition_id for log in logs)
        print(f"{spec.scenario_id}: {len(logs)} valid track log(s): {reps}")
    return EXIT_OK


def _cmd_sync(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for _, spec in _each_spec(config):
        logs = discover_track_logs(config, spec.scenario_id)
        rep_set = RepetitionSet(spec.scenario_id, spec.scenario_class, logs)
        sol = solve_sync(rep_set, config.sync_formula)
        out_dir = config.output_dir / spec.scenario_id
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sync.json").write_text(sol.to_json(), encoding="utf-8")
        print(f"{spec.scenario_id}: S_min={sol.s_min:.2f} m, S_at={sol.s_at:.2f} m, "
              f"S_sync={sol.s_sync:.2f} m ({sol.formula.value})")
    return EXIT_OK


def _cmd_tune(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for _, spec in _each_spec(config):
        logs = discover_track_logs(config, spec.scenario_id)
        rep_set = RepetitionSet(spec.scenario_id, spec.scenario_class, logs)
        sol = solve_sync(rep_set, config.sync_formula)
        aligned = align(rep_set, sol, config.grid_period)
        tuning = tune_scenario(spec, aligned, sol, config.sensor)
        out_dir = config.output_dir / spec.scenario_id
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sync.json").write_text(sol.to_json(), encoding="utf-8")
        (out_dir / "refined_spec.json").write_text(tuning.spec.to_json(), encoding="utf-8")
        print(f"{spec.scenario_id}: set speed {tuning.set_speed:.3f} m/s, "
              f"sensor range {tuning.sensor.max_range:.1f} m")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    """Re-run sync + metrics against an existing sim_log.csv (no re-simulation)."""
    from .drive_logs import load_drive_log
    from .syncing import response_distance

    config = _load_config(args)
    for _, spec in _each_spec(config):
        signals = select_signals(spec, config.signals)
        out_dir = config.output_dir / spec.scenario_id
        sim_path = out_dir / "sim_log.csv"
        if not sim_path.exists():
            print(f"{spec.scenario_id}: no sim_log.csv under {out_dir}; "
                  f"run 'simulate' or 'run' first", file=sys.stderr)
            return EXIT_VALIDATION
        sim_log = load_drive_log(sim_path)
        logs = discover_track_logs(config, spec.scenario_id)
        rep_set = RepetitionSet(spec.scenario_id, spec.scenario_class, logs, sim_log)
        sol = attach_simulation(solve_sync(rep_set, config.sync_formula), rep_set)
        aligned = align(rep_set, sol, config.grid_period)
        sds = [r.response_distance for r in sol.per_rep.values()]
        sim_sd = response_distance(sim_log, spec.scenario_class)
        harmonized = min(sds) <= sim_sd <= max(sds)
        report = build_report(aligned, signals, sol, harmonized, [])
        (out_dir / "report.md").write_text(render_report(report, "md"), encoding="utf-8")
        (out_dir / "report.csv").write_text(render_report(report, "csv"), encoding="utf-8")
        print(f"{spec.scenario_id}: report with {len(report.rows)} rows "
              f"({'harmonized' if harmonized else 'NOT-HARMONIZED'})")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    outcomes = run_pipeline(config)
    for scenario_id, outcome in sorted(outcomes.items()):
        print(f"{scenario_id}: report at {outcome.out_dir / 'report.md'}")
        for note in outcome.notices:
            print(f"  note: {note}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for _, spec in _each_spec(config):
        out_dir = config.output_dir / spec.scenario_id
        json_path = out_dir / "report.json"
        if not json_path.exists():
            print(f"{spec.scenario_id}: no report.json under {out_dir}", file=sys.stderr)
            return EXIT_VALIDATION
        report = report_from_json(json_path.read_text(encoding="utf-8"))
        (out_dir / "report.md").write_text(render_report(report, "md"), encoding="utf-8")
        (out_dir / "report.csv").write_text(render_report(report, "csv"), encoding="utf-8")
        print(f"{spec.scenario_id}: re-rendered report.md and report.csv")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "sync": _cmd_sync,
    "tune": _cmd_tune,
    "analyze": _cmd_analyze,
    "run": _cmd_run,
    "report": _cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="silcorr",
        description="Scenario simulation vs. track recording correlation toolchain",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__ or name)
        p.add_argument("--config", required=True, help="pipeline configuration JSON")
        p.add_argument("--out", default=None, help="override the output directory")
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if exc.stage in VALIDATION_STAGES else EXIT_ANALYSIS
    except SilcorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON document: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
