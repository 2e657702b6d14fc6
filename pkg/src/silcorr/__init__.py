"""Scenario-based simulation/recording correlation toolchain.

Subsystems: scenario and trajectory generation (:mod:`silcorr.scenarios`),
closed-loop longitudinal simulation (:mod:`silcorr.simulator` with
:mod:`silcorr.sensors`), canonical drive logs (:mod:`silcorr.drive_logs`),
repetition synchronization and tuning (:mod:`silcorr.syncing`), correlation
metrics (:mod:`silcorr.metrics`) and the batch pipeline
(:mod:`silcorr.pipeline`, CLI in :mod:`silcorr.cli`).
"""

from .drive_logs import (
    DriveLog,
    LogSource,
    RepetitionSet,
    Signal,
    SignalSeries,
    extract_signal,
    ingest_drive_log,
    emit_drive_log,
    load_drive_log,
    save_drive_log,
)
from .metrics import (
    AccuracyBand,
    CorrelationBand,
    MetricInput,
    MetricResult,
    evaluate,
    p_value,
    pearson_r,
    rate,
    rrmse,
)
from .pipeline import (
    CorrelationReport,
    PipelineConfig,
    ScenarioOutcome,
    export_plot_data,
    render_report,
    run_pipeline,
    run_scenario,
)
from .scenarios import (
    RoadSpec,
    ScenarioArtifacts,
    ScenarioClass,
    ScenarioSpec,
    TargetTrajectory,
    TrajectorySample,
    export_pmc,
    generate_scenario,
    import_pmc,
)
from .sensors import Detection, SensorConfig, SensorFusion, TrackedObject, visibility
from .simulator import AdsConfig, EgoState, controller_step, simulate
from .syncing import (
    AlignedRepetitionSet,
    SyncFormula,
    SyncSolution,
    TuningResult,
    align,
    response_distance,
    solve_sync,
    tune_scenario,
)

__version__ = "0.1.0"
