"""End-to-end orchestration: config, phases, report, and the stats-only replay."""
from .config import BackendSpec, Composition, RunConfig, derive_seed, load_config, parse_config
from .diff import DiffOp, diff_report, lcs_diff, render_side_by_side
from .replay import replay_fixtures, stats_from_csv, stats_only
from .run import (
    PHASES,
    Evaluation,
    Models,
    Prepared,
    RunReport,
    attack,
    evaluate_run,
    load_generations,
    load_models,
    load_prepared,
    prepare,
    run,
    stats_phase,
    train_models,
    write_atomic,
    write_report,
)

__all__ = [
    "PHASES", "BackendSpec", "Composition", "DiffOp", "Evaluation", "Models", "Prepared", "RunConfig",
    "RunReport", "attack", "derive_seed", "diff_report", "evaluate_run", "lcs_diff", "load_config",
    "load_generations", "load_models", "load_prepared", "parse_config", "prepare", "render_side_by_side",
    "replay_fixtures", "run", "stats_from_csv", "stats_only", "stats_phase", "train_models",
    "write_atomic", "write_report",
]
