"""Stats-only path: replay a published accuracy matrix without training or network."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import fixtures
from ..stats import AccuracyTable, TestReport, read_accuracy_csv, run_tests
from .run import _json, write_atomic


def stats_only(table: AccuracyTable, out_dir: str | Path | None = None, alpha: float = 0.05) -> TestReport:
    rep = run_tests(table, alpha)
    if out_dir is not None:
        out = Path(out_dir)
        write_atomic(out / "tables/accuracy.csv", table.to_csv())
        write_atomic(out / "tables/nemenyi.csv", rep.nemenyi_csv())
        write_atomic(out / "tables/test_report.json", _json(rep.to_dict()))
        write_atomic(out / "tables/test_report.md", rep.to_markdown(table))
    return rep


def stats_from_csv(path: str | Path, out_dir: str | Path | None = None, alpha: float = 0.05) -> TestReport:
    return stats_only(read_accuracy_csv(path), out_dir, alpha)


def replay_fixtures(out_dir: str | Path | None = None) -> dict:
    """Recompute every derived statistic of the published comparison tables."""
    table = fixtures.comparison_table()
    rep = stats_only(table, out_dir)
    full = fixtures.gpt4o_full_table()
    recomputed = full.drops[:, 0]
    published = fixtures.gpt4o_published_drops()
    result = {
        "comparison": {
            "average_drop": dict(zip(table.attackers, table.average_drops.tolist())),
            "tests": rep.to_dict(),
        },
        "full_dataset": {
            "classifiers": list(full.classifiers),
            "recomputed_drop": recomputed.tolist(),
            "published_drop": published.tolist(),
            "max_abs_diff": float(np.max(np.abs(recomputed - published))),
            "wilcoxon": run_tests(full).wilcoxon["GPT-4o"].to_dict(),
        },
        "published_reference": dict(fixtures.PUBLISHED),
    }
    if out_dir is not None:
        out = Path(out_dir)
        write_atomic(out / "tables/full_dataset.csv", full.to_csv())
        write_atomic(out / "replay.json", _json(result))
    return result
