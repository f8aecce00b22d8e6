"""Accuracy tables and the consolidated statistical test report."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ShapeError, VishbenchError
from .rank_tests import FriedmanResult, WilcoxonResult, friedman, nemenyi, wilcoxon_one_tailed
from .ranks import RankMatrix, rank_rows

ORIGINAL_COLUMN = "original"


@dataclass(frozen=True)
class AccuracyTable:
    """Per-classifier original accuracy plus one adversarial column per attacker."""

    classifiers: tuple[str, ...]
    attackers: tuple[str, ...]
    adversarial: np.ndarray
    original: np.ndarray | None = None

    def __post_init__(self):
        adv = np.asarray(self.adversarial, dtype=np.float64)
        if adv.shape != (len(self.classifiers), len(self.attackers)):
            raise ShapeError(f"adversarial matrix shape {adv.shape} does not match labels")
        object.__setattr__(self, "adversarial", adv)
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        object.__setattr__(self, "attackers", tuple(self.attackers))
        if self.original is not None:
            orig = np.asarray(self.original, dtype=np.float64)
            if orig.shape != (len(self.classifiers),):
                raise ShapeError("original column length does not match classifiers")
            object.__setattr__(self, "original", orig)

    @property
    def drops(self) -> np.ndarray:
        if self.original is None:
            raise ShapeError("table has no original-accuracy column")
        return self.original[:, None] - self.adversarial

    @property
    def average_drops(self) -> np.ndarray:
        return self.drops.mean(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["classifier"] + ([ORIGINAL_COLUMN] if self.original is not None else []) + list(self.attackers)
        w.writerow(head)
        for i, name in enumerate(self.classifiers):
            row = [name]
            if self.original is not None:
                row.append(f"{self.original[i]:.6f}")
            row += [f"{v:.6f}" for v in self.adversarial[i]]
            w.writerow(row)
        return buf.getvalue()


def read_accuracy_csv(path: str | Path) -> AccuracyTable:
    """Rows are classifiers, columns attackers; an ``original`` column is optional."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ShapeError(f"{path}: need a header and at least one row")
    header = [h.strip() for h in rows[0]]
    if any(len(r) != len(header) for r in rows[1:]):
        raise ShapeError(f"{path}: ragged rows")
    cols = header[1:]
    orig_idx = next((i for i, c in enumerate(cols) if c.lower() == ORIGINAL_COLUMN), None)
    attackers = [c for i, c in enumerate(cols) if i != orig_idx]
    names, adv, orig = [], [], []
    for r in rows[1:]:
        names.append(r[0].strip())
        vals = [float(v) for v in r[1:]]
        if orig_idx is not None:
            orig.append(vals.pop(orig_idx))
        adv.append(vals)
    return AccuracyTable(tuple(names), tuple(attackers), np.array(adv), np.array(orig) if orig_idx is not None else None)


@dataclass
class TestReport:
    attackers: tuple[str, ...]
    wilcoxon: dict[str, WilcoxonResult | str]
    rank_matrix: RankMatrix | None
    friedman: FriedmanResult | str | None
    nemenyi: np.ndarray | None
    alpha: float = 0.05
    errors: dict[str, str] = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    @property
    def average_ranks(self) -> np.ndarray | None:
        return None if self.rank_matrix is None else self.rank_matrix.average_ranks

    @property
    def friedman_significant(self) -> bool:
        return isinstance(self.friedman, FriedmanResult) and self.friedman.p < self.alpha

    def nemenyi_p(self, a: str, b: str) -> float:
        i, j = self.attackers.index(a), self.attackers.index(b)
        return float(self.nemenyi[i, j])

    def to_dict(self) -> dict:
        wil = {a: (r.to_dict() if isinstance(r, WilcoxonResult) else {"error": r}) for a, r in self.wilcoxon.items()}
        fr = self.friedman.to_dict() if isinstance(self.friedman, FriedmanResult) else (
            {"error": self.friedman} if self.friedman else None)
        if isinstance(fr, dict) and "p" in fr:
            fr["significant"] = self.friedman_significant
        return {
            "attackers": list(self.attackers),
            "alpha": self.alpha,
            "wilcoxon": wil,
            "average_ranks": None if self.average_ranks is None else dict(zip(self.attackers, self.average_ranks.tolist())),
            "friedman": fr,
            "nemenyi": None if self.nemenyi is None else {
                "attackers": list(self.attackers), "p": self.nemenyi.tolist()},
            "errors": dict(self.errors),
        }

    def nemenyi_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.attackers))
        if self.nemenyi is not None:
            for a, row in zip(self.attackers, self.nemenyi):
                w.writerow([a] + [f"{v:.6g}" for v in row])
        return buf.getvalue()

    def to_markdown(self, table: AccuracyTable | None = None) -> str:
        lines = ["| | " + " | ".join(self.attackers) + " |", "|---" * (len(self.attackers) + 1) + "|"]
        if table is not None and table.original is not None:
            lines.append("| Average Acc. Drop | " + " | ".join(f"{100 * v:.2f}%" for v in table.average_drops) + " |")
        cells = []
        for a in self.attackers:
            r = self.wilcoxon.get(a)
            cells.append(f"{r.p:.4f}" if isinstance(r, WilcoxonResult) else "n/a")
        lines.append("| Wilcoxon p-value | " + " | ".join(cells) + " |")
        if self.average_ranks is not None:
            lines.append("| Average Ranks | " + " | ".join(f"{v:.1f}" for v in self.average_ranks) + " |")
        out = "\n".join(lines) + "\n"
        if isinstance(self.friedman, FriedmanResult):
            f = self.friedman
            out += f"\nFriedman chi2 = {f.chi2:.4f} (uncorrected {f.chi2_uncorrected:.4f}), df = {f.df}, p = {f.p:.6f}\n"
        elif self.friedman:
            out += f"\nFriedman: {self.friedman}\n"
        if self.nemenyi is not None:
            out += "\nNemenyi p-values\n\n| | " + " | ".join(self.attackers) + " |\n"
            out += "|---" * (len(self.attackers) + 1) + "|\n"
            for a, row in zip(self.attackers, self.nemenyi):
                out += f"| {a} | " + " | ".join(f"{v:.4f}" for v in row) + " |\n"
        return out


def run_tests(table: AccuracyTable, alpha: float = 0.05) -> TestReport:
    """Per-attacker Wilcoxon, then Friedman and Nemenyi across attackers.

    Failures of an individual test (e.g. all differences zero) are recorded
    as strings instead of aborting the report.
    """
    wil: dict[str, WilcoxonResult | str] = {}
    errors: dict[str, str] = {}
    for j, name in enumerate(table.attackers):
        if table.original is None:
            wil[name] = "no original-accuracy column"
            continue
        try:
            wil[name] = wilcoxon_one_tailed(table.original, table.adversarial[:, j])
        except VishbenchError as exc:
            wil[name] = f"{type(exc).__name__}: {exc}"
    rm = fr = nem = None
    try:
        rm = rank_rows(table.adversarial)
        fr = friedman(rm)
        nem = nemenyi(rm)
    except VishbenchError as exc:
        errors["friedman"] = f"{type(exc).__name__}: {exc}"
        fr = fr or errors["friedman"]
    return TestReport(table.attackers, wil, rm, fr, nem, alpha, errors)


def stats_from_columns(original: Sequence[float], adversarial: Sequence[Sequence[float]],
                       attackers: Sequence[str], classifiers: Sequence[str] | None = None) -> TestReport:
    adv = np.asarray(adversarial, dtype=np.float64)
    names = classifiers or [f"c{i}" for i in range(adv.shape[0])]
    return run_tests(AccuracyTable(tuple(names), tuple(attackers), adv, np.asarray(original)))
