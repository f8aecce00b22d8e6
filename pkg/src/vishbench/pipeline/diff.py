"""Token-level LCS diff between an original and an adversarial transcript."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..corpus import Transcript

KEPT, REMOVED, INSERTED = "kept", "removed", "inserted"
_MARK = {KEPT: " ", REMOVED: "-", INSERTED: "+"}


@dataclass(frozen=True)
class DiffOp:
    op: str
    token: str


def lcs_diff(a: Sequence[str], b: Sequence[str]) -> list[DiffOp]:
    """Align two token lists by longest common subsequence.

    At each divergence removals are emitted before insertions.
    """
    n, m = len(a), len(b)
    # suffix LCS lengths, so the walk can run forward
    L = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        Li, Li1 = L[i], L[i + 1]
        ai = a[i]
        for j in range(m - 1, -1, -1):
            Li[j] = Li1[j + 1] + 1 if ai == b[j] else max(Li1[j], Li[j + 1])
    ops: list[DiffOp] = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            ops.append(DiffOp(KEPT, a[i]))
            i += 1
            j += 1
        elif L[i + 1][j] >= L[i][j + 1]:
            ops.append(DiffOp(REMOVED, a[i]))
            i += 1
        else:
            ops.append(DiffOp(INSERTED, b[j]))
            j += 1
    ops += [DiffOp(REMOVED, t) for t in a[i:]]
    ops += [DiffOp(INSERTED, t) for t in b[j:]]
    return ops


def _tokens(t: Transcript) -> list[str]:
    return list(t.tokens) if t.tokens is not None else t.text.split()


def diff_report(original: Transcript, adversarial: Transcript) -> list[DiffOp]:
    a, b = _tokens(original), _tokens(adversarial)
    if not a or not b:
        raise ValueError("diff needs non-empty transcripts on both sides")
    return lcs_diff(a, b)


def render_side_by_side(ops: Sequence[DiffOp], width: int = 30) -> str:
    """Two-column text: original tokens left, adversarial right, with +/- marks."""
    lines = [f"  {'original':<{width}} | adversarial", "  " + "-" * width + "-+-" + "-" * width]
    for op in ops:
        left = op.token if op.op != INSERTED else ""
        right = op.token if op.op != REMOVED else ""
        lines.append(f"{_MARK[op.op]} {left:<{width}} | {right}")
    return "\n".join(lines) + "\n"


def diff_summary(ops: Sequence[DiffOp]) -> dict:
    return {k: sum(o.op == k for o in ops) for k in (KEPT, REMOVED, INSERTED)}
