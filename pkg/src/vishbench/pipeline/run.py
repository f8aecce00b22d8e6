"""Phase orchestration and report emission.

Every phase reads and writes files under the run directory, so the CLI
can execute phases one at a time and ``run`` simply chains them.
"""
from __future__ import annotations

import json
import logging
import os
import platform
import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..attack import (
    GenerationCache,
    GenerationRecord,
    build_prompt,
    cost_summary,
    generate_batch,
    prompt_hash,
    read_records,
)
from ..classify import TrainedClassifier, train
from ..corpus import Corpus, Label, Transcript, load_corpus, preprocess, split_corpus, write_corpus
from ..errors import PhaseError, VishbenchError
from ..metrics import auc, eval_rows_csv, evaluate, roc_csv, roc_points
from ..semsim import score_corpus
from ..stats import AccuracyTable, TestReport, run_tests
from ..tfidf import TfidfModel, fit
from .config import Composition, RunConfig, derive_seed
from .diff import diff_report, diff_summary, render_side_by_side

log = logging.getLogger(__name__)

PHASES = ("prepare", "train", "attack", "eval", "stats", "report")


# -- file helpers -------------------------------------------------------------

def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=False) + "\n"


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "x"


def _phase(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PhaseError:
                raise
            except (VishbenchError, OSError, ValueError, KeyError) as exc:
                raise PhaseError(name, exc) from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


# -- phase: prepare -----------------------------------------------------------

@dataclass
class Prepared:
    """Raw-text splits; tokens are recomputed on demand with the run's preprocessor."""

    train: Corpus
    val: Corpus
    test: Corpus

    def eval_set(self, composition: Composition) -> Corpus:
        if composition is Composition.VISHING_ONLY:
            return self.test.by_label(Label.VISHING)
        return self.test


@_phase("prepare")
def prepare(cfg: RunConfig) -> Prepared:
    raw = load_corpus(*cfg.corpus_paths)
    kept = preprocess(raw, cfg.preprocessor, drop_duplicates=cfg.drop_duplicates)
    ids = set(kept.ids)
    raw = Corpus(tuple(t for t in raw if t.id in ids))
    train_c, val_c, test_c = split_corpus(raw, cfg.split_spec(len(raw)))
    out = cfg.out_dir / "prepared"
    out.mkdir(parents=True, exist_ok=True)
    for name, c in (("train", train_c), ("val", val_c), ("test", test_c)):
        write_corpus(c, out / f"{name}.jsonl")
    return Prepared(train_c, val_c, test_c)


def load_prepared(cfg: RunConfig) -> Prepared:
    d = cfg.out_dir / "prepared"
    return Prepared(*(load_corpus(d / f"{n}.jsonl") for n in ("train", "val", "test")))


# -- phase: train -------------------------------------------------------------

@dataclass
class Models:
    tfidf: TfidfModel
    classifiers: dict[str, TrainedClassifier]

    def features(self, cfg: RunConfig, corpus: Corpus):
        return self.tfidf.transform_many(cfg.preprocessor.tokens_for(t) for t in corpus)


@_phase("train")
def train_models(cfg: RunConfig, prep: Prepared) -> Models:
    docs = [cfg.preprocessor.tokens_for(t) for t in prep.train]
    model = fit(docs, cfg.tfidf)
    X = model.transform_many(docs)
    y = prep.train.labels()
    out = cfg.out_dir / "models"
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "tfidf.tsv")
    trained = {}
    for spec in cfg.classifiers:
        clf = train(spec, X, y)
        clf.save(out / f"{slug(spec.label)}.json")
        trained[spec.label] = clf
    return Models(model, trained)


def load_models(cfg: RunConfig) -> Models:
    d = cfg.out_dir / "models"
    clfs = {s.label: TrainedClassifier.load(d / f"{slug(s.label)}.json") for s in cfg.classifiers}
    return Models(TfidfModel.load(d / "tfidf.tsv"), clfs)


# -- phase: attack ------------------------------------------------------------

@dataclass
class AttackResult:
    records: dict[str, list[GenerationRecord]]
    cache_hits: dict[str, int] = field(default_factory=dict)


@_phase("attack")
def attack(cfg: RunConfig, prep: Prepared, *, dry_run: bool = False, backends: list | None = None,
           backend_kwargs: dict | None = None) -> AttackResult:
    """Generate adversarial rewrites of every vishing transcript in the evaluation set.

    ``dry_run`` writes the rendered prompts and makes no backend calls.
    """
    targets = prep.eval_set(cfg.composition).by_label(Label.VISHING)
    if not len(targets):
        raise VishbenchError("evaluation set contains no vishing transcripts")
    prompts = [(t.id, build_prompt(cfg.template, t)) for t in targets]
    if dry_run:
        lines = [json.dumps({"transcript_id": tid, "prompt_hash": prompt_hash(p), "prompt": p}, ensure_ascii=False)
                 for tid, p in prompts]
        write_atomic(cfg.out_dir / "prompts.jsonl", "\n".join(lines) + "\n")
        return AttackResult({})
    cache = GenerationCache(cfg.cache_dir)
    specs = backends if backends is not None else cfg.backends
    records, hits = {}, {}
    for spec in specs:
        backend = spec.build(cfg.seed, **(backend_kwargs or {}).get(spec.id, {}))
        recs = generate_batch(backend, prompts, attacker_id=spec.id, cache=cache,
                              concurrency=cfg.concurrency, refusal_patterns=cfg.refusal_patterns)
        hits[spec.id] = sum(r.cached for r in recs)
        log.info("attacker %s: %d generations, %d from cache", spec.id, len(recs), hits[spec.id])
        records[spec.id] = recs
    lines = [json.dumps(r.to_dict(), ensure_ascii=False) for recs in records.values() for r in recs]
    write_atomic(cfg.out_dir / "generations.jsonl", "\n".join(lines) + "\n")
    return AttackResult(records, hits)


def load_generations(cfg: RunConfig) -> dict[str, list[GenerationRecord]]:
    out: dict[str, list[GenerationRecord]] = {}
    for r in read_records(cfg.out_dir / "generations.jsonl"):
        out.setdefault(r.attacker_id, []).append(r)
    return out


# -- phase: eval --------------------------------------------------------------

@dataclass
class Evaluation:
    table: AccuracyTable
    test_metrics: dict
    val_metrics: dict
    original_metrics: dict
    adversarial_metrics: dict[str, dict]
    eval_counts: dict
    evaluated_ids: dict[str, list[str]]
    refused_ids: dict[str, list[str]]
    roc: dict
    semantic: dict
    generation: dict


def _adversarial_transcripts(recs: list[GenerationRecord]) -> list[Transcript]:
    return [Transcript(r.transcript_id, r.output_text, Label.VISHING, attacker_id=r.attacker_id)
            for r in recs if not r.refusal_flag]


@_phase("eval")
def evaluate_run(cfg: RunConfig, prep: Prepared, models: Models,
                 records: dict[str, list[GenerationRecord]]) -> Evaluation:
    pre = cfg.preprocessor
    eval_set = prep.eval_set(cfg.composition)
    if not len(eval_set.by_label(Label.VISHING)):
        raise VishbenchError("evaluation set contains no vishing transcripts")
    benign = list(eval_set.by_label(Label.BENIGN))
    test_benign = list(prep.test.by_label(Label.BENIGN))
    by_id = {t.id: t for t in eval_set}
    attackers = [b.id for b in cfg.backends if records.get(b.id)]
    skipped = [b.id for b in cfg.backends if not records.get(b.id)]
    if skipped:
        log.warning("no generations for %s; left out of the evaluation", ", ".join(skipped))
    if not attackers:
        raise VishbenchError("no generation records found for any configured backend")
    out = cfg.out_dir

    def metrics_for(corpus_list):
        X = models.tfidf.transform_many(pre.tokens_for(t) for t in corpus_list)
        y = np.array([int(t.label) for t in corpus_list])
        res, scores = {}, {}
        for name, clf in models.classifiers.items():
            scores[name] = clf.decision_score(X)
            res[name] = evaluate(y, (scores[name] > clf.threshold).astype(int))
        return res, scores, y

    test_res, _, _ = metrics_for(list(prep.test))
    val_res = metrics_for(list(prep.val))[0] if len(prep.val) else {}
    orig_list = list(eval_set)
    orig_res, orig_scores, _ = metrics_for(orig_list)

    adv_res, adv_sets, refused, evaluated = {}, {}, {}, {}
    for a in attackers:
        recs = records[a]
        refused[a] = sorted(r.transcript_id for r in recs if r.refusal_flag)
        advs = _adversarial_transcripts(recs)
        unknown = [t.id for t in advs if t.id not in by_id]
        if unknown:
            raise VishbenchError(f"attacker {a}: generations for ids outside the evaluation set: {unknown[:3]}")
        adv_sets[a] = advs
        evaluated[a] = [t.id for t in advs]
        lst = benign + advs
        if not advs:
            raise VishbenchError(f"attacker {a}: every generation was refused")
        adv_res[a] = metrics_for(lst)[0]

    names = list(models.classifiers)
    table = AccuracyTable(
        tuple(names), tuple(attackers),
        np.array([[adv_res[a][n].accuracy for a in attackers] for n in names]),
        np.array([orig_res[n].accuracy for n in names]),
    )
    counts = {"original": len(orig_list), "benign_in_eval": len(benign),
              **{a: len(benign) + len(adv_sets[a]) for a in attackers}}

    # ROC over test benign plus the vishing side, original or adversarial
    roc = {}
    if test_benign:
        sides = {"original": [by_id[t.id] for t in eval_set if t.label == Label.VISHING]}
        sides.update({a: adv_sets[a] for a in attackers})
        for side, vish in sides.items():
            lst = test_benign + list(vish)
            X = models.tfidf.transform_many(pre.tokens_for(t) for t in lst)
            y = [int(t.label) for t in lst]
            for name, clf in models.classifiers.items():
                pts = roc_points(clf.decision_score(X), y)
                fname = f"roc/{slug(name)}__{slug(side)}.csv"
                write_atomic(out / fname, roc_csv(pts))
                roc.setdefault(name, {})[side] = {"auc": auc(pts), "file": fname}
    else:
        log.warning("test split has no benign transcripts; ROC skipped")

    # semantic preservation
    provider = cfg.embedding_provider()
    semantic, hist_rows, pair_rows = {}, ["attacker,bin_low,bin_high,count"], ["attacker,id,precision,recall,f1"]
    diffs = []
    for a in attackers:
        pairs, skipped = [], []
        for adv in adv_sets[a]:
            o, d = pre.apply(by_id[adv.id]), pre.apply(adv)
            (pairs if o.tokens and d.tokens else skipped).append((o, d))
        cs = score_corpus(pairs, provider, bin_width=cfg.hist_bin_width) if pairs else None
        f1s = [s.f1 for s in cs.scores] if cs else []
        semantic[a] = {
            "n_pairs": len(pairs),
            "skipped_empty": [o.id for o, _ in skipped],
            "mean": {k: (float(np.mean([getattr(s, k) for s in cs.scores])) if cs else None)
                     for k in ("precision", "recall", "f1")},
            "f1_min": min(f1s) if f1s else None,
            "f1_max": max(f1s) if f1s else None,
            "histogram": None if cs is None else {
                "bin_width": cs.histogram.bin_width, "edges": cs.histogram.edges,
                "counts": cs.histogram.counts, "below_range": cs.histogram.below_range},
            "pairs": [] if cs is None else [{"id": i, **s.to_dict()} for i, s in zip(cs.ids, cs.scores)],
            "meta": {} if cs is None else cs.meta,
        }
        if cs:
            for lo, hi, c in zip(cs.histogram.edges, cs.histogram.edges[1:], cs.histogram.counts):
                hist_rows.append(f"{a},{lo:.4f},{hi:.4f},{c}")
            if cs.histogram.below_range:
                hist_rows.append(f"{a},-inf,0.0000,{cs.histogram.below_range}")
            pair_rows += [f"{a},{i},{s.precision:.6f},{s.recall:.6f},{s.f1:.6f}" for i, s in zip(cs.ids, cs.scores)]
        for o, d in pairs[: cfg.diff_samples]:
            ops = diff_report(o, d)
            diffs.append(f"== {a} / {o.id} {diff_summary(ops)}\n" + render_side_by_side(ops))
    write_atomic(out / "bertscore_hist.csv", "\n".join(hist_rows) + "\n")
    write_atomic(out / "bertscore_pairs.csv", "\n".join(pair_rows) + "\n")
    write_atomic(out / "diffs.txt", "\n".join(diffs))

    generation = {}
    for a in attackers:
        summ = cost_summary(records[a])
        recs = records[a]
        summ["model_name"] = recs[0].model_name if recs else None
        summ["prompt_hashes"] = {r.transcript_id: r.prompt_hash for r in recs}
        generation[a] = summ

    write_atomic(out / "tables/accuracy.csv", table.to_csv())
    write_atomic(out / "tables/test_metrics.csv", eval_rows_csv(test_res))
    if val_res:
        write_atomic(out / "tables/val_metrics.csv", eval_rows_csv(val_res))
    write_atomic(out / "tables/eval_original.csv", eval_rows_csv(orig_res))
    for a in attackers:
        write_atomic(out / f"tables/eval_{slug(a)}.csv", eval_rows_csv(adv_res[a]))
    drops = table.drops
    drop_rows = ["classifier," + ",".join(attackers)]
    drop_rows += [f"{n}," + ",".join(f"{v:.6f}" for v in drops[i]) for i, n in enumerate(names)]
    drop_rows.append("average," + ",".join(f"{v:.6f}" for v in table.average_drops))
    write_atomic(out / "tables/drops.csv", "\n".join(drop_rows) + "\n")

    return Evaluation(
        table=table,
        test_metrics={n: r.to_dict() for n, r in test_res.items()},
        val_metrics={n: r.to_dict() for n, r in val_res.items()},
        original_metrics={n: r.to_dict() for n, r in orig_res.items()},
        adversarial_metrics={a: {n: r.to_dict() for n, r in adv_res[a].items()} for a in attackers},
        eval_counts=counts,
        evaluated_ids=evaluated,
        refused_ids=refused,
        roc=roc,
        semantic=semantic,
        generation=generation,
    )


# -- phase: stats -------------------------------------------------------------

@_phase("stats")
def stats_phase(table: AccuracyTable, out_dir: str | Path | None = None, alpha: float = 0.05) -> TestReport:
    rep = run_tests(table, alpha)
    if out_dir is not None:
        out = Path(out_dir)
        write_atomic(out / "tables/test_report.json", _json(rep.to_dict()))
        write_atomic(out / "tables/nemenyi.csv", rep.nemenyi_csv())
        write_atomic(out / "tables/test_report.md", rep.to_markdown(table))
    return rep


# -- report -------------------------------------------------------------------

@dataclass
class RunReport:
    evaluation: Evaluation
    tests: TestReport
    config: dict
    seeds: dict
    generated_at: str

    @property
    def table(self) -> AccuracyTable:
        return self.evaluation.table

    def to_dict(self) -> dict:
        ev, t = self.evaluation, self.table
        return {
            "generated_at": self.generated_at,
            "versions": versions(),
            "config": self.config,
            "seeds": self.seeds,
            "test_metrics": ev.test_metrics,
            "val_metrics": ev.val_metrics,
            "accuracy": {
                "classifiers": list(t.classifiers),
                "attackers": list(t.attackers),
                "original": t.original.tolist(),
                "adversarial": t.adversarial.tolist(),
                "drops": t.drops.tolist(),
                "average_drop": dict(zip(t.attackers, t.average_drops.tolist())),
                "eval_counts": ev.eval_counts,
            },
            "original_metrics": ev.original_metrics,
            "adversarial_metrics": ev.adversarial_metrics,
            "tests": self.tests.to_dict(),
            "semantic": ev.semantic,
            "roc": ev.roc,
            "generation": ev.generation,
            "traceability": {a: {"evaluated_ids": ev.evaluated_ids[a], "refused_ids": ev.refused_ids[a]}
                             for a in t.attackers},
        }

    def to_markdown(self) -> str:
        ev, t = self.evaluation, self.table
        lines = [f"# Run report", "", f"Generated {self.generated_at}", "",
                 "## Test-split metrics", "", "| Classifier | Accuracy | Precision | Recall | F1 |", "|---|---|---|---|---|"]
        for n, m in ev.test_metrics.items():
            lines.append(f"| {n} | {m['accuracy']:.4f} | {m['precision']:.4f} | {m['recall']:.4f} | {m['f1']:.4f} |")
        lines += ["", "## Accuracy under attack", "",
                  "| Classifier | Original | " + " | ".join(t.attackers) + " |",
                  "|---" * (len(t.attackers) + 2) + "|"]
        for i, n in enumerate(t.classifiers):
            lines.append(f"| {n} | {t.original[i]:.4f} | " + " | ".join(f"{v:.4f}" for v in t.adversarial[i]) + " |")
        lines += ["", "## Significance", "", self.tests.to_markdown(t).rstrip(), "", "## Semantic similarity", "",
                  "| Attacker | pairs | mean P | mean R | mean F1 |", "|---|---|---|---|---|"]
        for a, s in ev.semantic.items():
            m = s["mean"]
            cells = [f"{m[k]:.4f}" if m[k] is not None else "n/a" for k in ("precision", "recall", "f1")]
            lines.append(f"| {a} | {s['n_pairs']} | " + " | ".join(cells) + " |")
        lines += ["", "## Generation cost and latency", "",
                  "| Attacker | n | refusals | total cost (USD) | mean cost (USD) | mean latency (s) |",
                  "|---|---|---|---|---|---|"]
        for a, g in ev.generation.items():
            mc = "n/a" if g["mean_cost_usd"] is None else f"{g['mean_cost_usd']:.6f}"
            ml = "n/a" if g["mean_latency_s"] is None else f"{g['mean_latency_s']:.3f}"
            lines.append(f"| {a} | {g['n']} | {g['refusals']} | {g['total_cost_usd']:.6f} | {mc} | {ml} |")
        if ev.roc:
            lines += ["", "## ROC AUC", "", "| Classifier | " + " | ".join(next(iter(ev.roc.values()))) + " |",
                      "|---" * (len(next(iter(ev.roc.values()))) + 1) + "|"]
            for n, sides in ev.roc.items():
                lines.append(f"| {n} | " + " | ".join(f"{v['auc']:.4f}" for v in sides.values()) + " |")
        return "\n".join(lines) + "\n"


def versions() -> dict:
    return {"vishbench": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def seeds_used(cfg: RunConfig) -> dict:
    return {
        "global": cfg.seed,
        "split": cfg.split_seed,
        "classifiers": {s.label: s.seed for s in cfg.classifiers},
        "mock_backends": {b.id: (b.options.get("seed") if b.options.get("seed") is not None
                                 else derive_seed(cfg.seed, f"mock:{b.id}"))
                          for b in cfg.backends if b.kind == "mock"},
    }


@_phase("report")
def write_report(cfg: RunConfig, evaluation: Evaluation, tests: TestReport) -> RunReport:
    rep = RunReport(evaluation, tests, cfg.echo(), seeds_used(cfg),
                    datetime.now(timezone.utc).isoformat(timespec="seconds"))
    write_atomic(cfg.out_dir / "report.json", _json(rep.to_dict()))
    write_atomic(cfg.out_dir / "report.md", rep.to_markdown())
    return rep


def run(cfg: RunConfig, *, backend_kwargs: dict | None = None) -> RunReport:
    """All phases in order. Generations are cached, so an interrupted run resumes cheaply."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    prep = prepare(cfg)
    models = train_models(cfg, prep)
    result = attack(cfg, prep, backend_kwargs=backend_kwargs)
    ev = evaluate_run(cfg, prep, models, result.records)
    tests = stats_phase(ev.table, cfg.out_dir, cfg.alpha)
    return write_report(cfg, ev, tests)
