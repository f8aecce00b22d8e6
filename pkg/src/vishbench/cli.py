"""Command-line entry point: ``vishbench <command> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from .errors import ConfigError, VishbenchError

log = logging.getLogger("vishbench")


def _load(args):
    from .attack import PromptTemplate
    from .pipeline import load_config

    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    if getattr(args, "template", None):
        cfg.template = PromptTemplate.from_file(args.template)
    if getattr(args, "concurrency", None):
        cfg.concurrency = args.concurrency
    if getattr(args, "cache_dir", None):
        cfg.cache_dir = Path(args.cache_dir)
    if getattr(args, "backend", None):
        wanted = set(args.backend)
        missing = wanted - {b.id for b in cfg.backends}
        if missing:
            raise ConfigError(f"unknown backend id(s): {sorted(missing)}")
        cfg.backends = [b for b in cfg.backends if b.id in wanted]
    return cfg


def cmd_prepare(args):
    from .pipeline import prepare

    cfg = _load(args)
    p = prepare(cfg)
    print(f"train {len(p.train)}  val {len(p.val)}  test {len(p.test)}  -> {cfg.out_dir / 'prepared'}")


def cmd_train(args):
    from .pipeline import load_prepared, train_models

    cfg = _load(args)
    m = train_models(cfg, load_prepared(cfg))
    print(f"vocabulary {m.tfidf.dimension}; trained {', '.join(m.classifiers)}")


def cmd_attack(args):
    from .pipeline import attack, load_prepared

    cfg = _load(args)
    res = attack(cfg, load_prepared(cfg), dry_run=args.dry_run)
    if args.dry_run:
        print(f"prompts written to {cfg.out_dir / 'prompts.jsonl'}")
        return
    for a, recs in res.records.items():
        refused = sum(r.refusal_flag for r in recs)
        print(f"{a}: {len(recs)} generations ({res.cache_hits[a]} cached, {refused} refused)")


def _evaluate(cfg):
    from .pipeline import evaluate_run, load_generations, load_models, load_prepared

    return evaluate_run(cfg, load_prepared(cfg), load_models(cfg), load_generations(cfg))


def cmd_eval(args):
    cfg = _load(args)
    ev = _evaluate(cfg)
    t = ev.table
    for a, d in zip(t.attackers, t.average_drops):
        print(f"{a}: average accuracy drop {100 * d:.2f}%")


def cmd_stats(args):
    from .pipeline import stats_from_csv

    if args.table:
        out = args.out
        path = args.table
        alpha = 0.05
    else:
        cfg = _load(args)
        out, path, alpha = cfg.out_dir, cfg.out_dir / "tables/accuracy.csv", cfg.alpha
    rep = stats_from_csv(path, out, alpha)
    print(rep.to_markdown(), end="")


def cmd_report(args):
    from .pipeline import stats_phase, write_report

    cfg = _load(args)
    ev = _evaluate(cfg)
    rep = write_report(cfg, ev, stats_phase(ev.table, cfg.out_dir, cfg.alpha))
    print(f"report written to {cfg.out_dir / 'report.json'}")
    if args.verbose:
        print(rep.to_markdown(), end="")


def cmd_run(args):
    from .pipeline import run

    cfg = _load(args)
    t0 = time.perf_counter()
    rep = run(cfg)
    print(rep.to_markdown(), end="")
    print(f"\nfinished in {time.perf_counter() - t0:.1f}s; outputs in {cfg.out_dir}")


def cmd_replay(args):
    from .pipeline import replay_fixtures

    res = replay_fixtures(args.out)
    comp = res["comparison"]
    for a, d in comp["average_drop"].items():
        w = comp["tests"]["wilcoxon"][a]
        print(f"{a:>12}: average drop {100 * d:6.2f}%  Wilcoxon p = {w['p_one_tailed']:.6f} ({w['p_exact']})")
    ranks = comp["tests"]["average_ranks"]
    print("average ranks:", ", ".join(f"{a} {r:.1f}" for a, r in ranks.items()))
    f = comp["tests"]["friedman"]
    print(f"Friedman chi2 = {f['chi2']:.4f} (uncorrected {f['chi2_uncorrected']:.4f}), p = {f['p']:.3g}")
    nem = comp["tests"]["nemenyi"]
    names = nem["attackers"]
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            print(f"Nemenyi p({names[i]}, {names[j]}) = {nem['p'][i][j]:.4g}")
    print(f"full-dataset drop column max |diff| = {res['full_dataset']['max_abs_diff']:.2e}")
    if args.out:
        print(f"written to {args.out}")


def cmd_synth(args):
    import yaml

    from .corpus import write_corpus
    from .synthetic import synthetic_corpus

    out = Path(args.out or "synthetic")
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    c = synthetic_corpus(args.n, seed)
    write_corpus(c, out / "corpus.jsonl")
    n_test = max(2, args.n // 5)
    n_val = args.n // 10
    config = {
        "version": 1,
        "seed": seed,
        "corpus": {"paths": ["corpus.jsonl"], "tokenizer": "whitespace"},
        "split": {"train": args.n - n_val - n_test, "val": n_val, "test": n_test},
        "classifiers": [{"algorithm": a} for a in
                        ("LogisticRegression", "LinearSVM", "DecisionTree", "RandomForest", "AdaBoost", "GradientBoosting")],
        "attack": {"concurrency": 4, "cache_dir": "cache",
                   "backends": [{"id": "mock-a", "kind": "mock"}, {"id": "mock-b", "kind": "mock", "every": 4}]},
        "evaluation": {"composition": "vishing_only"},
        "embeddings": {"kind": "hash", "dim": 64},
        "output": {"dir": "run", "diff_samples": 2},
    }
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    print(f"wrote {len(c)} transcripts and config.yaml to {out}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (YAML)")
    common.add_argument("--seed", type=int, default=None, help="override the global seed")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vishbench", description="Adversarial robustness harness for vishing classifiers.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=fn)
        return sp

    add("prepare", cmd_prepare, "clean, deduplicate and split the corpus")
    add("train", cmd_train, "fit TF-IDF and train every configured classifier")
    sp = add("attack", cmd_attack, "generate adversarial rewrites of the evaluation vishing transcripts")
    sp.add_argument("--backend", action="append", help="restrict to this backend id (repeatable)")
    sp.add_argument("--template", help="prompt template YAML overriding the config")
    sp.add_argument("--concurrency", type=int, help="maximum in-flight requests")
    sp.add_argument("--cache-dir", help="generation cache directory")
    sp.add_argument("--dry-run", action="store_true", help="write prompts only; no backend calls")
    add("eval", cmd_eval, "score original and adversarial evaluation sets")
    sp = add("stats", cmd_stats, "significance tests on an accuracy table")
    sp.add_argument("--table", help="accuracy CSV (classifier, optional original, one column per attacker)")
    add("report", cmd_report, "evaluate, test, and write report.json / report.md")
    add("run", cmd_run, "all phases end to end")
    add("replay-fixtures", cmd_replay, "recompute the published statistics from the bundled tables")
    sp = add("synth", cmd_synth, "write a synthetic corpus and a matching mock-backend config")
    sp.add_argument("--n", type=int, default=40, help="number of transcripts")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except VishbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
