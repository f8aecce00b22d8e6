from __future__ import annotations

import json
import re

import httpx
import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from vishbench.cli import main
from vishbench.corpus import Label, Transcript, write_corpus
from vishbench.errors import ConfigError, PhaseError
from vishbench.pipeline import (
    Composition,
    derive_seed,
    diff_report,
    lcs_diff,
    load_config,
    parse_config,
    render_side_by_side,
    replay_fixtures,
    run,
)
from vishbench.synthetic import synthetic_corpus


def make_run(tmp_path, n=40, **overrides):
    write_corpus(synthetic_corpus(n, 0), tmp_path / "corpus.jsonl")
    cfg = {
        "version": 1,
        "seed": 11,
        "corpus": {"paths": ["corpus.jsonl"]},
        "split": {"train": n - n // 10 - n // 4, "val": n // 10, "test": n // 4},
        "classifiers": [{"algorithm": "LogisticRegression"}, {"algorithm": "LinearSVM"},
                        {"algorithm": "DecisionTree"},
                        {"algorithm": "RandomForest", "hyperparams": {"n_trees": 20}},
                        {"algorithm": "AdaBoost"}, {"algorithm": "GradientBoosting",
                                                    "hyperparams": {"n_rounds": 30}}],
        "attack": {"backends": [{"id": "mock-a", "kind": "mock"}, {"id": "mock-b", "kind": "mock", "every": 4}]},
        "output": {"dir": "run"},
    }
    for k, v in overrides.items():
        cfg[k] = v
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


def strip_timestamps(text):
    return re.sub(r'"generated_at": "[^"]*"', "", text)


# -- diff ---------------------------------------------------------------------

class TestDiff:
    def t(self, text):
        return Transcript("x", text, Label.VISHING)

    def test_identical(self):
        ops = diff_report(self.t("a b c"), self.t("a b c"))
        assert [o.op for o in ops] == ["kept"] * 3

    def test_suffix_insertion(self):
        ops = diff_report(self.t("a b c"), self.t("a b c thanks for calling"))
        assert [o.op for o in ops] == ["kept"] * 3 + ["inserted"] * 3

    def test_single_swap(self):
        ops = diff_report(self.t("call the bank right now"), self.t("call the branch right now"))
        assert [(o.op, o.token) for o in ops] == [
            ("kept", "call"), ("kept", "the"), ("removed", "bank"), ("inserted", "branch"),
            ("kept", "right"), ("kept", "now")]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            diff_report(self.t(""), self.t("a"))

    def test_render(self):
        text = render_side_by_side(lcs_diff(["a", "b"], ["a", "c"]))
        assert "- b" in text and "+ " in text

    @given(st.lists(st.sampled_from("abcd"), max_size=9), st.lists(st.sampled_from("abcd"), max_size=9))
    def test_reconstruction_and_optimality(self, a, b):
        ops = lcs_diff(a, b)
        assert [o.token for o in ops if o.op != "inserted"] == a
        assert [o.token for o in ops if o.op != "removed"] == b
        # brute-force LCS length
        L = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
        for i in range(len(a)):
            for j in range(len(b)):
                L[i + 1][j + 1] = L[i][j] + 1 if a[i] == b[j] else max(L[i][j + 1], L[i + 1][j])
        assert sum(o.op == "kept" for o in ops) == L[-1][-1]


# -- config -------------------------------------------------------------------

class TestConfig:
    def test_loads_and_derives_seeds(self, tmp_path):
        cfg = load_config(make_run(tmp_path))
        assert cfg.composition is Composition.VISHING_ONLY
        assert cfg.split_seed == derive_seed(11, "split")
        assert cfg.classifiers[0].seed == derive_seed(11, "classifier:LogisticRegression")
        assert cfg.out_dir == tmp_path / "run"

    def test_derive_seed_stable(self):
        assert derive_seed(1, "split") == derive_seed(1, "split") != derive_seed(2, "split")
        assert 0 <= derive_seed(123, "x") < 2 ** 63

    def test_missing_corpus(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config({"corpus": {"paths": ["nope.jsonl"]}, "split": {"train": 1, "val": 0, "test": 0},
                          "attack": {"backends": [{"id": "m", "kind": "mock"}]}}, tmp_path)

    def test_needs_backend(self, tmp_path):
        path = make_run(tmp_path, attack={"backends": []})
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_key_and_version(self, tmp_path):
        path = make_run(tmp_path, extra=1)
        with pytest.raises(ConfigError):
            load_config(path)
        path = make_run(tmp_path, version=2)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_overrides(self, tmp_path):
        cfg = load_config(make_run(tmp_path), seed=5, out_dir=tmp_path / "other")
        assert cfg.seed == 5 and cfg.out_dir == tmp_path / "other"


# -- end to end ---------------------------------------------------------------

class TestRun:
    def test_smoke_sections_and_invariants(self, tmp_path):
        rep = run(load_config(make_run(tmp_path)))
        d = json.loads((tmp_path / "run/report.json").read_text())
        for key in ("versions", "config", "seeds", "test_metrics", "accuracy", "tests", "semantic", "roc",
                    "generation", "traceability"):
            assert d[key], key
        acc = d["accuracy"]
        drops = np.array(acc["original"])[:, None] - np.array(acc["adversarial"])
        for j, a in enumerate(acc["attackers"]):
            assert abs(acc["average_drop"][a] - drops[:, j].mean()) < 1e-9
        # VishingOnly: denominators equal the number of non-refused generations
        gens = [json.loads(x) for x in (tmp_path / "run/generations.jsonl").read_text().splitlines()]
        for a in acc["attackers"]:
            ok = [g["transcript_id"] for g in gens if g["attacker_id"] == a and not g["refusal_flag"]]
            assert acc["eval_counts"][a] == len(ok)
            assert sorted(d["traceability"][a]["evaluated_ids"]) == sorted(ok)
        for name in ("report.md", "tables/accuracy.csv", "tables/drops.csv", "tables/test_metrics.csv",
                     "tables/nemenyi.csv", "bertscore_hist.csv", "diffs.txt"):
            assert (tmp_path / "run" / name).exists(), name
        assert len(list((tmp_path / "run/roc").glob("*.csv"))) == 6 * 3
        assert rep.table.attackers == ("mock-a", "mock-b")

    def test_rerun_is_identical(self, tmp_path):
        path = make_run(tmp_path)
        run(load_config(path))
        first = {p.relative_to(tmp_path / "run"): p.read_bytes() for p in (tmp_path / "run").rglob("*")
                 if p.is_file() and "cache" not in p.parts}
        run(load_config(path))
        for rel, data in first.items():
            now = (tmp_path / "run" / rel).read_bytes()
            if rel.name == "report.json":
                assert strip_timestamps(now.decode()) == strip_timestamps(data.decode())
            elif rel.name == "report.md":
                assert now.split(b"\n", 3)[3] == data.split(b"\n", 3)[3]
            elif rel.name != "generations.jsonl":
                assert now == data, rel

    def test_identity_attack(self, tmp_path):
        path = make_run(tmp_path, attack={"backends": [{"id": "same", "kind": "mock", "mode": "identity"}]})
        rep = run(load_config(path))
        assert np.all(rep.table.drops == 0)
        assert "NoInformationError" in rep.tests.wilcoxon["same"]
        for s in rep.evaluation.semantic["same"]["pairs"]:
            assert s["f1"] == pytest.approx(1.0)

    def test_refusals_excluded(self, tmp_path):
        (tmp_path / "refusals.txt").write_text("# filler used by one rewrite\nfriend just got back\n",
                                               encoding="utf-8")
        path = make_run(tmp_path, attack={"refusal_patterns": "refusals.txt",
                                          "backends": [{"id": "m", "kind": "mock"}]})
        rep = run(load_config(path))
        refused = rep.evaluation.refused_ids["m"]
        total = len(rep.evaluation.generation["m"]["prompt_hashes"])
        assert 0 < len(refused) < total
        assert rep.evaluation.eval_counts["m"] == total - len(refused)
        assert set(refused).isdisjoint(rep.evaluation.evaluated_ids["m"])

    def test_mixed_composition(self, tmp_path):
        path = make_run(tmp_path, evaluation={"composition": "mixed_with_benign"})
        rep = run(load_config(path))
        ev = rep.evaluation
        assert ev.eval_counts["original"] == 10
        assert ev.eval_counts["mock-a"] == ev.eval_counts["benign_in_eval"] + len(ev.evaluated_ids["mock-a"])

    def test_phase_error(self, tmp_path):
        path = make_run(tmp_path, split={"train": 1, "val": 1, "test": 1})
        with pytest.raises(PhaseError, match=r"^\[prepare\] ConfigError"):
            run(load_config(path))

    def test_resume_after_failure(self, tmp_path):
        calls = {"n": 0, "fail": True}

        def handler(req):
            calls["n"] += 1
            if calls["fail"] and calls["n"] > 1:
                return httpx.Response(400)
            text = json.loads(req.content)["messages"][0]["content"].rsplit("\n\n", 1)[-1]
            return httpx.Response(200, json={"choices": [{"message": {"content": text + " ok"}}],
                                             "usage": {"prompt_tokens": 10, "completion_tokens": 5}})
        backend = {"id": "api", "kind": "openai", "base_url": "http://llm.test/v1", "model_name": "m",
                   "max_retries": 0, "price": {"input_per_1M_tokens": 1.0, "output_per_1M_tokens": 2.0}}
        path = make_run(tmp_path, attack={"backends": [backend], "concurrency": 1})
        kw = {"api": {"api_key": "k", "transport": httpx.MockTransport(handler)}}
        with pytest.raises(PhaseError, match=r"^\[attack\]"):
            run(load_config(path), backend_kwargs=kw)
        n_targets = calls["n"]
        assert n_targets >= 2
        calls.update(n=0, fail=False)
        rep = run(load_config(path), backend_kwargs=kw)
        assert calls["n"] == n_targets - 1  # only the generations missing from the cache
        g = rep.evaluation.generation["api"]
        assert g["n"] == n_targets
        assert g["total_cost_usd"] == pytest.approx(n_targets * (10 * 1.0 + 5 * 2.0) / 1e6)


# -- CLI ----------------------------------------------------------------------

class TestCli:
    def test_phases(self, tmp_path, capsys):
        path = str(make_run(tmp_path))
        for cmd in (["prepare"], ["train"], ["attack", "--dry-run"], ["attack", "--backend", "mock-a"],
                    ["eval"], ["stats"], ["report"]):
            assert main([*cmd, "--config", path]) == 0, cmd
        out = capsys.readouterr().out
        assert re.search(r"mock-a: \d+ generations \(0 cached, 0 refused\)", out)
        assert (tmp_path / "run/prompts.jsonl").exists() and (tmp_path / "run/report.json").exists()
        d = json.loads((tmp_path / "run/report.json").read_text())
        assert d["accuracy"]["attackers"] == ["mock-a"]

    def test_replay(self, tmp_path, capsys):
        assert main(["replay-fixtures", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "Friedman chi2 = 28.0408" in out and "(5/512)" in out
        assert (tmp_path / "tables/nemenyi.csv").exists()
        assert replay_fixtures()["full_dataset"]["max_abs_diff"] < 1e-6

    def test_stats_table(self, tmp_path, capsys):
        p = tmp_path / "acc.csv"
        p.write_text("classifier,Original,A,B\nc1,0.9,0.8,0.7\nc2,0.8,0.6,0.75\nc3,0.7,0.65,0.5\n")
        assert main(["stats", "--table", str(p)]) == 0
        assert "Average Ranks" in capsys.readouterr().out

    def test_synth_then_run(self, tmp_path, capsys):
        assert main(["synth", "--out", str(tmp_path), "--n", "40"]) == 0
        assert main(["run", "--config", str(tmp_path / "config.yaml")]) == 0
        assert (tmp_path / "run/report.json").exists()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        (tmp_path / "c.yaml").write_text("version: 1\nbogus: 1\n")
        assert main(["prepare", "--config", str(tmp_path / "c.yaml")]) == 2
        assert "configuration error" in capsys.readouterr().err
