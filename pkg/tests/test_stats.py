from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import studentized_range

from vishbench import fixtures
from vishbench.errors import InsufficientDataError, NoInformationError, ShapeError
from vishbench.stats import (
    AccuracyTable,
    chi2_sf,
    friedman,
    nemenyi,
    rank_rows,
    read_accuracy_csv,
    run_tests,
    studentized_range_cdf,
    wilcoxon_one_tailed,
)


def oracle_midranks(values):
    """1-based mid-ranks as exact fractions: average of the tied sorted positions."""
    srt = sorted(values)
    return [Fraction(sum(i + 1 for i, v in enumerate(srt) if v == x), srt.count(x)) for x in values]


def brute_force_p(before, after):
    """P(W- <= observed) by enumerating every sign assignment of the nonzero |d| ranks."""
    d = [b - a for b, a in zip(before, after)]
    d = [round(x, 12) for x in d if round(x, 12) != 0]
    ranks = oracle_midranks([abs(x) for x in d])
    observed = sum(r for r, x in zip(ranks, d) if x < 0)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        if sum(r for r, s in zip(ranks, signs) if s) <= observed:
            hits += 1
    return Fraction(hits, 2 ** len(d))


class TestWilcoxon:
    def test_minigpt_column(self):
        t = fixtures.comparison_table()
        r = wilcoxon_one_tailed(t.original, t.adversarial[:, 0])
        assert r.W == 5 and r.n_effective == 10
        assert r.p_exact == Fraction(10, 1024)

    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_all_decreasing_columns(self, j):
        t = fixtures.comparison_table()
        r = wilcoxon_one_tailed(t.original, t.adversarial[:, j])
        assert r.W == 0 and r.p_exact == Fraction(1, 1024)

    def test_three_decreases(self):
        assert wilcoxon_one_tailed([3, 2, 5], [1, 1, 1]).p_exact == Fraction(1, 8)

    def test_zero_differences_dropped(self):
        r = wilcoxon_one_tailed([1, 2, 3, 4], [1, 1, 2, 4])
        assert r.n_effective == 2

    def test_no_information(self):
        with pytest.raises(NoInformationError):
            wilcoxon_one_tailed([0.5, 0.6], [0.5, 0.6])

    def test_normal_branch_matches_exact_trend(self):
        rng = np.random.default_rng(0)
        b = rng.random(30)
        a = b - rng.normal(0.05, 0.1, 30)
        r = wilcoxon_one_tailed(b, a)
        assert r.method == "normal" and r.p_exact is None and 0 <= r.p <= 1

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=10).filter(
        lambda xs: any(a != b for a, b in xs)))
    def test_exact_matches_enumeration_with_ties(self, pairs):
        before, after = zip(*pairs)
        assert wilcoxon_one_tailed(before, after).p_exact == brute_force_p(before, after)


class TestRanks:
    def test_paper_average_ranks(self):
        rm = rank_rows(fixtures.comparison_table().adversarial)
        assert rm.average_ranks.tolist() == pytest.approx([3.7, 2.0, 3.3, 1.0], abs=1e-12)

    def test_tied_row(self):
        assert rank_rows([[0.986301, 0.979452, 0.986301, 0.732877]]).ranks[0].tolist() == [3.5, 2, 3.5, 1]

    def test_all_equal_row(self):
        assert rank_rows([[0.5] * 4]).ranks[0].tolist() == [2.5] * 4

    def test_ragged(self):
        with pytest.raises(ShapeError):
            rank_rows([[1, 2], [1]])

    @given(st.lists(st.lists(st.integers(0, 3), min_size=4, max_size=4), min_size=1, max_size=6))
    def test_row_sums(self, rows):
        rm = rank_rows(rows)
        assert np.all(rm.ranks.sum(axis=1) == 10)


class TestFriedman:
    def test_paper_value(self):
        f = friedman(rank_rows(fixtures.comparison_table().adversarial))
        assert f.chi2_uncorrected == pytest.approx(27.48, abs=1e-9)
        assert f.chi2 == pytest.approx(28.0408, abs=1e-3)
        assert f.df == 3 and f.p <= 1e-5

    def test_identical_columns(self):
        f = friedman(rank_rows([[0.5, 0.5, 0.5]] * 4))
        assert f.chi2 == 0 and f.p == 1

    def test_three_by_three(self):
        # ranks forced to (1,2,3), (1,2,3), (1,3,2): R = (3, 7, 8)
        f = friedman(rank_rows([[1, 2, 3], [10, 20, 30], [0.1, 0.3, 0.2]]))
        n, k, R = 3, 3, [3, 7, 8]
        expected = 12 / (n * k * (k + 1)) * sum(r * r for r in R) - 3 * n * (k + 1)
        assert f.chi2 == pytest.approx(expected) and expected == pytest.approx(14 / 3)

    @settings(max_examples=50)
    @given(st.lists(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), min_size=2, max_size=6))
    def test_monotone_transform_invariance(self, rows):
        a = friedman(rank_rows(rows))
        b = friedman(rank_rows([[math.log(x) * 3 + 1 for x in r] for r in rows]))
        assert a.chi2 == pytest.approx(b.chi2, abs=1e-12)


class TestChi2:
    @pytest.mark.parametrize("df", range(1, 11))
    def test_matches_mpmath(self, df):
        for x in np.linspace(0, 50, 101):
            ref = float(mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))
            assert abs(chi2_sf(x, df) - ref) < 1e-10


class TestNemenyi:
    def test_paper_values(self):
        rep = run_tests(fixtures.comparison_table())
        assert rep.nemenyi_p("GPT-4o", "MiniGPT-4o") == pytest.approx(0.017, abs=0.005)
        assert rep.nemenyi_p("Qwen2.5", "MiniGPT-4o") < 0.001
        assert rep.nemenyi_p("Qwen2.5", "Gemini 2.0") < 0.001
        assert rep.nemenyi_p("GPT-4o", "Gemini 2.0") > 0.05

    def test_symmetric_unit_diagonal(self):
        P = nemenyi(rank_rows(fixtures.comparison_table().adversarial))
        assert np.allclose(P, P.T, atol=1e-12)
        assert np.all(np.diag(P) == 1) and np.all((P >= 0) & (P <= 1))

    def test_equal_ranks(self):
        P = nemenyi(rank_rows([[1, 1, 2], [2, 2, 1]]))
        assert P[0, 1] == 1.0

    def test_monotone_in_rank_gap(self):
        k, n = 4, 10
        ps = []
        for gap in np.linspace(0, 3, 13):
            q = gap / math.sqrt(k * (k + 1) / (6 * n))
            ps.append(1 - studentized_range_cdf(q * math.sqrt(2), k))
        assert all(b <= a + 1e-12 for a, b in zip(ps, ps[1:]))

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            nemenyi(rank_rows([[1, 2, 3]]))

    @pytest.mark.parametrize("k", [2, 3, 4, 6])
    def test_cdf_against_scipy(self, k):
        for q in (0.5, 1.5, 2.5, 3.633, 5.0):
            ref = studentized_range.cdf(q, k, 1e6)
            assert studentized_range_cdf(q, k) == pytest.approx(ref, abs=2e-5)


class TestReport:
    def test_csv_round_trip(self, tmp_path):
        t = fixtures.comparison_table()
        p = tmp_path / "acc.csv"
        p.write_text(t.to_csv(), encoding="utf-8")
        t2 = read_accuracy_csv(p)
        assert t2.attackers == t.attackers and np.allclose(t2.adversarial, t.adversarial)
        assert np.allclose(t2.original, t.original)

    def test_identity_attack_records_error(self):
        t = AccuracyTable(("a", "b", "c"), ("x", "y"), np.array([[0.9, 0.8], [0.8, 0.7], [0.7, 0.6]]),
                          np.array([0.9, 0.8, 0.7]))
        rep = run_tests(t)
        assert isinstance(rep.wilcoxon["x"], str) and "NoInformation" in rep.wilcoxon["x"]
        assert rep.to_dict()["wilcoxon"]["x"]["error"]

    def test_markdown(self):
        t = fixtures.comparison_table()
        md = run_tests(t).to_markdown(t)
        assert "| Average Acc. Drop | 3.42% | 16.16% | 7.18% | 33.83% |" in md
        assert "| Average Ranks | 3.7 | 2.0 | 3.3 | 1.0 |" in md
