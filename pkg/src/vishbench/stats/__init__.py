"""Rank-based significance tests for attack effectiveness."""
from .distributions import chi2_sf, gammainc_upper, normal_cdf, studentized_range_cdf
from .rank_tests import (
    FriedmanResult,
    PairedSample,
    WilcoxonResult,
    friedman,
    nemenyi,
    signed_rank_null_cdf,
    wilcoxon_one_tailed,
)
from .ranks import RankMatrix, midranks, rank_rows
from .report import AccuracyTable, TestReport, read_accuracy_csv, run_tests, stats_from_columns

__all__ = [
    "AccuracyTable", "FriedmanResult", "PairedSample", "RankMatrix", "TestReport", "WilcoxonResult",
    "chi2_sf", "friedman", "gammainc_upper", "midranks", "nemenyi", "normal_cdf", "rank_rows",
    "read_accuracy_csv", "run_tests", "signed_rank_null_cdf", "stats_from_columns",
    "studentized_range_cdf", "wilcoxon_one_tailed",
]
