"""Paired t-tests over learning curves and the win/tie/loss summaries."""
import math

import numpy as np
import pytest

from cotest.errors import ComparisonError
from cotest.harness.stats import (
    ComparisonReport,
    LearningCurve,
    PointComparison,
    Verdict,
    compare_point,
    comparison_indices,
    paired_t_test,
    read_curves,
    summarize,
    summary_csv,
    summary_text,
    t_cdf,
    t_quantile,
    write_curves,
)

SCHEDULE = [150 + 10 * e for e in range(1, 41)]


def curves(name, folds=10, shift=0.0, schedule=SCHEDULE):
    out = []
    for f in range(folds):
        accuracies = [0.5 + 0.01 * i + 0.001 * f for i in range(len(schedule))]
        out.append(LearningCurve(name, str(f), tuple((c, min(1.0, a + shift)) for c, a in zip(schedule, accuracies))))
    return out


def report(verdicts, a="cotest", b="random"):
    points = [
        PointComparison(labeled_count=i, mean_difference=0.0, p_value=1.0, verdict=v) for i, v in enumerate(verdicts)
    ]
    return ComparisonReport(algorithm_a=a, algorithm_b=b, alpha=0.05, folds=10, points=points)


class TestTDistribution:
    @pytest.mark.parametrize("df,critical", [(9, 2.262), (19, 2.093), (4, 2.776)])
    def test_tabled_critical_values(self, df, critical):
        assert t_quantile(0.975, df) == pytest.approx(critical, abs=1e-3)
        assert t_cdf(critical, df) == pytest.approx(0.975, abs=1e-4)

    def test_symmetry(self):
        assert t_cdf(0.0, 9) == pytest.approx(0.5)
        assert t_cdf(-1.3, 9) == pytest.approx(1.0 - t_cdf(1.3, 9))
        assert t_quantile(0.025, 9) == pytest.approx(-t_quantile(0.975, 9))

    def test_infinite_statistic(self):
        assert t_cdf(math.inf, 5) == 1.0
        assert t_cdf(-math.inf, 5) == 0.0

    def test_quantile_inverts_cdf(self):
        for q in (0.01, 0.3, 0.9, 0.999):
            assert t_cdf(t_quantile(q, 7), 7) == pytest.approx(q, abs=1e-8)

    def test_quantile_level_range(self):
        with pytest.raises(ValueError):
            t_quantile(1.0, 9)


def _diffs(t, n=10):
    """Differences with sample sd 1 and t statistic ``t``."""
    z = np.array([1.0, -1.0] * (n // 2))
    z /= z.std(ddof=1)
    return t / math.sqrt(n) + z


class TestComparePoint:
    def test_threshold_at_nine_degrees_of_freedom(self):
        assert compare_point(_diffs(2.27), 0.05)[3] is Verdict.WIN
        assert compare_point(_diffs(2.25), 0.05)[3] is Verdict.TIE
        assert compare_point(-_diffs(2.27), 0.05)[3] is Verdict.LOSS

    def test_statistic(self):
        mean, t, p, _ = compare_point(_diffs(3.0), 0.05)
        assert mean == pytest.approx(3.0 / math.sqrt(10))
        assert t == pytest.approx(3.0)
        assert p == pytest.approx(2 * (1 - t_cdf(3.0, 9)))

    def test_constant_differences(self):
        assert compare_point([0.1] * 10, 0.05) == (pytest.approx(0.1), None, 0.0, Verdict.WIN)
        assert compare_point([-0.1] * 10, 0.05)[3] is Verdict.LOSS
        assert compare_point([0.0] * 10, 0.05) == (0.0, None, 1.0, Verdict.TIE)


class TestPairedTTest:
    def test_identical_curves_tie_everywhere(self):
        rep = paired_t_test(curves("a"), curves("b"), points="all")
        assert (rep.losses, rep.ties, rep.wins) == (0, 40, 0)
        assert all(p.t_statistic is None for p in rep.points)

    def test_uniform_improvement_wins_second_half(self):
        rep = paired_t_test(curves("a", shift=0.1), curves("b"))
        assert (rep.losses, rep.ties, rep.wins) == (0, 0, 20)
        assert [p.labeled_count for p in rep.points] == SCHEDULE[20:]
        assert rep.algorithm_a == "a" and rep.folds == 10

    def test_explicit_points(self):
        rep = paired_t_test(curves("a"), curves("b"), points=[3, 1, 1])
        assert [p.labeled_count for p in rep.points] == [SCHEDULE[1], SCHEDULE[3]]
        with pytest.raises(ComparisonError):
            paired_t_test(curves("a"), curves("b"), points=[40])

    def test_fold_mismatch(self):
        with pytest.raises(ComparisonError, match="fold structures"):
            paired_t_test(curves("a", folds=10), curves("b", folds=9))

    def test_schedule_mismatch(self):
        other = [181 + e for e in range(40)]
        with pytest.raises(ComparisonError, match="schedules"):
            paired_t_test(curves("a"), curves("b", schedule=other))

    def test_needs_two_folds(self):
        with pytest.raises(ComparisonError):
            paired_t_test(curves("a", folds=1), curves("b", folds=1))

    def test_report_round_trip(self, tmp_path):
        rep = paired_t_test(curves("a", shift=0.1), curves("b"))
        rep.save(tmp_path / "r.json")
        assert ComparisonReport.load(tmp_path / "r.json") == rep


def test_comparison_indices():
    assert comparison_indices(40, "second-half") == list(range(20, 40))
    assert comparison_indices(5, "second-half") == [2, 3, 4]
    assert comparison_indices(3, "all") == [0, 1, 2]


class TestSummaries:
    def test_single_report(self):
        (row,) = summarize([report([Verdict.WIN] * 19)])
        assert (row.losses, row.ties, row.wins) == (0, 0, 19)

    def test_reports_add_up(self):
        rows = summarize([report([Verdict.WIN] * 19), report([Verdict.TIE] * 2 + [Verdict.WIN] * 17)])
        assert len(rows) == 1
        assert (rows[0].losses, rows[0].ties, rows[0].wins) == (0, 2, 36)

    def test_all_ties(self):
        (row,) = summarize([report([Verdict.TIE] * 21)])
        assert (row.losses, row.ties, row.wins) == (0, 21, 0)

    def test_pairs_stay_separate(self):
        rows = summarize([report([Verdict.WIN]), report([Verdict.LOSS], b="qbag")])
        assert [(r.algorithm_b, r.wins, r.losses) for r in rows] == [("random", 1, 0), ("qbag", 0, 1)]

    def test_nothing_to_summarize(self):
        with pytest.raises(ComparisonError):
            summarize([])

    def test_csv_and_text(self):
        rows = summarize([report([Verdict.TIE] * 2 + [Verdict.WIN] * 17)])
        assert summary_csv(rows) == "algorithm_a,algorithm_b,loss,tie,win\ncotest,random,0,2,17\n"
        text = summary_text(rows)
        assert text.splitlines()[0].startswith("Comparison")
        assert "cotest vs random" in text


class TestCurveFiles:
    def test_write_then_read(self, tmp_path):
        original = curves("a", folds=2, schedule=[6, 7, 8])
        write_curves(original, tmp_path / "c.csv")
        loaded = read_curves(tmp_path / "c.csv")
        assert [(c.algorithm, c.fold, c.labeled_counts) for c in loaded] == [("a", "0", [6, 7, 8]), ("a", "1", [6, 7, 8])]
        for got, want in zip(loaded, original):
            np.testing.assert_allclose(got.accuracies, want.accuracies, atol=1e-6)

    def test_bad_columns(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("alg,fold,n,acc\na,0,1,0.5\n", encoding="utf-8")
        with pytest.raises(ComparisonError, match="expected columns"):
            read_curves(path)

    def test_counts_must_increase(self):
        with pytest.raises(ValueError):
            LearningCurve("a", "0", ((5, 0.5), (5, 0.6)))
