"""
Tests for splitting, error metrics, bin summaries and rank correlation
"""
import math

import numpy as np
import pytest

from src.analysis.evaluation import bin_summary, error_metrics, score, spearman, split, tercile_trend
from src.analysis.regression import fit_ols
from src.models.cascade_models import BinAxis, FeatureRow, ModelVariant
from src.models.errors import DomainError, EmptyTestSetError, SplitError, UndefinedCorrelationError
from tests.conftest import free_row


def _row(tweet_id, final_pop, density=None, depth=0):
    return FeatureRow.build(
        tweet_id=tweet_id,
        n_adopters=max(depth + 1, 2),
        early_pop=1,
        final_pop=final_pop,
        density=density,
        depth=depth,
        excluded_reason=None,
        density_floor=1e-6,
    )


class TestErrorMetrics:

    def test_symmetric_errors(self):
        rmse, mae = error_metrics([0.3, -0.3], [0.0, 0.0])
        assert rmse == pytest.approx(0.3, abs=1e-15)
        assert mae == pytest.approx(0.3, abs=1e-15)

    def test_single_miss(self):
        assert error_metrics([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]) == (0.5, 0.25)

    def test_empty(self):
        with pytest.raises(EmptyTestSetError):
            error_metrics([], [])

    def test_rmse_dominates_mae(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            y = rng.normal(size=20)
            rmse, mae = error_metrics(y, rng.normal(size=20))
            assert rmse >= mae


class TestSplit:

    def test_sizes_and_partition(self):
        rows = [free_row(f"t{i}", 0.0, 0.0) for i in range(10)]
        train, test = split(rows, 0.75, seed=42)
        assert len(train) == 7
        assert len(test) == 3
        ids = [r.tweet_id for r in train + test]
        assert sorted(ids) == sorted(r.tweet_id for r in rows)

    def test_parts_keep_input_order(self):
        rows = [free_row(f"t{i:02d}", 0.0, 0.0) for i in range(40)]
        train, test = split(rows, 0.5, seed=3)
        assert [r.tweet_id for r in train] == sorted(r.tweet_id for r in train)
        assert [r.tweet_id for r in test] == sorted(r.tweet_id for r in test)

    def test_deterministic_under_seed(self):
        rows = [free_row(f"t{i}", 0.0, 0.0) for i in range(50)]
        assert split(rows, 0.75, 1) == split(rows, 0.75, 1)
        assert split(rows, 0.75, 1) != split(rows, 0.75, 2)

    @pytest.mark.parametrize("n,frac", [(1, 0.5), (0, 0.5), (3, 0.2), (10, 1.0)])
    def test_degenerate_splits(self, n, frac):
        rows = [free_row(f"t{i}", 0.0, 0.0) for i in range(n)]
        with pytest.raises(SplitError):
            split(rows, frac, 0)


class TestScore:

    def test_exact_model_scores_zero(self):
        rows = [free_row(f"t{i}", float(i), 2.0 * i + 1.0) for i in range(20)]
        model = fit_ols(ModelVariant.BASELINE, rows)
        report = score(model, rows[:5], split_seed=9)
        assert report.rmse == pytest.approx(0.0, abs=1e-9)
        assert report.n_test == 5
        assert report.n_train == 20
        assert report.split_seed == 9
        assert report.rmse >= report.mae

    def test_invariant_under_test_row_permutation(self):
        rng = np.random.default_rng(6)
        rows = [free_row(f"t{i}", float(rng.uniform(0, 4)), float(rng.normal(1.0, 1.0)), depth=int(rng.integers(0, 5))) for i in range(60)]
        model = fit_ols(ModelVariant.WITH_DEPTH, rows[:40])
        test = rows[40:]
        reference = score(model, test, split_seed=1)
        for _ in range(5):
            shuffled = [test[i] for i in rng.permutation(len(test))]
            report = score(model, shuffled, split_seed=1)
            assert report.rmse == pytest.approx(reference.rmse, rel=1e-12)
            assert report.mae == pytest.approx(reference.mae, rel=1e-12)

    def test_empty_test_set(self):
        model = fit_ols(ModelVariant.BASELINE, [free_row(f"t{i}", float(i), float(i)) for i in range(5)])
        with pytest.raises(EmptyTestSetError):
            score(model, [], split_seed=0)


class TestBinSummary:

    def test_density_bins(self):
        rows = [_row("a", 10, 0.05), _row("b", 20, 0.07), _row("c", 4, 1.0), _row("d", 6, 0.95), _row("e", 9)]
        summary = bin_summary(rows, BinAxis.DENSITY, n_bins=10)

        assert len(summary.bins) == 10
        assert summary.bins[0].count == 2
        assert summary.bins[0].mean_final_pop == 15.0
        assert summary.bins[9].count == 2
        assert summary.bins[9].mean_final_pop == 5.0
        assert summary.bins[5].mean_final_pop is None
        assert summary.total == 4

    def test_depth_bins_cover_every_integer(self):
        rows = [_row("a", 3, depth=0), _row("b", 5, depth=3), _row("c", 7, depth=3)]
        summary = bin_summary(rows, BinAxis.DEPTH)
        assert [(b.bin_lo, b.count) for b in summary.bins] == [(0.0, 1), (1.0, 0), (2.0, 0), (3.0, 2)]
        assert summary.bins[3].mean_final_pop == 6.0

    def test_single_row(self):
        summary = bin_summary([_row("a", 3, 0.5, depth=1)], BinAxis.DENSITY)
        assert [b.count for b in summary.bins if b.count] == [1]

    def test_no_rows(self):
        with pytest.raises(DomainError):
            bin_summary([], BinAxis.DEPTH)

    def test_matches_flat_scan(self):
        rng = np.random.default_rng(12)
        rows = [_row(f"t{i}", int(rng.integers(1, 100)), float(rng.uniform(0, 1))) for i in range(300)]
        summary = bin_summary(rows, BinAxis.DENSITY, n_bins=5)
        for k, b in enumerate(summary.bins):
            members = [r.final_pop for r in rows if min(math.floor(r.density * 5), 4) == k]
            assert b.count == len(members)
            if members:
                assert b.mean_final_pop == pytest.approx(sum(members) / len(members), rel=1e-12)

    @pytest.mark.parametrize("axis", list(BinAxis))
    def test_weighted_bin_means_equal_global_mean(self, axis):
        rng = np.random.default_rng(31)
        rows = []
        for i in range(250):
            depth = int(rng.integers(0, 9))
            rows.append(_row(f"t{i}", int(rng.integers(1, 500)), float(rng.uniform(0, 1)), depth=depth))
        summary = bin_summary(rows, axis, n_bins=7)
        assert summary.total == len(rows)
        occupied = [b for b in summary.bins if b.count]
        weighted = math.fsum(b.mean_final_pop * b.count for b in occupied) / summary.total
        assert weighted == pytest.approx(sum(r.final_pop for r in rows) / len(rows), abs=1e-9)

    def test_tercile_trend(self):
        rows = [_row(f"t{i}", 100 - 10 * i, density=i / 10 + 0.01) for i in range(9)]
        first, last = tercile_trend(bin_summary(rows, BinAxis.DENSITY))
        assert first > last


class TestSpearman:

    def test_matches_rank_then_pearson(self):
        rng = np.random.default_rng(6)
        rows = [_row(f"t{i}", int(rng.integers(1, 10)), density=float(rng.integers(0, 5)) / 4) for i in range(50)]
        x = [r.density for r in rows]
        y = [r.final_pop for r in rows]

        def ranks(values):
            ordered = sorted(values)
            # average of the 1-based positions each value occupies
            return [
                (ordered.index(v) + 1 + len(ordered) - ordered[::-1].index(v)) / 2
                for v in values
            ]

        rx, ry = ranks(x), ranks(y)
        mx, my = sum(rx) / 50, sum(ry) / 50
        cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
        expected = cov / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
        assert spearman(rows, BinAxis.DENSITY) == pytest.approx(expected, abs=1e-12)

    def test_perfect_monotone(self):
        rows = [_row(f"t{i}", 10 + i, depth=i) for i in range(5)]
        assert spearman(rows, BinAxis.DEPTH) == pytest.approx(1.0)

    def test_undefined_cases(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([_row("a", 1, depth=1), _row("b", 2, depth=2)], BinAxis.DEPTH)
        with pytest.raises(UndefinedCorrelationError):
            spearman([_row(f"t{i}", i + 1, depth=2) for i in range(5)], BinAxis.DEPTH)
        with pytest.raises(UndefinedCorrelationError):
            spearman([_row(f"t{i}", 4, depth=i) for i in range(5)], BinAxis.DEPTH)
