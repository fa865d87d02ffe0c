"""
Train/test splitting, RMSE/MAE scoring, binned summaries and rank correlation
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import rankdata
from sklearn.metrics import mean_absolute_error, mean_squared_error

from src.analysis.regression import design_row, predict
from src.models.cascade_models import Bin, BinAxis, BinSummary, EvalReport, FeatureRow, ModelCoefficients
from src.models.errors import DomainError, EmptyTestSetError, SplitError, UndefinedCorrelationError


def split(rows: Sequence[FeatureRow], train_frac: float, seed: int) -> Tuple[List[FeatureRow], List[FeatureRow]]:
    """Uniform random per-tweet partition; both parts keep input order"""
    n = len(rows)
    if not 0.0 < train_frac < 1.0:
        raise SplitError(f"train_frac must lie in (0, 1), got {train_frac}")
    n_train = math.floor(n * train_frac)
    if n < 2 or n_train == 0 or n_train == n:
        raise SplitError(f"cannot split {n} rows with train_frac {train_frac}: one side would be empty")

    permutation = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(permutation[:n_train])
    test_idx = np.sort(permutation[n_train:])
    return [rows[i] for i in train_idx], [rows[i] for i in test_idx]


def error_metrics(y_true: Sequence[float], y_pred: Sequence[float]) -> Tuple[float, float]:
    """(rmse, mae) of paired values"""
    if len(y_true) == 0:
        raise EmptyTestSetError("cannot score an empty test set")
    rmse = math.sqrt(mean_squared_error(y_true, y_pred))
    mae = float(mean_absolute_error(y_true, y_pred))
    return rmse, mae


def score(
    model: ModelCoefficients,
    test_rows: Sequence[FeatureRow],
    split_seed: int,
    clamp_to_early: bool = False,
) -> EvalReport:
    """RMSE and MAE of a model over ln-popularity"""
    if not test_rows:
        raise EmptyTestSetError(f"no test rows for {model.variant.value}")
    y_true = [design_row(model.variant, row)[1] for row in test_rows]
    y_pred = [predict(model, row, clamp_to_early) for row in test_rows]
    rmse, mae = error_metrics(y_true, y_pred)
    logger.info(f"{model.variant.value}: RMSE {rmse:.4f}, MAE {mae:.4f} on {len(test_rows)} test rows")
    return EvalReport(
        variant=model.variant,
        rmse=rmse,
        mae=mae,
        n_test=len(test_rows),
        split_seed=split_seed,
        n_train=model.n_train,
        coeffs=model.coeffs,
    )


def axis_value(row: FeatureRow, axis: BinAxis) -> Optional[float]:
    if axis == BinAxis.DENSITY:
        return row.density
    return float(row.depth)


def _axis_pairs(rows: Sequence[FeatureRow], axis: BinAxis) -> Tuple[np.ndarray, np.ndarray]:
    pairs = [(axis_value(r, axis), r.final_pop) for r in rows if axis_value(r, axis) is not None]
    if not pairs:
        return np.empty(0), np.empty(0)
    values, finals = zip(*pairs)
    return np.asarray(values, dtype=np.float64), np.asarray(finals, dtype=np.float64)


def bin_summary(rows: Sequence[FeatureRow], axis: BinAxis, n_bins: int = 10) -> BinSummary:
    """Mean final popularity per bin of the axis.

    Density uses ``n_bins`` equal-width bins over [0, 1], the last one closed.
    Depth uses one bin per integer from 0 to the largest depth. Rows without
    a density value are left out of the density summary. Empty bins are kept.
    """
    if not rows:
        raise DomainError("bin_summary needs at least one row")
    values, finals = _axis_pairs(rows, axis)

    if axis == BinAxis.DENSITY:
        if n_bins < 2:
            raise DomainError(f"density binning needs at least 2 bins, got {n_bins}")
        index = np.minimum(np.floor(values * n_bins).astype(np.int64), n_bins - 1)
        edges = [(i / n_bins, (i + 1) / n_bins) for i in range(n_bins)]
    else:
        index = values.astype(np.int64)
        top = int(index.max()) if index.size else 0
        edges = [(float(d), float(d + 1)) for d in range(top + 1)]

    bins = []
    for i, (lo, hi) in enumerate(edges):
        members = finals[index == i]
        bins.append(Bin(
            bin_lo=lo,
            bin_hi=hi,
            mean_final_pop=math.fsum(members) / members.size if members.size else None,
            count=int(members.size),
        ))
    return BinSummary(axis=axis, bins=bins)


def tercile_trend(summary: BinSummary) -> Optional[Tuple[float, float]]:
    """Mean final popularity of the first and last thirds of the occupied bins"""
    occupied = [b for b in summary.bins if b.count]
    if len(occupied) < 3:
        return None
    third = max(1, len(occupied) // 3)

    def weighted(bins: List[Bin]) -> float:
        return math.fsum(b.mean_final_pop * b.count for b in bins) / sum(b.count for b in bins)

    return weighted(occupied[:third]), weighted(occupied[-third:])


def spearman(rows: Sequence[FeatureRow], axis: BinAxis) -> float:
    """Spearman rank correlation of the axis value with final popularity, average-rank ties"""
    values, finals = _axis_pairs(rows, axis)
    if values.size < 3:
        raise UndefinedCorrelationError(f"spearman on {axis.value} needs at least 3 rows, got {values.size}")
    if np.all(values == values[0]):
        raise UndefinedCorrelationError(f"{axis.value} is constant over {values.size} rows")
    if np.all(finals == finals[0]):
        raise UndefinedCorrelationError(f"final popularity is constant over {values.size} rows")
    rank_x = rankdata(values, method="average")
    rank_y = rankdata(finals, method="average")
    return float(np.corrcoef(rank_x, rank_y)[0, 1])
