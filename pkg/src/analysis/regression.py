"""
Log-linear popularity models fitted by ordinary least squares.

    baseline:      ln p(t_r) = g1 ln p(t_i) + g2
    with_density:  ln p(t_r) = a1 ln p(t_i) + a2 ln rho(t_i) + a3
    with_depth:    ln p(t_r) = b1 ln p(t_i) + b2 d(t_i) + b3

Depth enters linearly, not logged.
"""
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.models.cascade_models import FeatureRow, ModelCoefficients, ModelVariant
from src.models.errors import DomainError, SingularFitError, UnstableFitError

ORTHOGONALITY_TOLERANCE = 1e-8


def _predictors(variant: ModelVariant, row: FeatureRow) -> List[Optional[float]]:
    if variant == ModelVariant.BASELINE:
        return [row.ln_early, 1.0]
    if variant == ModelVariant.WITH_DENSITY:
        return [row.ln_early, row.ln_density, 1.0]
    return [row.ln_early, float(row.depth), 1.0]


def row_supports(variant: ModelVariant, row: FeatureRow) -> bool:
    """Whether a row has every input the variant needs"""
    if not row.included or row.ln_early is None or row.ln_final is None:
        return False
    return variant != ModelVariant.WITH_DENSITY or row.ln_density is not None


def usable_rows(variant: ModelVariant, rows: Iterable[FeatureRow]) -> List[FeatureRow]:
    return [r for r in rows if row_supports(variant, r)]


def design_row(variant: ModelVariant, row: FeatureRow) -> Tuple[np.ndarray, float]:
    """Predictor vector (intercept last) and ln p(t_r) target of one row"""
    if not row.included:
        raise DomainError(f"tweet {row.tweet_id} is excluded ({row.excluded_reason})")
    values = _predictors(variant, row)
    if any(v is None or not math.isfinite(v) for v in values):
        raise DomainError(f"tweet {row.tweet_id} has no finite inputs for {variant.value}: {values}")
    if row.ln_final is None or not math.isfinite(row.ln_final):
        raise DomainError(f"tweet {row.tweet_id} has no finite target")
    return np.array(values, dtype=np.float64), float(row.ln_final)


def design_matrix(variant: ModelVariant, rows: Sequence[FeatureRow]) -> Tuple[np.ndarray, np.ndarray]:
    X = np.empty((len(rows), variant.arity), dtype=np.float64)
    y = np.empty(len(rows), dtype=np.float64)
    for i, row in enumerate(rows):
        X[i], y[i] = design_row(variant, row)
    return X, y


def normal_equations(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """X^T X and X^T y with exactly rounded sums, so row order never matters"""
    k = X.shape[1]
    xtx = np.empty((k, k), dtype=np.float64)
    xty = np.empty(k, dtype=np.float64)
    for i in range(k):
        xty[i] = math.fsum(X[:, i] * y)
        for j in range(i, k):
            xtx[i, j] = xtx[j, i] = math.fsum(X[:, i] * X[:, j])
    return xtx, xty


def degenerate_column(X: np.ndarray, columns: Sequence[str]) -> Optional[str]:
    """First column, intercept checked first, that adds no rank to the ones before it"""
    if X.shape[0] == 0:
        return columns[-1]
    order = [len(columns) - 1] + list(range(len(columns) - 1))
    rank = 0
    for taken in range(1, len(order) + 1):
        new_rank = int(np.linalg.matrix_rank(X[:, order[:taken]]))
        if new_rank == rank:
            return columns[order[taken - 1]]
        rank = new_rank
    return None


def solve_partial_pivot(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> Optional[np.ndarray]:
    """Gaussian elimination with partial pivoting; None when a pivot vanishes"""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    k = len(b)
    scale = max(np.abs(a).max(), 1.0)
    for col in range(k):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot, col]) <= tol * scale:
            return None
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for r in range(col + 1, k):
            factor = a[r, col] / a[col, col]
            a[r, col:] -= factor * a[col, col:]
            b[r] -= factor * b[col]
    x = np.zeros(k, dtype=np.float64)
    for r in range(k - 1, -1, -1):
        x[r] = (b[r] - a[r, r + 1:] @ x[r + 1:]) / a[r, r]
    return x


def fit_ols(variant: ModelVariant, rows: Sequence[FeatureRow], fingerprint: Optional[str] = None) -> ModelCoefficients:
    """Least-squares coefficients of one variant via the normal equations"""
    X, y = design_matrix(variant, rows)
    column = degenerate_column(X, variant.columns)
    if column is not None:
        raise SingularFitError(variant.value, column)

    xtx, xty = normal_equations(X, y)
    coeffs = solve_partial_pivot(xtx, xty)
    if coeffs is None:
        raise SingularFitError(variant.value, degenerate_column(X, variant.columns) or variant.columns[-1])

    gradient = float(np.abs(X.T @ (y - X @ coeffs)).max())
    bound = ORTHOGONALITY_TOLERANCE * max(float(np.abs(xty).max()), 1.0)
    if not gradient <= bound:
        raise UnstableFitError(variant.value, gradient, bound)

    logger.info(f"Fitted {variant.value} on {len(rows)} rows: {', '.join(f'{c:.6f}' for c in coeffs)}")
    return ModelCoefficients(
        variant=variant,
        coeffs=tuple(float(c) for c in coeffs),
        n_train=len(rows),
        fingerprint=fingerprint,
    )


def predict(model: ModelCoefficients, row: FeatureRow, clamp_to_early: bool = False) -> float:
    """ln p(t_r) estimate; optionally never below the observed ln p(t_i)"""
    predictors, _ = design_row(model.variant, row)
    estimate = float(predictors @ np.asarray(model.coeffs))
    if clamp_to_early:
        estimate = max(estimate, float(row.ln_early))
    return estimate


def predict_popularity(model: ModelCoefficients, row: FeatureRow, clamp_to_early: bool = False) -> float:
    """p(t_r) estimate on the raw count scale"""
    return math.exp(predict(model, row, clamp_to_early))
