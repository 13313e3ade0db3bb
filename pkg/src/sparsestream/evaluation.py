"""Cross-validated KNN accuracy of selected features, and the Wilcoxon comparator."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from .data import Dataset, MaskSpec, sparsify, split_folds, stream_columns
from .errors import ValidationError
from .selector import SelectorConfig, run


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    n_selected: int
    selected: list[int]
    fallback: bool = False


@dataclass
class EvalReport:
    theta: float
    fold_accuracies: list[float]
    selected_counts: list[int]
    folds: list[FoldResult]
    config: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies))

    @property
    def fallback_folds(self) -> list[int]:
        return [f.fold for f in self.folds if f.fallback]

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "fold_accuracies": self.fold_accuracies,
            "mean": self.mean,
            "std": self.std,
            "selected_counts": self.selected_counts,
            "majority_fallback_folds": self.fallback_folds,
            "folds": [asdict(f) for f in self.folds],
            "config": self.config,
        }

    def csv_rows(self):
        for f in self.folds:
            yield self.theta, f.fold, f.accuracy, f.n_selected


@dataclass(frozen=True)
class WilcoxonResult:
    r_plus: float
    r_minus: float
    r_m: float
    z: float
    n_effective: int
    reject: bool
    critical: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _vote(labels: np.ndarray) -> int:
    classes, counts = np.unique(labels, return_counts=True)
    return int(classes[np.argmax(counts)])  # argmax takes the first, i.e. smallest, class


def knn_predict(train_X, train_y, query, k: int = 3) -> int:
    """Majority class among the ``k`` nearest training rows (Euclidean).

    Distance ties go to the lower row index; vote ties to the smaller class.
    """
    X = np.asarray(train_X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValidationError("KNN needs at least one feature")
    if not 1 <= k <= X.shape[0]:
        raise ValidationError(f"k={k} must lie in [1, {X.shape[0]}]")
    q = np.asarray(query, dtype=np.float64)
    dist = np.sqrt(((X - q) ** 2).sum(axis=1))
    nearest = np.argsort(dist, kind="stable")[:k]
    return _vote(np.asarray(train_y)[nearest])


def knn_predict_many(train_X, train_y, queries, k: int = 3) -> np.ndarray:
    return np.array([knn_predict(train_X, train_y, q, k) for q in np.asarray(queries)], dtype=np.int64)


def _scale_from_train(train: np.ndarray, test: np.ndarray):
    lo = train.min(axis=0)
    span = train.max(axis=0) - lo
    span[span == 0] = 1.0
    return (train - lo) / span, (test - lo) / span


def evaluate_fold(d: Dataset, train_idx, test_idx, fold: int, cfg: SelectorConfig,
                  theta: float, knn_k: int, seed: int) -> FoldResult:
    """Select on the masked training split, then score KNN on the complete test split."""
    train = d.subset(rows=train_idx)
    masked = sparsify(train, MaskSpec(theta, seed + fold))
    state = run(stream_columns(masked), masked.labels, cfg)
    y_test = d.labels[test_idx]
    if not state.selected:
        pred = np.full(y_test.shape, _vote(train.labels))
        return FoldResult(fold, float(np.mean(pred == y_test)), 0, [], fallback=True)
    cols = state.indices
    X_train = np.column_stack([f.values for f in state.selected])
    X_test = d.features[np.ix_(test_idx, cols)]
    if np.isnan(X_test).any():
        # source data was itself incomplete; fill from imputed training means
        X_test = np.where(np.isnan(X_test), X_train.mean(axis=0), X_test)
    X_train, X_test = _scale_from_train(X_train, X_test)
    pred = knn_predict_many(X_train, masked.labels, X_test, min(knn_k, X_train.shape[0]))
    return FoldResult(fold, float(np.mean(pred == y_test)), len(cols), cols)


def cross_validate(d: Dataset, cfg: SelectorConfig, theta: float, k_folds: int = 5,
                   knn_k: int = 3, seed: int = 0, jobs: int = 1) -> EvalReport:
    """Stratified k-fold accuracy with training data masked at rate ``theta``.

    Test rows are never masked and never seen by the selector.  Folds are
    masked with seed ``seed + fold``.
    """
    d.require_two_classes()
    if not 0.0 <= theta <= 0.9:
        raise ValidationError(f"theta must lie in [0, 0.9], got {theta}")
    if knn_k < 1:
        raise ValidationError(f"knn k must be >= 1, got {knn_k}")
    plan = split_folds(d, k_folds, seed)
    args = [
        (d, plan.train_index(f), plan.test_index(f), f, cfg, theta, knn_k, seed)
        for f in range(k_folds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate_fold, *zip(*args)))
    else:
        results = [evaluate_fold(*a) for a in args]
    results.sort(key=lambda r: r.fold)
    config = {"selector": cfg.to_dict(), "k_folds": k_folds, "knn_k": knn_k, "seed": seed}
    return EvalReport(
        theta=theta,
        fold_accuracies=[r.accuracy for r in results],
        selected_counts=[r.n_selected for r in results],
        folds=results,
        config=config,
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def critical_z(alpha_level: float) -> float:
    """Two-sided normal critical value rounded to table precision (1.64 at 0.1)."""
    return round(NormalDist().inv_cdf(1.0 - alpha_level / 2.0), 2)


def wilcoxon_z(r_m: float, n: int) -> float:
    return (r_m - n * (n + 1) / 4.0) / math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)


def wilcoxon_signed_ranks(a, b, alpha_level: float = 0.1) -> WilcoxonResult:
    """Paired signed-ranks comparison of ``a`` against ``b``.

    Zero differences are dropped; tied magnitudes share their average rank.
    ``z`` uses the smaller rank sum, so it is never positive, and the null
    is rejected when ``z < -critical_z(alpha_level)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape or a.size == 0:
        raise ValidationError(f"need two non-empty sequences of equal length, got {a.shape}, {b.shape}")
    crit = critical_z(alpha_level)
    diff = a - b
    diff = diff[diff != 0]
    n = int(diff.size)
    if n == 0:
        return WilcoxonResult(0.0, 0.0, 0.0, 0.0, 0, False, crit, degenerate=True)
    ranks = _average_ranks(np.abs(diff))
    r_plus = float(ranks[diff > 0].sum())
    r_minus = float(ranks[diff < 0].sum())
    r_m = min(r_plus, r_minus)
    z = wilcoxon_z(r_m, n)
    return WilcoxonResult(r_plus, r_minus, r_m, z, n, z < -crit, crit)
