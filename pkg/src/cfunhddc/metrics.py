"""Agreement between predicted and reference partitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError

__all__ = ["ConfusionMatrix", "ari", "ari_clustering", "ari_outlier", "confusion", "confusion_matrix"]


def _pairs(x):
    # Python ints: exact for any n
    return sum(int(v) * (int(v) - 1) // 2 for v in x)


def ari(a, b) -> float:
    """Hubert-Arabie adjusted Rand index from exact pair counts."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise MetricError(f"partitions must be 1-d and of equal length, got {a.shape} and {b.shape}")
    n = a.size
    if n == 0:
        raise MetricError("empty partitions")
    if n == 1:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_ij = _pairs(table.ravel())
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    # numerator and denominator scaled by total to stay in integers
    num = sum_ij * total - sum_a * sum_b
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        # both partitions trivial in the same way (all-one-cluster or all-singletons)
        return 1.0
    return 2.0 * num / den


def _get(obj, *names):
    for name in names:
        if hasattr(obj, name):
            return getattr(obj, name)
    raise MetricError(f"{type(obj).__name__} has none of {names}")


def ari_clustering(result, truth) -> float:
    """ARI between predicted clusters and true classes, over true-normal curves only."""
    pred = np.asarray(_get(result, "labels"))
    labels = np.asarray(_get(truth, "labels"))
    flags = np.asarray(_get(truth, "outlier"), dtype=bool)
    if pred.shape != labels.shape:
        raise MetricError("prediction and truth differ in length")
    keep = ~flags
    if not keep.any():
        raise MetricError("no normal curves to evaluate clustering on")
    return ari(pred[keep], labels[keep])


def ari_outlier(result, truth) -> float:
    """ARI between predicted and true normal/outlier flags over every curve."""
    pred = np.asarray(_get(result, "outlier"), dtype=bool)
    ref = np.asarray(_get(truth, "outlier"), dtype=bool)
    if pred.shape != ref.shape:
        raise MetricError("prediction and truth differ in length")
    return ari(pred, ref)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Reference rows by predicted columns: (normal, outlier) x (normal, outlier)."""

    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def n(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def as_array(self) -> np.ndarray:
        return np.array([[self.tn, self.fp], [self.fn, self.tp]])

    def to_dict(self) -> dict:
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp}

    def __str__(self):
        return (
            "              pred normal  pred outlier\n"
            f"ref normal   {self.tn:>11d}  {self.fp:>12d}\n"
            f"ref outlier  {self.fn:>11d}  {self.tp:>12d}"
        )


def confusion_matrix(reference, predicted) -> ConfusionMatrix:
    ref = np.asarray(reference, dtype=bool)
    pred = np.asarray(predicted, dtype=bool)
    if ref.shape != pred.shape:
        raise MetricError("reference and predicted flags differ in length")
    return ConfusionMatrix(
        tn=int(np.sum(~ref & ~pred)),
        fp=int(np.sum(~ref & pred)),
        fn=int(np.sum(ref & ~pred)),
        tp=int(np.sum(ref & pred)),
    )


def confusion(result, truth) -> ConfusionMatrix:
    return confusion_matrix(_get(truth, "outlier"), _get(result, "outlier"))
