"""Classification accuracy bookkeeping: confusion matrix, OA, AA, kappa."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from .errors import ShapeError, SmsbError


@dataclass(frozen=True)
class ConfusionMatrix:
    """C x C count matrix; rows are true classes, columns predictions."""

    counts: np.ndarray
    class_ids: tuple

    def __post_init__(self):
        C = len(self.class_ids)
        if self.counts.shape != (C, C):
            raise ShapeError("counts must be square and match class_ids")
        if np.any(self.counts < 0):
            raise ShapeError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.class_ids != other.class_ids:
            raise ShapeError("cannot merge confusion matrices over different classes")
        return ConfusionMatrix(self.counts + other.counts, self.class_ids)

    @staticmethod
    def from_predictions(y_true: Sequence[int], y_pred: Sequence[int], class_ids=None) -> "ConfusionMatrix":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        if y_true.shape != y_pred.shape:
            raise ShapeError("y_true and y_pred must have the same length")
        if class_ids is None:
            class_ids = tuple(sorted(set(y_true.tolist()) | set(y_pred.tolist())))
        index = {c: i for i, c in enumerate(class_ids)}
        counts = np.zeros((len(class_ids), len(class_ids)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[index[t], index[p]] += 1
        return ConfusionMatrix(counts, tuple(class_ids))


def compute_metrics(cm: ConfusionMatrix) -> Dict:
    """Overall accuracy, average accuracy, kappa and per-class recalls.

    Classes with no true samples are excluded from AA and reported as
    absent.  kappa is computed from integer counts in double precision;
    when chance agreement is exactly 1 it is defined as 1 for a perfect
    matrix and is an error otherwise.
    """
    total = cm.total
    if total == 0:
        raise SmsbError("empty confusion matrix")
    counts = cm.counts.astype(float)
    row_tot = counts.sum(axis=1)
    col_tot = counts.sum(axis=0)
    diag = np.diag(counts)

    oa = float(diag.sum() / total)
    per_class = {}
    defined = []
    for i, cid in enumerate(cm.class_ids):
        if row_tot[i] > 0:
            acc = float(diag[i] / row_tot[i])
            per_class[cid] = acc
            defined.append(acc)
        else:
            per_class[cid] = None
    aa = float(np.mean(defined))

    p_e = float((row_tot @ col_tot) / (total * total))
    if p_e >= 1.0:
        if oa == 1.0:
            kappa = 1.0
        else:
            raise SmsbError("kappa undefined: chance agreement is 1 but OA < 1")
    else:
        kappa = (oa - p_e) / (1.0 - p_e)

    return {"oa": oa, "aa": aa, "kappa": float(kappa), "per_class": per_class, "p_e": p_e}
