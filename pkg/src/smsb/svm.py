"""Multi-class soft-margin SVM trained from scratch.

Binary problems are solved by sequential minimal optimization with
maximal-violating-pair working-set selection; multi-class decisions use
one-vs-one voting as in the usual LIBSVM setup.  Hyperparameters come
from seeded stratified k-fold cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DegenerateLabelsError, ModelMismatchError

RBF = "rbf"
LINEAR = "linear"


@dataclass(frozen=True)
class Kernel:
    kind: str = RBF
    gamma: float = 1.0

    def gram(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kind == LINEAR:
            return A @ B.T
        if self.kind == RBF:
            sq = (
                np.sum(A * A, axis=1)[:, None]
                + np.sum(B * B, axis=1)[None, :]
                - 2.0 * (A @ B.T)
            )
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        raise ConfigError(f"unknown kernel {self.kind!r}")


@dataclass(frozen=True)
class BinaryClassifier:
    """One trained class pair: positive class vs negative class."""

    pos: int
    neg: int
    support_vectors: np.ndarray     # n_sv x d
    dual_coefs: np.ndarray          # alpha_i * y_i, sums to ~0
    bias: float


@dataclass(frozen=True)
class SvmModel:
    classes: tuple
    pairs: tuple                    # BinaryClassifier per unordered class pair
    kernel: Kernel
    C: float
    n_features: int


def _smo_binary(
    K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iters: int = 200000
) -> Tuple[np.ndarray, float]:
    """Solve the two-class dual on a precomputed Gram matrix.

    Returns (alpha, bias).  Stops when the maximal KKT violation over the
    selectable pairs drops below tol.
    """
    n = y.size
    alpha = np.zeros(n)
    F = np.zeros(n)                 # decision values without bias
    E = F - y                       # prediction errors
    for _ in range(max_iters):
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        neg_E = -E
        i = np.flatnonzero(up)[np.argmax(neg_E[up])]
        j = np.flatnonzero(low)[np.argmin(neg_E[low])]
        m_up, m_low = neg_E[i], neg_E[j]
        if m_up - m_low <= tol:
            break

        a1_old, a2_old = alpha[i], alpha[j]
        y1, y2 = y[i], y[j]
        if y1 != y2:
            L = max(0.0, a2_old - a1_old)
            H = min(C, C + a2_old - a1_old)
        else:
            L = max(0.0, a1_old + a2_old - C)
            H = min(C, a1_old + a2_old)
        if H <= L:
            # pair cannot move; nudge E to skip it would break exactness,
            # so fall back to terminating (violation is not realizable)
            break
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        a2 = np.clip(a2_old + y2 * (E[i] - E[j]) / eta, L, H)
        a1 = a1_old + y1 * y2 * (a2_old - a2)
        alpha[i], alpha[j] = a1, a2

        F += (a1 - a1_old) * y1 * K[i] + (a2 - a2_old) * y2 * K[j]
        E = F - y

    free = (alpha > 1e-8) & (alpha < C - 1e-8)
    if free.any():
        bias = float(np.mean(y[free] - F[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = np.max(-E[up]) if up.any() else 0.0
        lo = np.min(-E[low]) if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias


def svm_train(X: np.ndarray, y: Sequence[int], C: float, kernel: Kernel) -> SvmModel:
    """Train one-vs-one SVMs over every class pair present in y."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if C <= 0:
        raise ConfigError("C must be > 0")
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise DegenerateLabelsError("need at least two classes to train")

    pairs: List[BinaryClassifier] = []
    for ai in range(len(classes)):
        for bi in range(ai + 1, len(classes)):
            a, b = classes[ai], classes[bi]
            mask = (y == a) | (y == b)
            Xs = X[mask]
            ys = np.where(y[mask] == a, 1.0, -1.0)
            K = kernel.gram(Xs, Xs)
            alpha, bias = _smo_binary(K, ys, C)
            sv = alpha > 1e-12
            pairs.append(
                BinaryClassifier(
                    pos=a,
                    neg=b,
                    support_vectors=Xs[sv],
                    dual_coefs=alpha[sv] * ys[sv],
                    bias=bias,
                )
            )
    return SvmModel(
        classes=classes, pairs=tuple(pairs), kernel=kernel, C=float(C), n_features=X.shape[1]
    )


def decision_values(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """Per-pair decision values, column order matching model.pairs."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ModelMismatchError(
            f"expected {model.n_features} features, got {X.shape}"
        )
    out = np.empty((X.shape[0], len(model.pairs)))
    for c, clf in enumerate(model.pairs):
        if clf.support_vectors.size == 0:
            out[:, c] = clf.bias
            continue
        K = model.kernel.gram(X, clf.support_vectors)
        out[:, c] = K @ clf.dual_coefs + clf.bias
    return out


def svm_predict(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """Majority vote over class pairs; ties broken by summed decision values."""
    dec = decision_values(model, X)
    cls_index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((dec.shape[0], len(model.classes)), dtype=int)
    scores = np.zeros_like(votes, dtype=float)
    for c, clf in enumerate(model.pairs):
        d = dec[:, c]
        win_pos = d > 0
        votes[win_pos, cls_index[clf.pos]] += 1
        votes[~win_pos, cls_index[clf.neg]] += 1
        scores[:, cls_index[clf.pos]] += d
        scores[:, cls_index[clf.neg]] -= d
    # lexicographic: votes first, then score; argmax takes the lowest class
    # id among exact ties
    rank = votes.astype(float) + 1e-9 * np.tanh(scores)
    best = np.argmax(rank, axis=1)
    return np.asarray(model.classes)[best]


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> List[np.ndarray]:
    """Seeded stratified fold assignment; returns per-fold index arrays."""
    rng = np.random.default_rng(seed)
    buckets: List[List[int]] = [[] for _ in range(folds)]
    for c in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            buckets[pos % folds].append(int(i))
    return [np.array(sorted(b), dtype=int) for b in buckets]


def cross_validate(
    X: np.ndarray,
    y: Sequence[int],
    folds: int,
    C_grid: Sequence[float],
    gamma_grid: Sequence[float],
    kernel_kind: str = RBF,
    seed: int = 0,
) -> Tuple[float, float]:
    """Grid-search (C, gamma) by stratified k-fold accuracy.

    Ties are broken toward the smaller C, then the smaller gamma.
    """
    if folds < 2:
        raise ConfigError("folds must be >= 2")
    if not C_grid or (kernel_kind == RBF and not gamma_grid):
        raise ConfigError("empty hyperparameter grid")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    fold_idx = stratified_folds(y, folds, seed)

    if kernel_kind == LINEAR:
        gamma_grid = [1.0]

    best = None
    for C in sorted(C_grid):
        for gamma in sorted(gamma_grid):
            kern = Kernel(kind=kernel_kind, gamma=gamma)
            correct = 0
            total = 0
            for f in range(folds):
                test = fold_idx[f]
                train = np.concatenate([fold_idx[g] for g in range(folds) if g != f])
                if test.size == 0 or len(set(y[train].tolist())) < 2:
                    continue
                model = svm_train(X[train], y[train], C, kern)
                pred = svm_predict(model, X[test])
                correct += int(np.sum(pred == y[test]))
                total += test.size
            acc = correct / total if total else 0.0
            if best is None or acc > best[0] + 1e-12:
                best = (acc, C, gamma)
    return best[1], best[2]


@dataclass(frozen=True)
class FeatureScaler:
    """Per-dimension standardization fitted on training features."""

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(X: np.ndarray) -> "FeatureScaler":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return FeatureScaler(mean=mean, std=std)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std
