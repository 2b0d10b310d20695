"""Online mini-batch learning of the shared sub-dictionary.

The learner alternates lasso coding of each mini-batch with a
block-coordinate update of the atoms driven by accumulated sufficient
statistics (code covariance and data/code cross products), the usual
online scheme.  Early batches are forgotten by damping the statistics,
atoms are kept inside the unit l2 ball, and atoms that stay unused for
several batches are replaced by the currently worst-reconstructed data
column.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Union

import numpy as np

from .errors import DegenerateDataError, InsufficientDataError, NumericInputError, ShapeError
from .solver import L1, SolverConfig, code_l1

# Either a materialized s x M matrix or a zero-argument factory yielding
# s x chunk column blocks (one full pass per call).
ColumnSource = Union[np.ndarray, Callable[[], Iterable[np.ndarray]]]


@dataclass(frozen=True)
class SubDictionary:
    """s x k dictionary with atoms constrained to the unit l2 ball."""

    atoms: np.ndarray

    def __post_init__(self):
        if self.atoms.ndim != 2:
            raise ShapeError("atoms must be a 2-D matrix")
        if not np.all(np.isfinite(self.atoms)):
            raise NumericInputError("dictionary contains non-finite entries")
        norms = np.linalg.norm(self.atoms, axis=0)
        if np.any(norms > 1.0 + 1e-12):
            raise ShapeError("atom norms must be <= 1")

    @property
    def s(self) -> int:
        return int(self.atoms.shape[0])

    @property
    def k(self) -> int:
        return int(self.atoms.shape[1])


@dataclass(frozen=True)
class DictLearnConfig:
    k: int
    mu: float
    batch_size: int = 256
    epochs: int = 10
    seed: int = 0
    dead_atom_threshold: int = 5
    # batch coding can stay loose: the dictionary update only needs
    # approximate codes, and the final model re-codes with the l21 solver
    code_max_iters: int = 60
    code_kkt_tol: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _materialize(source: ColumnSource) -> np.ndarray:
    if isinstance(source, np.ndarray):
        return source
    chunks = list(source())
    if not chunks:
        raise InsufficientDataError("column source yielded no data")
    return np.concatenate(chunks, axis=1)


def train_subdictionary(source: ColumnSource, cfg: DictLearnConfig, collect_history: bool = False):
    """Fit the sub-dictionary to a stream of s-dimensional columns.

    Returns the trained SubDictionary; with collect_history=True also
    returns the per-epoch mean mini-batch objective.
    """
    Y = _materialize(source)
    s, M = Y.shape
    if M < cfg.k:
        raise InsufficientDataError(f"need at least k={cfg.k} columns, got {M}")
    col_norms = np.linalg.norm(Y, axis=0)
    if not np.any(col_norms > 0):
        raise DegenerateDataError("all data columns are zero")

    rng = np.random.default_rng(cfg.seed)

    # init from k distinct data columns, preferring non-degenerate ones;
    # exact duplicates are skipped so repeated columns cannot collapse
    # several atoms onto the same direction at the start
    candidates = np.flatnonzero(col_norms > 0)
    if candidates.size >= cfg.k:
        init_idx = list(rng.choice(candidates, size=cfg.k, replace=False))
        # repair duplicate picks (identical columns under different indices)
        # so repeated data cannot collapse several atoms onto one direction
        def _unit(j):
            return Y[:, j] / col_norms[j]

        chosen = []
        pool = None                    # drawn lazily so the clean path leaves
        for idx in init_idx:           # the RNG stream untouched
            if any(np.array_equal(_unit(idx), _unit(j)) for j in chosen):
                if pool is None:
                    pool = iter(rng.permutation(candidates))
                for alt in pool:
                    if not any(np.array_equal(_unit(alt), _unit(j)) for j in chosen):
                        idx = alt
                        break
            chosen.append(idx)
        init_idx = np.array(chosen)
    else:
        init_idx = rng.choice(M, size=cfg.k, replace=False)
    D = Y[:, init_idx].astype(float).copy()
    D /= np.maximum(np.linalg.norm(D, axis=0, keepdims=True), 1e-12)

    code_cfg = SolverConfig(
        mu=cfg.mu,
        max_iters=cfg.code_max_iters,
        regularizer=L1,
        kkt_tol=cfg.code_kkt_tol,
    )

    A = np.zeros((cfg.k, cfg.k))       # running code covariance
    Bt = np.zeros((s, cfg.k))          # running data/code cross products
    unused = np.zeros(cfg.k, dtype=int)
    history = []
    t = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(M)
        batch_objs = []
        for start in range(0, M, cfg.batch_size):
            batch = Y[:, order[start : start + cfg.batch_size]]
            t += 1
            res = code_l1(batch, D, code_cfg)
            X = res.codes
            batch_objs.append(res.objective / batch.shape[1])

            beta = 1.0 - 1.0 / t
            A = beta * A + X @ X.T
            Bt = beta * Bt + batch @ X.T

            # cyclic block-coordinate atom update with unit-ball projection
            for l in range(cfg.k):
                if A[l, l] <= 1e-12:
                    continue
                u = D[:, l] + (Bt[:, l] - D @ A[:, l]) / A[l, l]
                D[:, l] = u / max(1.0, np.linalg.norm(u))

            # dead-atom replacement
            used = np.any(X != 0.0, axis=1)
            unused[used] = 0
            unused[~used] += 1
            dead = np.flatnonzero(unused >= cfg.dead_atom_threshold)
            if dead.size:
                resid = batch - D @ X
                worst = np.argsort(-np.linalg.norm(resid, axis=0))
                for rank, l in enumerate(dead):
                    col = batch[:, worst[rank % batch.shape[1]]]
                    nrm = np.linalg.norm(col)
                    if nrm > 0:
                        D[:, l] = col / nrm
                    else:
                        D[:, l] = rng.standard_normal(s)
                        D[:, l] /= np.linalg.norm(D[:, l])
                    A[l, :] = 0.0
                    A[:, l] = 0.0
                    Bt[:, l] = 0.0
                    unused[l] = 0
        history.append(float(np.mean(batch_objs)))

    # no all-zero atom may survive training
    zero = np.flatnonzero(np.linalg.norm(D, axis=0) == 0.0)
    if zero.size:
        repl = rng.choice(candidates, size=zero.size, replace=candidates.size < zero.size)
        for l, j in zip(zero, repl):
            D[:, l] = Y[:, j] / col_norms[j]

    trained = SubDictionary(atoms=D)
    if collect_history:
        return trained, history
    return trained


def dictionary_objective(D: SubDictionary, Y: np.ndarray, mu: float) -> float:
    """Training objective at the lasso-optimal codes for Y under D."""
    cfg = SolverConfig(mu=mu, max_iters=500, regularizer=L1)
    return code_l1(Y, D.atoms, cfg).objective
