"""Sparse inference engines.

Two regularizers are supported for ``min 0.5*||Y - D X||_F^2 + mu * R(X)``:

* ``l1``  -- elementwise lasso, solved per column by cyclic coordinate
  descent with an explicit KKT stopping test (used inside dictionary
  training).
* ``l21`` -- row-sparsity (sum of row 2-norms), solved by accelerated
  proximal gradient with a monotone restart (used for joint coding of the
  pixels of a spatial group).

``code_group_blockwise`` drives the per-block decomposition: because the
full dictionary is block-diagonal with one shared sub-dictionary per
block, the joint problem over a spatial group splits exactly into B
independent small problems, and disabled blocks contribute an all-zero
code slice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericInputError, ShapeError

log = logging.getLogger(__name__)

L1 = "l1"
L21 = "l21"


@dataclass(frozen=True)
class SolverConfig:
    mu: float
    max_iters: int = 500
    tol: float = 1e-8           # relative objective-change stopping tolerance
    regularizer: str = L21
    kkt_tol: float = 1e-6       # coordinate-descent optimality tolerance

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("mu must be > 0")
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.regularizer not in (L1, L21):
            raise ConfigError(f"unknown regularizer {self.regularizer!r}")


@dataclass(frozen=True)
class SparseCodeResult:
    codes: np.ndarray           # atoms x signals
    objective: float
    iters: int
    residual_fro: float


def spectral_norm(D: np.ndarray, max_iters: int = 30, tol: float = 1e-10) -> float:
    """Largest singular value of D via power iteration on D^T D."""
    if D.size == 0:
        return 0.0
    G = D.T @ D
    rng = np.random.default_rng(0)
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v) + 1e-300
    lam = 0.0
    for _ in range(max_iters):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        lam_new = float(v @ (G @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))


def prox_l21(X: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise shrinkage: r -> r * max(0, 1 - tau/||r||_2)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return X.copy()
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    scale = np.maximum(0.0, 1.0 - tau / np.maximum(norms, 1e-300))
    return X * scale


def l21_norm(X: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(X, axis=1)))


def _check_finite(Y: np.ndarray, D: np.ndarray) -> None:
    if not np.all(np.isfinite(Y)):
        raise NumericInputError("Y contains non-finite entries")
    if not np.all(np.isfinite(D)):
        raise NumericInputError("D contains non-finite entries")


def code_l21(Y: np.ndarray, D: np.ndarray, cfg: SolverConfig) -> SparseCodeResult:
    """Joint row-sparse coding by monotone accelerated proximal gradient.

    The reported objective sequence is non-increasing; iteration stops when
    the relative objective change drops below cfg.tol.
    """
    if cfg.regularizer != L21:
        raise ConfigError("code_l21 requires an l21-configured solver")
    _check_finite(Y, D)
    if D.shape[0] != Y.shape[0]:
        raise ShapeError(f"D has {D.shape[0]} rows but Y has {Y.shape[0]}")

    k, n = D.shape[1], Y.shape[1]
    sigma = spectral_norm(D)
    L = max(sigma * sigma, 1e-12)
    step = 1.0 / L

    def objective(X: np.ndarray, R: np.ndarray) -> float:
        return 0.5 * float(np.sum(R * R)) + cfg.mu * l21_norm(X)

    X = np.zeros((k, n))
    R = Y.copy()                       # Y - D X
    fX = objective(X, R)
    Z = X                              # extrapolated point
    t = 1.0
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        grad = -(D.T @ (Y - D @ Z))
        cand = prox_l21(Z - step * grad, cfg.mu * step)
        R_cand = Y - D @ cand
        f_cand = objective(cand, R_cand)
        if f_cand > fX:
            # monotone fallback: plain proximal step from the current iterate
            grad = -(D.T @ R)
            cand = prox_l21(X - step * grad, cfg.mu * step)
            R_cand = Y - D @ cand
            f_cand = objective(cand, R_cand)
            t = 1.0                    # restart momentum
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Z = cand + ((t - 1.0) / t_new) * (cand - X)
        X, R = cand, R_cand
        f_prev, fX = fX, f_cand
        t = t_new
        if abs(f_prev - fX) <= cfg.tol * max(1.0, abs(f_prev)):
            break

    # subgradient optimality: rows of D^T R must lie in the mu-ball (zero
    # rows) or equal mu * X_row / ||X_row|| (active rows)
    G = D.T @ R
    row_norms = np.linalg.norm(X, axis=1)
    active = row_norms > 0
    opt = 0.0
    if np.any(~active):
        opt = max(opt, float(np.max(np.linalg.norm(G[~active], axis=1), initial=0.0) - cfg.mu))
    if np.any(active):
        target = cfg.mu * X[active] / row_norms[active, None]
        opt = max(opt, float(np.max(np.linalg.norm(G[active] - target, axis=1))))
    log.debug("code_l21: %d iters, objective %.6e, optimality residual %.3e", iters, fX, opt)

    return SparseCodeResult(
        codes=X, objective=fX, iters=iters, residual_fro=float(np.linalg.norm(R))
    )


def code_l1(Y: np.ndarray, D: np.ndarray, cfg: SolverConfig) -> SparseCodeResult:
    """Per-column lasso by cyclic coordinate descent, vectorized over columns.

    Stops once every column satisfies the lasso KKT conditions to
    cfg.kkt_tol (or max_iters full sweeps elapse).
    """
    if cfg.regularizer != L1:
        raise ConfigError("code_l1 requires an l1-configured solver")
    _check_finite(Y, D)
    if D.shape[0] != Y.shape[0]:
        raise ShapeError(f"D has {D.shape[0]} rows but Y has {Y.shape[0]}")

    k, n = D.shape[1], Y.shape[1]
    G = D.T @ D
    B0 = D.T @ Y                       # k x n
    X = np.zeros((k, n))
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        for i in range(k):
            gii = G[i, i]
            if gii <= 0.0:
                X[i] = 0.0
                continue
            r = B0[i] - G[i] @ X + gii * X[i]
            X[i] = np.sign(r) * np.maximum(np.abs(r) - cfg.mu, 0.0) / gii
        if kkt_residual_l1(Y, D, X, cfg.mu, grad=B0 - G @ X) <= cfg.kkt_tol:
            break

    R = Y - D @ X
    obj = 0.5 * float(np.sum(R * R)) + cfg.mu * float(np.sum(np.abs(X)))
    log.debug("code_l1: %d sweeps, objective %.6e", iters, obj)
    return SparseCodeResult(
        codes=X, objective=obj, iters=iters, residual_fro=float(np.linalg.norm(R))
    )


def kkt_residual_l1(
    Y: np.ndarray, D: np.ndarray, X: np.ndarray, mu: float, grad: np.ndarray | None = None
) -> float:
    """Worst-case lasso KKT violation over all coordinates and columns."""
    if grad is None:
        grad = D.T @ (Y - D @ X)
    zero = X == 0.0
    viol_zero = np.maximum(np.abs(grad) - mu, 0.0) * zero
    viol_active = np.abs(grad - mu * np.sign(X)) * (~zero)
    return float(np.max(viol_zero + viol_active, initial=0.0))


def code_group_blockwise(Y_i: np.ndarray, D: np.ndarray, mask, cfg: SolverConfig) -> SparseCodeResult:
    """Code one spatial group block by block under an activity mask.

    For each active block the l21 sub-problem is solved independently; the
    code slices of inactive blocks are exactly zero and their data energy
    0.5*||Y_ij||_F^2 enters the total objective (the optimum when the
    corresponding dictionary rows are zeroed out).
    """
    flags = np.asarray(mask.flags, dtype=bool)
    B = flags.size
    s = D.shape[0]
    if Y_i.shape[0] != B * s:
        raise ShapeError(
            f"group matrix has {Y_i.shape[0]} rows, expected B*s = {B}*{s}"
        )
    k, n = D.shape[1], Y_i.shape[1]

    X = np.zeros((B * k, n))
    total_obj = 0.0
    total_sq = 0.0
    iters = 0
    for j in range(B):
        Y_ij = Y_i[j * s : (j + 1) * s]
        if flags[j]:
            res = code_l21(Y_ij, D, cfg)
            X[j * k : (j + 1) * k] = res.codes
            total_obj += res.objective
            total_sq += res.residual_fro**2
            iters = max(iters, res.iters)
        else:
            e = float(np.sum(Y_ij * Y_ij))
            total_obj += 0.5 * e
            total_sq += e
    return SparseCodeResult(
        codes=X, objective=total_obj, iters=iters, residual_fro=float(np.sqrt(total_sq))
    )
