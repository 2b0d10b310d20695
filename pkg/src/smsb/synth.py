"""Synthetic cubes with known ground truth, plus the brute-force global
coding oracle used to certify the per-block decomposition.

Generated scenes put each class in a vertical stripe (at least one spatial
group wide) so groups are label-homogeneous.  Class spectra differ only
inside the designated discriminative spectral blocks; the remaining blocks
share a single class-independent profile, so their image-wide variance is
provably lower.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import HsiCube, LabelMap
from .errors import ConfigError, OracleScopeError
from .solver import L21, SolverConfig, SparseCodeResult, code_l21

ORACLE_MAX_GLOBAL_ATOMS = 64


@dataclass(frozen=True)
class SynthSpec:
    width: int
    height: int
    bands: int
    class_count: int
    B: int
    discriminative_blocks: Tuple[int, ...]
    atoms_per_class: int = 2
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if any(j < 0 or j >= self.B for j in self.discriminative_blocks):
            raise ConfigError("discriminative block ids must lie in 0..B-1")
        if self.class_count > self.width:
            raise ConfigError("more classes than representable stripe regions")


def generate(spec: SynthSpec):
    """Build a striped scene; returns dict with cube, labels and truth.

    truth carries the noiseless class spectra, the discriminative block
    set and the per-class per-block generating atoms.
    """
    rng = np.random.default_rng(spec.seed)
    s = spec.bands // spec.B
    used = spec.B * s
    n = spec.width * spec.height

    # one shared profile for every non-discriminative block
    base = np.zeros(spec.bands)
    for j in range(spec.B):
        profile = rng.standard_normal(s)
        profile /= np.linalg.norm(profile)
        base[j * s : (j + 1) * s] = profile
    if used < spec.bands:
        base[used:] = rng.standard_normal(spec.bands - used) * 0.1

    disc = set(spec.discriminative_blocks)
    atoms = {}
    class_spectra = np.tile(base[:, None], (1, spec.class_count))
    for j in disc:
        blk_atoms = rng.standard_normal((s, spec.atoms_per_class * spec.class_count))
        blk_atoms /= np.linalg.norm(blk_atoms, axis=0, keepdims=True)
        atoms[j] = blk_atoms
        for c in range(spec.class_count):
            cols = blk_atoms[:, c * spec.atoms_per_class : (c + 1) * spec.atoms_per_class]
            w = rng.uniform(0.5, 1.5, size=spec.atoms_per_class)
            class_spectra[j * s : (j + 1) * s, c] = cols @ w

    # vertical stripes, roughly equal widths
    edges = np.linspace(0, spec.width, spec.class_count + 1).astype(int)
    col_class = np.zeros(spec.width, dtype=int)
    for c in range(spec.class_count):
        col_class[edges[c] : edges[c + 1]] = c + 1
    labels = np.tile(col_class, spec.height)

    data = class_spectra[:, labels - 1]
    if spec.noise_std > 0:
        data = data + rng.normal(scale=spec.noise_std, size=(spec.bands, n))

    cube = HsiCube(width=spec.width, height=spec.height, bands=spec.bands, data=data)
    truth = {
        "class_spectra": class_spectra,
        "discriminative_blocks": tuple(sorted(disc)),
        "atoms": atoms,
    }
    return {"cube": cube, "labels": LabelMap(labels=labels), "truth": truth}


def make_dictionary_recovery_problem(
    s: int = 8,
    k: int = 12,
    n_samples: int = 10000,
    sparsity: int = 3,
    snr_db: float = 40.0,
    seed: int = 0,
):
    """Samples from a known random dictionary with sparse codes plus noise.

    Returns (Y, D_true, X_true); noise power is set from the requested SNR.
    """
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((s, k))
    D /= np.linalg.norm(D, axis=0, keepdims=True)
    X = np.zeros((k, n_samples))
    for i in range(n_samples):
        idx = rng.choice(k, size=sparsity, replace=False)
        X[idx, i] = rng.standard_normal(sparsity)
    Y = D @ X
    sig_power = np.mean(Y * Y)
    noise_power = sig_power / (10.0 ** (snr_db / 10.0))
    Y = Y + rng.normal(scale=np.sqrt(noise_power), size=Y.shape)
    return Y, D, X


def materialize_block_dictionary(D: np.ndarray, flags: np.ndarray) -> np.ndarray:
    """Explicit (B*s) x (B*k) block-diagonal dictionary; masked blocks zero."""
    flags = np.asarray(flags)
    B = flags.size
    s, k = D.shape
    A = np.zeros((B * s, B * k))
    for j in range(B):
        if flags[j]:
            A[j * s : (j + 1) * s, j * k : (j + 1) * k] = D
    return A


def oracle_global_solve(
    Y_i: np.ndarray,
    D: np.ndarray,
    mask,
    mu: float,
    tol: float = 1e-14,
    max_iters: int = 5000,
) -> SparseCodeResult:
    """Reference solve of the undecomposed group problem.

    Materializes the block-diagonal dictionary and runs the same proximal
    scheme the per-block path uses.  Desk scale only.
    """
    flags = np.asarray(mask.flags)
    B = flags.size
    k = D.shape[1]
    if B * k > ORACLE_MAX_GLOBAL_ATOMS:
        raise OracleScopeError(
            f"global oracle capped at {ORACLE_MAX_GLOBAL_ATOMS} atoms, got {B * k}"
        )
    A = materialize_block_dictionary(D, flags)
    cfg = SolverConfig(mu=mu, max_iters=max_iters, tol=tol, regularizer=L21)
    return code_l21(Y_i, A, cfg)
