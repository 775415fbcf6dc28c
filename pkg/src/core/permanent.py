"""
Matrix permanents: exact Ryser evaluation and the Gurvits sign-vector estimator

Per(W) = E_x[Rys_x(W)] over uniform x ∈ {-1, 1}^k, where

    Rys_x(W) = (Π_i x_i) · Π_i (W x)_i

Every Monte-Carlo routine draws its sign vectors in fixed-size blocks, each
block from its own Philox stream keyed by (seed, stream..., block index).
Results are therefore identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from core.config import get_settings
from core.errors import DimensionMismatch, MatrixTooLarge

SAMPLE_BLOCK = 1024
DEFAULT_SAMPLES = 2000


def hoeffding_samples(epsilon: float, delta: float) -> int:
    """Samples needed so a mean of [-1, 1] variables is ε-close with probability 1-δ"""
    return math.ceil(2.0 * math.log(2.0 / delta) / epsilon ** 2)


class EstimatorConfig(BaseModel):
    """Monte-Carlo settings for permanent-based estimators"""

    n_samples: Optional[int] = Field(default=None, ge=1)
    epsilon: Optional[float] = Field(default=None, gt=0)
    delta: Optional[float] = Field(default=None, gt=0, lt=1)
    seed: int = Field(default=0, ge=0)
    exhaustive: bool = False  # average over all 2^k sign vectors instead of sampling
    workers: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _fill_sample_count(self):
        if (self.epsilon is None) != (self.delta is None):
            raise ValueError("epsilon and delta must be given together")
        if self.epsilon is not None:
            required = hoeffding_samples(self.epsilon, self.delta)
            if self.n_samples is None:
                self.n_samples = required
            elif self.n_samples < required:
                raise ValueError(
                    f"n_samples={self.n_samples} is below the {required} samples "
                    f"needed for epsilon={self.epsilon}, delta={self.delta}"
                )
        elif self.n_samples is None:
            self.n_samples = DEFAULT_SAMPLES
        return self


def _check_square(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=complex)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionMismatch(f"permanent needs a square matrix, got shape {W.shape}")
    return W


def ryser_permanent_batch(W: np.ndarray) -> np.ndarray:
    """
    Ryser's formula over a stack of k×k matrices, subsets visited in Gray-code order

    Args:
        W: complex array of shape (batch, k, k)

    Returns:
        permanents, shape (batch,)
    """
    W = np.asarray(W, dtype=complex)
    batch, k = W.shape[0], W.shape[-1]
    if k == 0:
        return np.ones(batch, dtype=complex)
    max_k = get_settings().BSBM_RYSER_MAX_K
    if k > max_k:
        raise MatrixTooLarge(f"{k}x{k} permanent exceeds the exact limit k <= {max_k}")

    row_sums = np.zeros((batch, k), dtype=complex)
    in_subset = np.zeros(k, dtype=bool)
    total = np.zeros(batch, dtype=complex)
    size = 0
    for g in range(1, 1 << k):
        j = (g & -g).bit_length() - 1
        if in_subset[j]:
            row_sums -= W[:, :, j]
            size -= 1
        else:
            row_sums += W[:, :, j]
            size += 1
        in_subset[j] = not in_subset[j]
        term = np.prod(row_sums, axis=1)
        total += term if size % 2 == 0 else -term
    return total if k % 2 == 0 else -total


def ryser_permanent(W: np.ndarray) -> complex:
    """Exact permanent of a square matrix (k <= BSBM_RYSER_MAX_K)"""
    W = _check_square(W)
    return complex(ryser_permanent_batch(W[None, :, :])[0])


def rys_sample(W: np.ndarray, x: Sequence[int]) -> complex:
    """One Gurvits sample Rys_x(W); O(k²)"""
    W = _check_square(W)
    x = np.asarray(x, dtype=float)
    if x.shape != (W.shape[0],):
        raise DimensionMismatch(f"sign vector of length {x.size} for a {W.shape[0]}x{W.shape[0]} matrix")
    return complex(np.prod(x) * np.prod(W @ x))


def rys_samples(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Rys_x(W) for every row x of X"""
    return np.prod(X, axis=1) * np.prod(X @ W.T, axis=1)


def all_sign_vectors(k: int) -> np.ndarray:
    """All 2^k vectors of {-1, 1}^k as rows"""
    return np.array(list(product((1.0, -1.0), repeat=k)), dtype=float).reshape(-1, k)


def sign_vector_block(k: int, size: int, seed: int, stream: Sequence[int], block: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream, block])))
    return 2.0 * rng.integers(0, 2, size=(size, k)).astype(float) - 1.0


def sign_vector_mean(
    sample_fn: Callable[[np.ndarray], np.ndarray],
    k: int,
    cfg: EstimatorConfig,
    stream: Sequence[int] = (),
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and standard error of ``sample_fn`` over sign vectors

    Args:
        sample_fn: maps an (N, k) block of sign vectors to (N,) or (N, P) samples
        k: sign-vector length
        cfg: sample count, seed, exhaustive flag and worker count
        stream: extra integers keying an independent random stream

    Returns:
        (mean, stderr); stderr is the sample standard deviation over √N, zero in
        exhaustive mode and NaN when fewer than two samples were drawn
    """
    if cfg.exhaustive:
        X = all_sign_vectors(k)
        values = np.asarray(sample_fn(X))
        return values.mean(axis=0), np.zeros(values.shape[1:])

    n = cfg.n_samples
    n_blocks = -(-n // SAMPLE_BLOCK)

    def run_block(b: int):
        size = min(SAMPLE_BLOCK, n - b * SAMPLE_BLOCK)
        values = np.asarray(sample_fn(sign_vector_block(k, size, cfg.seed, stream, b)))
        return values.sum(axis=0), (np.abs(values) ** 2).sum(axis=0)

    workers = cfg.workers or get_settings().BSBM_WORKERS
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run_block, range(n_blocks)))
    else:
        partials = [run_block(b) for b in range(n_blocks)]

    total = partials[0][0]
    total_sq = partials[0][1]
    for s, sq in partials[1:]:
        total = total + s
        total_sq = total_sq + sq
    mean = total / n
    if n < 2:
        return mean, np.full(np.shape(mean), np.nan)
    var = np.maximum(total_sq - n * np.abs(mean) ** 2, 0.0) / (n - 1)
    return mean, np.sqrt(var / n)


def gurvits_estimate(W: np.ndarray, cfg: EstimatorConfig, stream: Sequence[int] = ()) -> Tuple[complex, float]:
    """
    Unbiased Monte-Carlo estimate of Per(W)

    Returns:
        (estimate, stderr); the estimate is complex, both parts kept
    """
    W = _check_square(W)
    k = W.shape[0]
    if k == 0:
        return 1.0 + 0.0j, 0.0
    mean, stderr = sign_vector_mean(lambda X: rys_samples(W, X), k, cfg, stream)
    logger.debug(f"Gurvits estimate over {cfg.n_samples} samples of a {k}x{k} matrix: {complex(mean):.6g}")
    return complex(mean), float(stderr)
