"""
MMD training of boson sampling Born machines

For a stationary kernel on bitstrings, k(x, y) = κ(x ⊕ y), the squared MMD
is a spectral average of squared parity gaps,

    MMD²(p, q) = E_{α∼G} (⟨Π_α⟩_p - ⟨Π_α⟩_q)²,

with G the Walsh transform of κ. The model side ⟨Π_α⟩_q is one permanent, so
both the loss and its gradient have unbiased Monte-Carlo estimators that
never enumerate outcomes. Training lifts n-bit data into the bare model's
outcome space through a right inverse of the readout and fits the bare model.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from core.born_machine import (
    BsbmSpec,
    ParityWord,
    parity_expectation_estimate,
    parity_expectation_exact,
    parity_value_and_gradient,
)
from core.combinatorics import FockOutcome, bits_to_int, int_to_bits
from core.config import get_settings
from core.errors import EnumerationTooLarge, FixedUnitaryHasNoGradient, LengthMismatch, SpaceTooLarge
from core.interferometer import InterferometerMesh, unitary_jacobian
from core.permanent import EstimatorConfig
from core.readout import EbsbmSpec, LiftMode, ReadoutMap, lift, pushforward_exact

LIFT_STREAM = 1
ALPHA_STREAM = 2


class KernelKind(str, Enum):
    GAUSSIAN_HAMMING = "gaussian_hamming"
    TABULATED = "tabulated"


def _check_space(m: int):
    limit = get_settings().BSBM_MMD_MAX_BITS
    if m > limit:
        raise SpaceTooLarge(f"{m}-bit tables exceed the exact limit of {limit} bits")


def _popcount(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    count = np.zeros_like(values)
    while np.any(values):
        count += values & 1
        values = values >> 1
    return count


def walsh_hadamard(values: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform: out[a] = Σ_z (-1)^{a·z} values[z]"""
    out = np.array(values, dtype=float, copy=True)
    n = out.size
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    h = 1
    while h < n:
        pairs = out.reshape(-1, 2, h)
        out = np.stack((pairs[:, 0] + pairs[:, 1], pairs[:, 0] - pairs[:, 1]), axis=1).reshape(n)
        h *= 2
    return out


class KernelSpec(BaseModel):
    """Stationary kernel on m-bit strings and its spectral measure over parity words"""

    kind: KernelKind = KernelKind.GAUSSIAN_HAMMING
    m: int = Field(ge=1)
    sigma: Optional[float] = Field(default=None, gt=0)
    weights: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_kernel(self):
        if self.kind is KernelKind.GAUSSIAN_HAMMING:
            if self.sigma is None:
                raise ValueError("gaussian_hamming kernel needs sigma")
        else:
            if self.weights is None or len(self.weights) != 1 << self.m:
                raise ValueError(f"tabulated kernel needs 2^{self.m} spectral weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("spectral weights must be nonnegative and sum to 1")
        return self

    @property
    def rate(self) -> float:
        """c in κ(z) = exp(-c·|z|)"""
        return 1.0 / (2.0 * self.sigma ** 2)

    @property
    def bit_probability(self) -> float:
        """Per-bit Bernoulli parameter of the Gaussian-Hamming spectral measure"""
        return 0.5 * (1.0 - np.exp(-self.rate))

    def spectral_weights(self) -> np.ndarray:
        """G(α) for every α, indexed by its big-endian value"""
        _check_space(self.m)
        if self.kind is KernelKind.TABULATED:
            return np.asarray(self.weights, dtype=float)
        q = self.bit_probability
        ones = _popcount(np.arange(1 << self.m))
        return q ** ones * (1.0 - q) ** (self.m - ones)

    def kernel_vector(self) -> np.ndarray:
        """κ(z) for every z"""
        _check_space(self.m)
        if self.kind is KernelKind.TABULATED:
            return walsh_hadamard(np.asarray(self.weights, dtype=float))
        return np.exp(-self.rate * _popcount(np.arange(1 << self.m)))

    def __call__(self, x: Sequence[int], y: Sequence[int]) -> float:
        if len(x) != self.m or len(y) != self.m:
            raise LengthMismatch(f"kernel over {self.m} bits got {len(x)} and {len(y)}")
        if self.kind is KernelKind.GAUSSIAN_HAMMING:
            return float(np.exp(-self.rate * sum(a != b for a, b in zip(x, y))))
        return float(self.kernel_vector()[bits_to_int(x) ^ bits_to_int(y)])


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Distinct bitstrings with their probabilities; ``counts`` kept when built from samples"""

    rows: np.ndarray
    weights: np.ndarray
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] == 0:
            raise ValueError("empirical distribution must be nonempty")

    @classmethod
    def from_samples(cls, samples: Iterable[Union[Sequence[int], FockOutcome]]) -> "EmpiricalDistribution":
        data = [s.bits if isinstance(s, FockOutcome) else tuple(s) for s in samples]
        if not data:
            raise ValueError("empirical distribution must be nonempty")
        lengths = {len(row) for row in data}
        if len(lengths) != 1:
            raise LengthMismatch(f"samples have mixed bit lengths {sorted(lengths)}")
        rows, counts = np.unique(np.array(data, dtype=np.int8), axis=0, return_counts=True)
        return cls(rows=rows, weights=counts / counts.sum(), counts=counts)

    @classmethod
    def from_weighted(cls, rows: Sequence[Sequence[int]], weights: Sequence[float]) -> "EmpiricalDistribution":
        merged = {}
        for row, w in zip(rows, weights):
            key = tuple(int(b) for b in row)
            merged[key] = merged.get(key, 0.0) + float(w)
        keys = sorted(k for k, w in merged.items() if w > 0)
        w = np.array([merged[k] for k in keys])
        return cls(rows=np.array(keys, dtype=np.int8), weights=w / w.sum())

    @classmethod
    def from_table(cls, probs: np.ndarray, n_bits: int) -> "EmpiricalDistribution":
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (1 << n_bits,):
            raise LengthMismatch(f"table of length {probs.size} is not over {n_bits} bits")
        support = np.flatnonzero(probs > 0)
        return cls.from_weighted([int_to_bits(int(i), n_bits) for i in support], probs[support])

    @property
    def n_bits(self) -> int:
        return self.rows.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum()) if self.counts is not None else 0

    def table(self) -> np.ndarray:
        _check_space(self.n_bits)
        out = np.zeros(1 << self.n_bits)
        index = self.rows.astype(np.int64) @ (1 << np.arange(self.n_bits - 1, -1, -1))
        np.add.at(out, index, self.weights)
        return out


def data_parity(p: EmpiricalDistribution, alpha: ParityWord) -> float:
    """Exact ⟨Π_α⟩ of the data: the average of (-1)^{α·x}"""
    if alpha.m != p.n_bits:
        raise LengthMismatch(f"parity word has {alpha.m} bits, data has {p.n_bits}")
    signs = 1 - 2 * ((p.rows.astype(np.int64) @ np.asarray(alpha.alpha)) % 2)
    return float(p.weights @ signs)


def spectral_sample(kernel: KernelSpec, rng: Union[None, int, np.random.Generator] = None) -> ParityWord:
    """Draw α from the kernel's spectral measure"""
    rng = np.random.default_rng(rng)
    if kernel.kind is KernelKind.GAUSSIAN_HAMMING:
        return ParityWord(tuple((rng.random(kernel.m) < kernel.bit_probability).astype(int)))
    index = int(rng.choice(1 << kernel.m, p=kernel.spectral_weights()))
    return ParityWord(int_to_bits(index, kernel.m))


def _as_table(dist: Union[np.ndarray, EmpiricalDistribution], m: int) -> np.ndarray:
    table = dist.table() if isinstance(dist, EmpiricalDistribution) else np.asarray(dist, dtype=float)
    if table.shape != (1 << m,):
        raise LengthMismatch(f"distribution table of length {table.size} is not over {m} bits")
    return table


def mmd2_exact(p, q, kernel: KernelSpec) -> float:
    """
    Squared MMD as the kernel double sum

    Terms are grouped by z = x ⊕ y, so memory stays linear in the table size.
    """
    _check_space(kernel.m)
    p, q = _as_table(p, kernel.m), _as_table(q, kernel.m)
    d = p - q
    kappa = kernel.kernel_vector()
    index = np.arange(d.size)
    block = max(1, (1 << 20) // d.size)
    total = 0.0
    for start in range(0, d.size, block):
        zs = index[start:start + block]
        shifted = d[index[None, :] ^ zs[:, None]]
        total += float(kappa[zs] @ (shifted @ d))
    return total


def mmd2_spectral(p, q, kernel: KernelSpec) -> float:
    """Squared MMD as the exhaustive spectral sum of squared parity gaps"""
    _check_space(kernel.m)
    p, q = _as_table(p, kernel.m), _as_table(q, kernel.m)
    gap = walsh_hadamard(p - q)
    return float(kernel.spectral_weights() @ gap ** 2)


def model_parity_vector(spec: BsbmSpec, kernel: Optional[KernelSpec] = None) -> np.ndarray:
    """Exact full-state ⟨Π_α⟩ for every α (skipping zero-weight words when a kernel is given)"""
    _check_space(spec.m)
    weights = kernel.spectral_weights() if kernel is not None else np.ones(1 << spec.m)
    out = np.zeros(1 << spec.m)
    for a in np.flatnonzero(weights > 0):
        out[a] = parity_expectation_exact(spec, ParityWord(int_to_bits(int(a), spec.m)))
    return out


def mmd2_exhaustive(p: EmpiricalDistribution, spec: BsbmSpec, kernel: KernelSpec) -> float:
    """The training loss evaluated exactly: full spectral sum against full-state parities"""
    gap = walsh_hadamard(p.table()) - model_parity_vector(spec, kernel)
    return float(kernel.spectral_weights() @ gap ** 2)


class LossConfig(BaseModel):
    """How the MMD² loss and gradient are estimated"""

    batch_alphas: int = Field(default=32, ge=1)
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)
    exhaustive_alphas: bool = False
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)


def _alpha_batch(kernel: KernelSpec, cfg: LossConfig, step: int) -> Tuple[List[ParityWord], np.ndarray]:
    if cfg.exhaustive_alphas:
        weights = kernel.spectral_weights()
        support = np.flatnonzero(weights > 0)
        words = [ParityWord(int_to_bits(int(a), kernel.m)) for a in support]
        return words, weights[support]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, ALPHA_STREAM, step]))
    words = [spectral_sample(kernel, rng) for _ in range(cfg.batch_alphas)]
    return words, np.full(len(words), 1.0 / len(words))


def _check_lengths(p: EmpiricalDistribution, spec: BsbmSpec, kernel: KernelSpec):
    if p.n_bits != spec.m:
        raise LengthMismatch(f"data has {p.n_bits} bits, model has {spec.m} modes")
    if kernel.m != spec.m:
        raise LengthMismatch(f"kernel over {kernel.m} bits, model has {spec.m} modes")


def _reduce_loss(terms: np.ndarray, weights: np.ndarray, term_vars: np.ndarray, exhaustive: bool) -> Tuple[float, float]:
    value = float(weights @ terms)
    if exhaustive:
        return value, float(np.sqrt(weights ** 2 @ term_vars))
    if terms.size < 2:
        return value, float("nan")
    return value, float(np.std(terms, ddof=1) / np.sqrt(terms.size))


def _map_ordered(fn, items: Sequence, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def mmd2_estimate(
    p: EmpiricalDistribution,
    spec: BsbmSpec,
    kernel: KernelSpec,
    cfg: LossConfig,
    step: int = 0,
) -> Tuple[float, float]:
    """
    Unbiased estimate of MMD²(p, q_θ) over lifted data

    Each parity word gets two independent model estimates μ̂₁, μ̂₂ and
    contributes (⟨Π_α⟩_p - μ̂₁)(⟨Π_α⟩_p - μ̂₂).

    Returns:
        (value, stderr)
    """
    _check_lengths(p, spec, kernel)
    words, weights = _alpha_batch(kernel, cfg, step)

    def term(item):
        i, alpha = item
        dp = data_parity(p, alpha)
        mu1, s1 = parity_expectation_estimate(spec, alpha, cfg.estimator, stream=(step, i, 0))
        mu2, s2 = parity_expectation_estimate(spec, alpha, cfg.estimator, stream=(step, i, 1))
        var = (dp - mu2) ** 2 * s1 ** 2 + (dp - mu1) ** 2 * s2 ** 2
        return (dp - mu1) * (dp - mu2), var

    results = _map_ordered(term, list(enumerate(words)), cfg.workers)
    terms = np.array([r[0] for r in results])
    term_vars = np.array([r[1] for r in results])
    return _reduce_loss(terms, weights, term_vars, cfg.exhaustive_alphas)


def mmd2_loss_and_gradient(
    p: EmpiricalDistribution,
    spec: BsbmSpec,
    kernel: KernelSpec,
    cfg: LossConfig,
    step: int = 0,
) -> Tuple[float, float, np.ndarray]:
    """
    Loss estimate and unbiased gradient sharing one round of Monte-Carlo work

    The gradient term of each word is -2(⟨Π_α⟩_p - μ̂₁)·∇̂μ₂, where μ̂₂ and
    ∇̂μ₂ come from the same sign vectors and μ̂₁ from independent ones.

    Returns:
        (loss, stderr, gradient)
    """
    if spec.mesh is None:
        raise FixedUnitaryHasNoGradient("model has a fixed unitary; nothing to differentiate")
    _check_lengths(p, spec, kernel)
    words, weights = _alpha_batch(kernel, cfg, step)
    columns = spec.matrix()[:, :spec.k]
    dcolumns = unitary_jacobian(spec.mesh)[:, :, :spec.k]

    def term(item):
        i, alpha = item
        dp = data_parity(p, alpha)
        mu1, s1 = parity_expectation_estimate(spec, alpha, cfg.estimator, stream=(step, i, 0))
        mu2, s2, grad2 = parity_value_and_gradient(
            spec, alpha, cfg.estimator, stream=(step, i, 1), columns=columns, dcolumns=dcolumns
        )
        var = (dp - mu2) ** 2 * s1 ** 2 + (dp - mu1) ** 2 * s2 ** 2
        return (dp - mu1) * (dp - mu2), var, -2.0 * (dp - mu1) * grad2

    results = _map_ordered(term, list(enumerate(words)), cfg.workers)
    terms = np.array([r[0] for r in results])
    term_vars = np.array([r[1] for r in results])
    grad = np.zeros(spec.m * spec.m)
    for w, r in zip(weights, results):
        grad += w * r[2]
    value, stderr = _reduce_loss(terms, weights, term_vars, cfg.exhaustive_alphas)
    return value, stderr, grad


def mmd2_gradient(
    p: EmpiricalDistribution,
    spec: BsbmSpec,
    kernel: KernelSpec,
    cfg: LossConfig,
    step: int = 0,
) -> np.ndarray:
    """Unbiased gradient of MMD²(p, q_θ) with respect to the mesh parameters"""
    return mmd2_loss_and_gradient(p, spec, kernel, cfg, step)[2]


def median_heuristic_sigma(samples: EmpiricalDistribution) -> float:
    """
    σ such that exp(-d/(2σ²)) = exp(-d/median), with the median Hamming distance
    between two independent draws; 1.0 when that median is zero
    """
    rows = samples.rows.astype(np.int64)
    w = samples.weights
    distances = (rows[:, None, :] != rows[None, :, :]).sum(axis=2).reshape(-1)
    pair_weights = np.outer(w, w).reshape(-1)
    order = np.argsort(distances, kind="stable")
    cumulative = np.cumsum(pair_weights[order])
    median = float(distances[order][np.searchsorted(cumulative, 0.5 * cumulative[-1])])
    if median == 0:
        return 1.0
    return float(np.sqrt(median / 2.0))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch(f"tables of shapes {p.shape} and {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


class TrainConfig(BaseModel):
    """Optimiser schedule and estimator settings for one training run"""

    optimizer: Literal["adam", "sgd"] = "adam"
    learning_rate: float = Field(default=0.05, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    momentum: float = Field(default=0.0, ge=0, lt=1)
    steps: int = Field(default=300, ge=0)
    batch_alphas: int = Field(default=32, ge=1)
    estimator: EstimatorConfig = Field(default_factory=lambda: EstimatorConfig(n_samples=2000))
    exhaustive_alphas: bool = False
    lift_mode: LiftMode = LiftMode.DETERMINISTIC
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    log_every: int = Field(default=25, ge=1)

    def loss_config(self) -> LossConfig:
        estimator = self.estimator.model_copy(update={"seed": self.seed})
        return LossConfig(
            batch_alphas=self.batch_alphas,
            estimator=estimator,
            exhaustive_alphas=self.exhaustive_alphas,
            seed=self.seed,
            workers=self.workers,
        )


class Adam:
    """Adam with bias-corrected moments over a flat parameter vector"""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.first = None
        self.second = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.first is None:
            self.first = np.zeros_like(params)
            self.second = np.zeros_like(params)
        self.t += 1
        self.first = self.beta1 * self.first + (1 - self.beta1) * grad
        self.second = self.beta2 * self.second + (1 - self.beta2) * grad ** 2
        first_hat = self.first / (1 - self.beta1 ** self.t)
        second_hat = self.second / (1 - self.beta2 ** self.t)
        return params - self.lr * first_hat / (np.sqrt(second_hat) + self.eps)


class Sgd:
    """Plain gradient descent with optional heavy-ball momentum"""

    def __init__(self, lr: float, momentum: float = 0.0):
        self.lr, self.momentum = lr, momentum
        self.velocity = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.velocity is None:
            self.velocity = np.zeros_like(params)
        self.velocity = self.momentum * self.velocity + grad
        return params - self.lr * self.velocity


def make_optimizer(config: TrainConfig):
    """Optimizer named by ``config.optimizer``, with fresh state"""
    if config.optimizer == "adam":
        return Adam(config.learning_rate, config.beta1, config.beta2)
    return Sgd(config.learning_rate, config.momentum)


def lift_dataset(
    data: EmpiricalDistribution,
    readout: ReadoutMap,
    mode: Union[LiftMode, str],
    seed: int = 0,
    step: int = 0,
) -> EmpiricalDistribution:
    """
    Lift n-bit data into the bare model's outcome space

    Deterministic lifts map each distinct row once. Stochastic lifts draw an
    independent preimage for every sample (every row when no counts are
    known) from a stream keyed by (seed, step).
    """
    if data.n_bits != readout.n:
        raise LengthMismatch(f"data has {data.n_bits} bits, readout emits {readout.n}")
    mode = LiftMode(mode)
    if mode is LiftMode.DETERMINISTIC:
        lifted = [lift(tuple(row), mode, readout).bits for row in data.rows]
        return EmpiricalDistribution.from_weighted(lifted, data.weights)

    rng = np.random.default_rng(np.random.SeedSequence([seed, LIFT_STREAM, step]))
    if data.counts is None:
        lifted = [lift(tuple(row), mode, readout, rng).bits for row in data.rows]
        return EmpiricalDistribution.from_weighted(lifted, data.weights)
    samples = []
    for row, count in zip(data.rows, data.counts):
        samples.extend(lift(tuple(row), mode, readout, rng) for _ in range(int(count)))
    return EmpiricalDistribution.from_samples(samples)


@dataclass(frozen=True)
class TraceRow:
    step: int
    loss: float
    stderr: float
    grad_norm: float
    wall_ms: float


@dataclass
class TrainResult:
    mesh: InterferometerMesh
    trace: List[TraceRow] = field(default_factory=list)
    final_loss: float = float("nan")
    final_stderr: float = float("nan")


def final_loss_estimate(
    data: EmpiricalDistribution,
    ebsbm: EbsbmSpec,
    kernel: KernelSpec,
    config: TrainConfig,
) -> Tuple[float, float]:
    """The loss recorded at the end of training, reproducible from (config, seed)"""
    lifted = lift_dataset(data, ebsbm.readout, config.lift_mode, config.seed, config.steps)
    return mmd2_estimate(lifted, ebsbm.base, kernel, config.loss_config(), step=config.steps)


def train(
    data: EmpiricalDistribution,
    ebsbm: EbsbmSpec,
    kernel: KernelSpec,
    config: TrainConfig,
) -> TrainResult:
    """
    Fit the bare model to lifted data by stochastic gradient descent on MMD²

    Args:
        data: n-bit training samples
        ebsbm: readout-mapped model; its mesh is the starting point
        kernel: kernel over the bare model's m-bit outcomes
        config: optimiser and estimator settings

    Returns:
        trained mesh, per-step trace and the final loss estimate
    """
    if ebsbm.base.mesh is None:
        raise FixedUnitaryHasNoGradient("model has a fixed unitary; nothing to train")
    if data.n_bits != ebsbm.n:
        raise LengthMismatch(f"data has {data.n_bits} bits, model emits {ebsbm.n}")
    if kernel.m != ebsbm.base.m:
        raise LengthMismatch(f"kernel over {kernel.m} bits, model has {ebsbm.base.m} modes")

    loss_cfg = config.loss_config()
    optimizer = make_optimizer(config)
    spec = ebsbm.base
    params = np.array(spec.mesh.params)
    trace: List[TraceRow] = []
    lifted = lift_dataset(data, ebsbm.readout, config.lift_mode, config.seed, 0)

    logger.info(f"Training {config.steps} steps on m={spec.m}, k={spec.k} with {config.optimizer}")
    for step in range(config.steps):
        if config.lift_mode is LiftMode.STOCHASTIC and step > 0:
            lifted = lift_dataset(data, ebsbm.readout, config.lift_mode, config.seed, step)
        started = time.perf_counter()
        loss, stderr, grad = mmd2_loss_and_gradient(lifted, spec, kernel, loss_cfg, step)
        params = optimizer.step(params, grad)
        spec = spec.with_mesh(spec.mesh.with_params(params))
        row = TraceRow(step, loss, stderr, float(np.linalg.norm(grad)), 1000.0 * (time.perf_counter() - started))
        trace.append(row)
        if step % config.log_every == 0 or step == config.steps - 1:
            logger.info(f"step {step}: loss {loss:.6f} ± {stderr:.6f}, |grad| {row.grad_norm:.4f}")

    trained = ebsbm.model_copy(update={"base": spec})
    final_loss, final_stderr = final_loss_estimate(data, trained, kernel, config)
    logger.info(f"Training finished: final loss {final_loss:.6f} ± {final_stderr:.6f}")
    return TrainResult(mesh=spec.mesh, trace=trace, final_loss=final_loss, final_stderr=final_stderr)


def surrogate_report(
    data: EmpiricalDistribution,
    ebsbm: EbsbmSpec,
    kernel: KernelSpec,
    lift_mode: Union[LiftMode, str] = LiftMode.DETERMINISTIC,
) -> Optional[dict]:
    """
    Bare-space training loss next to the readout-space MMD on small models

    The lifted loss only approximates the MMD of the pushed-forward model, and
    can stay positive when the readout distributions already agree.
    """
    try:
        lifted = lift_dataset(data, ebsbm.readout, lift_mode)
        bare_loss = mmd2_exhaustive(lifted, ebsbm.base, kernel)
        readout_kernel = KernelSpec(m=ebsbm.n, sigma=kernel.sigma or 1.0)
        readout_mmd2 = mmd2_exact(data, pushforward_exact(ebsbm), readout_kernel)
    except (EnumerationTooLarge, SpaceTooLarge) as e:
        logger.info(f"Surrogate report skipped: {e}")
        return None
    logger.info(f"Surrogate report: bare loss {bare_loss:.6f}, readout-space MMD² {readout_mmd2:.6f}")
    return {"bare_loss": bare_loss, "readout_mmd2": readout_mmd2}
