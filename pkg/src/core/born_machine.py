"""
Boson sampling Born machine

Single photons enter modes 0..k-1 of an m-mode interferometer U and every
output mode is measured. The model distribution is the collision-free part of
the output,

    q(s) ∝ |Per(U[S(s), :k])|²,    s ∈ Ω_m^k,

renormalised by its total mass Z. Parity expectations are taken on the full
output state, where ⟨Π_α⟩ = Per((U† D U)[:k, :k]) with D = diag(1 - 2α).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator

from core.combinatorics import FockOutcome, enumerate_outcomes
from core.errors import (
    DimensionMismatch,
    FixedUnitaryHasNoGradient,
    LengthMismatch,
    NonRealExpectation,
    ZeroCollisionFreeMass,
)
from core.interferometer import InterferometerMesh, ModeUnitary, build_unitary, unitary_jacobian
from core.permanent import EstimatorConfig, ryser_permanent, ryser_permanent_batch, sign_vector_mean

IMAG_TOL = 1e-9
ZERO_MASS = 1e-20
_PERMANENT_CHUNK = 1 << 14


class BsbmSpec(BaseModel):
    """m modes, k photons in the first k modes, and either a mesh or a fixed unitary"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    m: int
    k: int
    mesh: Optional[InterferometerMesh] = None
    unitary: Optional[ModeUnitary] = None

    @model_validator(mode="after")
    def _check_model(self):
        if not self.m >= self.k >= 1:
            raise ValueError(f"need m >= k >= 1, got m={self.m}, k={self.k}")
        if (self.mesh is None) == (self.unitary is None):
            raise ValueError("give exactly one of mesh or unitary")
        source = self.mesh if self.mesh is not None else self.unitary
        if source.m != self.m:
            raise DimensionMismatch(f"interferometer has {source.m} modes, model has {self.m}")
        if self.dilute_advisory:
            logger.warning(f"m={self.m} < k²={self.k ** 2}: outside the dilute regime, collisions are not negligible")
        return self

    @property
    def dilute_advisory(self) -> bool:
        return self.m < self.k ** 2

    def matrix(self) -> np.ndarray:
        if self.unitary is not None:
            return self.unitary.entries
        return build_unitary(self.mesh).entries

    def with_mesh(self, mesh: InterferometerMesh) -> "BsbmSpec":
        # skips re-validation, so the dilute advisory is logged once per model
        return self.model_copy(update={"mesh": mesh})


@dataclass(frozen=True)
class ParityWord:
    """α ∈ {0,1}^m selecting the modes whose photon-number parity is measured"""

    alpha: Tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if any(a not in (0, 1) for a in alpha):
            raise ValueError(f"parity word must be 0/1, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def m(self) -> int:
        return len(self.alpha)

    @classmethod
    def from_string(cls, text: str) -> "ParityWord":
        return cls(tuple(int(c) for c in text.strip()))

    def signs(self) -> np.ndarray:
        """diag(1 - 2α)"""
        return 1.0 - 2.0 * np.asarray(self.alpha, dtype=float)

    def __str__(self) -> str:
        return "".join(str(a) for a in self.alpha)


@dataclass(frozen=True)
class ExactDistribution:
    outcomes: List[FockOutcome]
    raw_weights: np.ndarray
    Z: float
    probs: np.ndarray

    def prob(self, outcome: FockOutcome) -> float:
        return float(self.probs[self.outcomes.index(outcome)])


def exact_distribution(spec: BsbmSpec, cap: Optional[int] = None) -> ExactDistribution:
    """Enumerate Ω_m^k and weight each outcome by |Per|² of its k×k submatrix"""
    outcomes = enumerate_outcomes(spec.m, spec.k, cap)
    columns = spec.matrix()[:, :spec.k]
    rows = np.array([o.occupied_modes for o in outcomes], dtype=int).reshape(len(outcomes), spec.k)

    raw = np.empty(len(outcomes))
    for start in range(0, len(outcomes), _PERMANENT_CHUNK):
        block = columns[rows[start:start + _PERMANENT_CHUNK]]
        raw[start:start + block.shape[0]] = np.abs(ryser_permanent_batch(block)) ** 2

    Z = float(raw.sum())
    if Z <= ZERO_MASS:
        raise ZeroCollisionFreeMass(f"collision-free mass is zero for m={spec.m}, k={spec.k}")
    logger.info(f"Exact distribution over {len(outcomes)} outcomes, collision-free mass Z={Z:.6f}")
    return ExactDistribution(outcomes=outcomes, raw_weights=raw, Z=Z, probs=raw / Z)


def sample_exact(spec: BsbmSpec, count: int, seed: Optional[int] = None) -> List[FockOutcome]:
    """i.i.d. draws from the postselected distribution"""
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    dist = exact_distribution(spec)
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(dist.outcomes), size=count, p=dist.probs)
    return [dist.outcomes[i] for i in idx]


def _check_word(spec: BsbmSpec, alpha: ParityWord):
    if alpha.m != spec.m:
        raise LengthMismatch(f"parity word has {alpha.m} bits, model has {spec.m} modes")


def parity_submatrix(columns: np.ndarray, alpha: ParityWord) -> np.ndarray:
    """(U† D U)[:k, :k] from the first k columns of U; exact ±I for constant words"""
    k = columns.shape[1]
    if not any(alpha.alpha):
        return np.eye(k, dtype=complex)
    if all(alpha.alpha):
        return -np.eye(k, dtype=complex)
    return columns.conj().T @ (alpha.signs()[:, None] * columns)


def parity_submatrix_derivatives(columns: np.ndarray, dcolumns: np.ndarray, alpha: ParityWord) -> np.ndarray:
    """∂W/∂θ_t for every parameter; ``dcolumns`` has shape (P, m, k)"""
    M = np.einsum("pmi,mj->pij", dcolumns.conj(), alpha.signs()[:, None] * columns)
    return M + M.conj().transpose(0, 2, 1)


def _value_and_gradient_samples(W: np.ndarray, dW: np.ndarray, X: np.ndarray) -> np.ndarray:
    # real parts; column 0: Rys_x(W), columns 1..P: its derivative through W(θ)
    R = X @ W.T
    k = R.shape[1]
    px = np.prod(X, axis=1)
    before = np.ones_like(R)
    after = np.ones_like(R)
    for i in range(1, k):
        before[:, i] = before[:, i - 1] * R[:, i - 1]
        after[:, k - 1 - i] = after[:, k - i] * R[:, k - i]
    leave_one_out = before * after
    dR = np.einsum("nj,pij->npi", X, dW)
    grads = px[:, None] * np.einsum("npi,ni->np", dR, leave_one_out)
    values = px * before[:, -1] * R[:, -1]
    return np.concatenate([values.real[:, None], grads.real], axis=1)


def parity_expectation_exact(spec: BsbmSpec, alpha: ParityWord) -> float:
    """Full-state ⟨Π_α⟩ via one exact k×k permanent"""
    _check_word(spec, alpha)
    W = parity_submatrix(spec.matrix()[:, :spec.k], alpha)
    value = ryser_permanent(W)
    if abs(value.imag) > IMAG_TOL:
        raise NonRealExpectation(f"parity expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def _real_part(estimate: complex, stderr_imag: float, what: str) -> float:
    if abs(estimate.imag) > max(IMAG_TOL, 5.0 * stderr_imag):
        logger.warning(f"{what}: imaginary part {estimate.imag:.3e} is large for a real expectation")
    return float(estimate.real)


def parity_expectation_estimate(
    spec: BsbmSpec,
    alpha: ParityWord,
    cfg: EstimatorConfig,
    stream: Sequence[int] = (),
) -> Tuple[float, float]:
    """
    Monte-Carlo ⟨Π_α⟩ without enumerating outcomes

    Args:
        spec: model
        alpha: parity word over the model's modes
        cfg: estimator settings
        stream: integers keying an independent sample stream

    Returns:
        (estimate, stderr) of the real part
    """
    _check_word(spec, alpha)
    W = parity_submatrix(spec.matrix()[:, :spec.k], alpha)

    def samples(X):
        values = np.prod(X, axis=1) * np.prod(X @ W.T, axis=1)
        return np.stack([values.real, values.imag], axis=1)

    mean, stderr = sign_vector_mean(samples, spec.k, cfg, stream)
    estimate = _real_part(complex(mean[0], mean[1]), float(stderr[1]), f"parity estimate for α={alpha}")
    return estimate, float(stderr[0])


def parity_value_and_gradient(
    spec: BsbmSpec,
    alpha: ParityWord,
    cfg: EstimatorConfig,
    stream: Sequence[int] = (),
    columns: Optional[np.ndarray] = None,
    dcolumns: Optional[np.ndarray] = None,
) -> Tuple[float, float, np.ndarray]:
    """
    ⟨Π_α⟩ and its parameter gradient from one shared set of sign vectors

    ``columns`` and ``dcolumns`` let a caller reuse U[:, :k] and the Jacobian
    across many parity words.

    Returns:
        (estimate, stderr, gradient)
    """
    if spec.mesh is None:
        raise FixedUnitaryHasNoGradient("model has a fixed unitary; nothing to differentiate")
    _check_word(spec, alpha)
    n_params = spec.m * spec.m
    if columns is None:
        columns = spec.matrix()[:, :spec.k]
    if not any(alpha.alpha) or all(alpha.alpha):
        value = 1.0 if not any(alpha.alpha) else float((-1) ** spec.k)
        return value, 0.0, np.zeros(n_params)
    if dcolumns is None:
        dcolumns = unitary_jacobian(spec.mesh)[:, :, :spec.k]

    W = parity_submatrix(columns, alpha)
    dW = parity_submatrix_derivatives(columns, dcolumns, alpha)
    mean, stderr = sign_vector_mean(lambda X: _value_and_gradient_samples(W, dW, X), spec.k, cfg, stream)
    return float(mean[0]), float(stderr[0]), np.asarray(mean[1:], dtype=float)


def parity_gradient_estimate(
    spec: BsbmSpec,
    alpha: ParityWord,
    cfg: EstimatorConfig,
    stream: Sequence[int] = (),
) -> np.ndarray:
    """Unbiased ∂⟨Π_α⟩/∂params, common sign vectors for every parameter"""
    return parity_value_and_gradient(spec, alpha, cfg, stream)[2]


def postselected_parity(dist: ExactDistribution, alpha: ParityWord) -> float:
    """⟨Π_α⟩ under the postselected collision-free distribution"""
    a = np.asarray(alpha.alpha)
    bits = np.array([o.bits for o in dist.outcomes])
    if bits.shape[1] != a.size:
        raise LengthMismatch(f"parity word has {a.size} bits, outcomes have {bits.shape[1]}")
    signs = 1 - 2 * ((bits @ a) % 2)
    return float(dist.probs @ signs)


def dilute_gap(spec: BsbmSpec, alpha: ParityWord, dist: Optional[ExactDistribution] = None) -> float:
    """Full-state parity minus postselected parity; zero when no mass sits on collisions"""
    if dist is None:
        dist = exact_distribution(spec)
    return parity_expectation_exact(spec, alpha) - postselected_parity(dist, alpha)
