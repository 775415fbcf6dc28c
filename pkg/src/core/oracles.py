"""
Brute-force reference computations

Everything here is deliberately slow and independent of the fast paths: the
Fock-space simulator expands the output state as a polynomial in creation
operators, the permanent is summed over all permutations, and the spectral
measure is the explicit 2^m × 2^m Walsh transform. ``run_oracle_suite``
checks the fast paths against them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial, prod
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from core.born_machine import (
    BsbmSpec,
    ParityWord,
    exact_distribution,
    parity_expectation_exact,
    parity_gradient_estimate,
)
from core.combinatorics import binomial, enumerate_outcomes, int_to_bits
from core.config import get_settings
from core.errors import EnumerationTooLarge, SpaceTooLarge
from core.interferometer import InterferometerMesh, haar_random, haar_unitary
from core.permanent import EstimatorConfig, all_sign_vectors, rys_samples, ryser_permanent
from core.readout import Construction, ReadoutMap, ReadoutTower, build_tower, pushforward_exact, universal_column_model
from core.training import KernelSpec, mmd2_exact, mmd2_spectral, total_variation


def naive_permanent(W: np.ndarray) -> complex:
    """Σ over all k! permutations"""
    W = np.asarray(W, dtype=complex)
    k = W.shape[0]
    return complex(sum(prod(W[i, perm[i]] for i in range(k)) for perm in permutations(range(k))))


def fock_output_state(unitary: np.ndarray, k: int, max_dim: Optional[int] = None) -> Dict[Tuple[int, ...], complex]:
    """
    Full output state of k single photons in the first k modes

    Returns:
        occupation tuple -> amplitude, over every k-photon Fock state reached
    """
    unitary = np.asarray(unitary, dtype=complex)
    m = unitary.shape[0]
    if max_dim is None:
        max_dim = get_settings().BSBM_FOCK_MAX_DIM
    dim = binomial(m + k - 1, k)
    if dim > max_dim:
        raise EnumerationTooLarge(f"Fock space of {k} photons in {m} modes has dimension {dim} > {max_dim}")

    # coefficients of the monomials Π a_i†^{n_i} applied to vacuum
    poly: Dict[Tuple[int, ...], complex] = {(0,) * m: 1.0 + 0.0j}
    for j in range(k):
        expanded: Dict[Tuple[int, ...], complex] = {}
        for occupation, coeff in poly.items():
            for i in range(m):
                if unitary[i, j] == 0:
                    continue
                raised = occupation[:i] + (occupation[i] + 1,) + occupation[i + 1:]
                expanded[raised] = expanded.get(raised, 0.0) + coeff * unitary[i, j]
        poly = expanded
    return {occ: coeff * np.sqrt(prod(factorial(n) for n in occ)) for occ, coeff in poly.items()}


def fock_parity_expectation(unitary: np.ndarray, k: int, alpha: ParityWord) -> float:
    state = fock_output_state(unitary, k)
    return float(sum(abs(a) ** 2 * (-1) ** sum(x * n for x, n in zip(alpha.alpha, occ)) for occ, a in state.items()))


def fock_collision_free_probs(unitary: np.ndarray, k: int) -> np.ndarray:
    """Collision-free output probabilities in rank order, renormalised"""
    state = fock_output_state(unitary, k)
    m = np.asarray(unitary).shape[0]
    probs = np.array([abs(state.get(s.bits, 0.0)) ** 2 for s in enumerate_outcomes(m, k)])
    return probs / probs.sum()


def walsh_spectrum_bruteforce(kernel: KernelSpec) -> np.ndarray:
    """G(α) = 2^{-m} Σ_z κ(z)(-1)^{α·z} with an explicit transform matrix"""
    m = kernel.m
    if m > 10:
        raise SpaceTooLarge(f"explicit Walsh matrix over {m} bits is too large")
    size = 1 << m
    kappa = np.array([kernel(int_to_bits(z, m), (0,) * m) for z in range(size)])
    idx = np.arange(size)
    overlap = idx[:, None] & idx[None, :]
    parity = np.array([bin(v).count("1") % 2 for v in range(size)])[overlap]
    return ((1 - 2 * parity) @ kappa) / size


def finite_difference_gradient(fn: Callable[[np.ndarray], float], params: np.ndarray, step: float = 1e-5) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for t in range(params.size):
        shift = np.zeros_like(params)
        shift[t] = step
        grad[t] = (fn(params + shift) - fn(params - shift)) / (2 * step)
    return grad


def readout_is_surjective(readout: ReadoutMap) -> bool:
    values = {readout.value(s) for s in enumerate_outcomes(readout.m, readout.k)}
    return len(values) == 1 << readout.n


def tower_compatibility_violations(tower: ReadoutTower) -> List[str]:
    """Outcomes where f_{j+1}(R_j(s)) differs from f_j(s), over enumerable adjacent levels"""
    problems = []
    for j in range(1, len(tower)):
        lower, upper = tower.level(j), tower.level(j + 1)
        try:
            outcomes = enumerate_outcomes(lower.m, lower.k)
        except EnumerationTooLarge:
            continue
        for s in outcomes:
            if upper.value(tower.embed_outcome(s, j)) != lower.value(s):
                problems.append(f"level {j}: {s}")
    return problems


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    detail: str


def _check(name: str, error: float, tol: float) -> OracleResult:
    return OracleResult(name, bool(error <= tol), f"max_error={error:.3e} tol={tol:.0e}")


def _random_word(m: int, rng: np.random.Generator) -> ParityWord:
    return ParityWord(tuple(int(b) for b in rng.integers(0, 2, size=m)))


def check_gurvits_identity(rng: np.random.Generator, trials: int = 10) -> OracleResult:
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, 7))
        U = haar_unitary(k + 3, rng).entries
        W = U[:k, :k]
        exhaustive = complex(np.mean(rys_samples(W, all_sign_vectors(k))))
        exact = ryser_permanent(W)
        worst = max(worst, abs(exhaustive - exact) / max(abs(exact), 1e-12))
    return _check("gurvits_identity", worst, 1e-9)


def check_ryser_against_naive(rng: np.random.Generator) -> OracleResult:
    W = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    exact = naive_permanent(W)
    return _check("ryser_vs_permutation_sum", abs(ryser_permanent(W) - exact) / abs(exact), 1e-10)


def check_parity_exactness(rng: np.random.Generator, trials: int = 10) -> OracleResult:
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(3, 7))
        k = int(rng.integers(1, 4))
        U = haar_unitary(m, rng)
        spec = BsbmSpec(m=m, k=k, unitary=U)
        alpha = _random_word(m, rng)
        worst = max(worst, abs(parity_expectation_exact(spec, alpha) - fock_parity_expectation(U.entries, k, alpha)))
    return _check("parity_exactness", worst, 1e-8)


def check_distribution(rng: np.random.Generator) -> OracleResult:
    U = haar_unitary(6, rng)
    dist = exact_distribution(BsbmSpec(m=6, k=2, unitary=U))
    error = float(np.max(np.abs(dist.probs - fock_collision_free_probs(U.entries, 2))))
    single = exact_distribution(BsbmSpec(m=6, k=1, unitary=U))
    error = max(error, abs(dist.probs.sum() - 1.0), abs(single.Z - 1.0))
    return _check("collision_free_distribution", error, 1e-8)


def check_spectral_identity(rng: np.random.Generator) -> OracleResult:
    worst = 0.0
    m = 6
    for sigma in (0.5, 1.0, 2.0):
        kernel = KernelSpec(m=m, sigma=sigma)
        p = rng.dirichlet(np.ones(1 << m))
        q = rng.dirichlet(np.ones(1 << m))
        worst = max(worst, abs(mmd2_exact(p, q, kernel) - mmd2_spectral(p, q, kernel)))
        worst = max(worst, float(np.max(np.abs(kernel.spectral_weights() - walsh_spectrum_bruteforce(kernel)))))
    return _check("spectral_identity", worst, 1e-9)


def check_gradient(rng: np.random.Generator) -> OracleResult:
    m, k = 4, 2
    mesh = haar_random(m, int(rng.integers(2 ** 31)))
    alpha = ParityWord((1, 0, 1, 1))
    spec = BsbmSpec(m=m, k=k, mesh=mesh)
    analytic = parity_gradient_estimate(spec, alpha, EstimatorConfig(exhaustive=True))

    def value(params):
        return parity_expectation_exact(BsbmSpec(m=m, k=k, mesh=InterferometerMesh(m, params)), alpha)

    numeric = finite_difference_gradient(value, mesh.params)
    error = float(np.max(np.abs(analytic - numeric)) / max(1.0, float(np.max(np.abs(numeric)))))
    return _check("gradient_vs_finite_difference", error, 1e-4)


def check_towers(n: int = 4) -> OracleResult:
    problems = []
    bleed = build_tower(n, Construction.BLEED, base=(6, 2), levels=3)
    problems += tower_compatibility_violations(bleed)
    interp = build_tower(n, Construction.INTERP, photons=3)
    for tower in (bleed, interp):
        for readout in tower.readouts:
            if binomial(readout.m, readout.k) >= 1 << n and not readout_is_surjective(readout):
                problems.append(f"{readout.describe()} not surjective")
    detail = "ok" if not problems else "; ".join(problems[:5])
    return OracleResult("tower_structure", not problems, detail)


def check_universality(rng: np.random.Generator, n: int = 4, trials: int = 5) -> OracleResult:
    top = build_tower(n, Construction.INTERP, photons=3).readouts[-1]
    worst = 0.0
    for _ in range(trials):
        target = rng.dirichlet(np.ones(1 << n))
        worst = max(worst, total_variation(target, pushforward_exact(universal_column_model(top, target))))
    return _check("universality_witness", worst, 1e-9)


def run_oracle_suite(seed: int = 0) -> List[OracleResult]:
    """Run every brute-force cross-check; deterministic given ``seed``"""
    rng = np.random.default_rng(seed)
    checks = [
        lambda: check_gurvits_identity(rng),
        lambda: check_ryser_against_naive(rng),
        lambda: check_parity_exactness(rng),
        lambda: check_distribution(rng),
        lambda: check_spectral_identity(rng),
        lambda: check_gradient(rng),
        lambda: check_towers(),
        lambda: check_universality(rng),
    ]
    results = []
    for check in checks:
        result = check()
        level = "info" if result.passed else "error"
        getattr(logger, level)(f"oracle {result.name}: {'pass' if result.passed else 'FAIL'} ({result.detail})")
        results.append(result)
    return results
