"""
Linear-optical interferometers

A mesh over m modes has m layers of two-mode elements followed by one output
phase per mode. Layer l holds elements on mode pairs (p, p+1) with p ≡ l mod 2,
so the layout is rectangular and every element has its own slot. The element
on pair (p, p+1) acts on those two rows as

    T(θ, φ) = [[e^{iφ} cos θ, -sin θ],
               [e^{iφ} sin θ,  cos θ]]

and the realised unitary is U = diag(e^{iω}) · L_{m-1} ··· L_1 · L_0.

Parameters are flat and layer-major: for each layer, pairs ascending, the
element's (θ, φ); then the m output phases ω. There are m² of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from core.config import get_settings
from core.errors import DecompositionError, DimensionMismatch, NonUnitaryMatrix, ShrinkNotAllowed


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def unitarity_error(matrix: np.ndarray) -> float:
    """max-abs entry of U†U - I"""
    m = matrix.shape[0]
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(m))))


@dataclass(frozen=True)
class ModeUnitary:
    """An m×m single-particle unitary, checked on construction"""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"unitary must be square, got shape {entries.shape}")
        tol = get_settings().BSBM_UNITARITY_TOL
        error = unitarity_error(entries)
        if error > tol:
            raise NonUnitaryMatrix(f"max |U†U - I| = {error:.3e} exceeds tolerance {tol:.1e}")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, m: int) -> "ModeUnitary":
        return cls(np.eye(m, dtype=complex))


@lru_cache(maxsize=None)
def element_layout(m: int) -> Tuple[Tuple[int, int], ...]:
    """(layer, pair) of every mesh element in parameter order"""
    return tuple((layer, p) for layer in range(m) for p in range(layer % 2, m - 1, 2))


def parameter_count(m: int) -> int:
    return 2 * len(element_layout(m)) + m


@dataclass(frozen=True)
class InterferometerMesh:
    """Trainable rectangular mesh; ``params`` follows the layer-major layout"""

    m: int
    params: np.ndarray

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"mesh needs at least one mode, got m={self.m}")
        params = np.asarray(self.params, dtype=float).reshape(-1)
        if params.size != self.m * self.m:
            raise DimensionMismatch(f"mesh over {self.m} modes needs {self.m ** 2} parameters, got {params.size}")
        object.__setattr__(self, "params", _frozen(params))

    @classmethod
    def zeros(cls, m: int) -> "InterferometerMesh":
        return cls(m, np.zeros(m * m))

    @property
    def n_elements(self) -> int:
        return len(element_layout(self.m))

    @property
    def phases(self) -> np.ndarray:
        return self.params[2 * self.n_elements:]

    def with_params(self, params: np.ndarray) -> "InterferometerMesh":
        return InterferometerMesh(self.m, params)


def _element(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * phi)
    return np.array([[e * c, -s], [e * s, c]])


def _element_dtheta(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * phi)
    return np.array([[-e * s, -c], [e * c, -s]])


def _element_dphi(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    e = 1j * np.exp(1j * phi)
    return np.array([[e * c, 0.0], [e * s, 0.0]])


def _mesh_product(mesh: InterferometerMesh) -> np.ndarray:
    m = mesh.m
    out = np.eye(m, dtype=complex)
    for e, (_, p) in enumerate(element_layout(m)):
        rows = slice(p, p + 2)
        out[rows, :] = _element(mesh.params[2 * e], mesh.params[2 * e + 1]) @ out[rows, :]
    out *= np.exp(1j * mesh.phases)[:, None]
    return out


def build_unitary(mesh: InterferometerMesh) -> ModeUnitary:
    """Multiply out the mesh in layer order, output phases last"""
    return ModeUnitary(_mesh_product(mesh))


def unitary_jacobian(mesh: InterferometerMesh) -> np.ndarray:
    """
    Analytic derivatives of the realised unitary

    Returns:
        complex array of shape (m², m, m); entry t is ∂U/∂params[t]
    """
    m = mesh.m
    layout = element_layout(m)
    n_el = len(layout)
    params = mesh.params
    jac = np.zeros((m * m, m, m), dtype=complex)

    # suffix[e] = diag(e^{iω}) · G_{E-1} ··· G_{e+1}
    suffix = np.empty((n_el, m, m), dtype=complex)
    acc = np.diag(np.exp(1j * mesh.phases))
    for e in range(n_el - 1, -1, -1):
        suffix[e] = acc
        p = layout[e][1]
        acc = acc.copy()
        acc[:, p:p + 2] = acc[:, p:p + 2] @ _element(params[2 * e], params[2 * e + 1])

    prefix = np.eye(m, dtype=complex)
    for e, (_, p) in enumerate(layout):
        theta, phi = params[2 * e], params[2 * e + 1]
        block = prefix[p:p + 2, :]
        left = suffix[e][:, p:p + 2]
        jac[2 * e] = left @ (_element_dtheta(theta, phi) @ block)
        jac[2 * e + 1] = left @ (_element_dphi(theta, phi) @ block)
        prefix[p:p + 2, :] = _element(theta, phi) @ block

    unitary = np.exp(1j * mesh.phases)[:, None] * prefix
    for j in range(m):
        jac[2 * n_el + j, j, :] = 1j * unitary[j, :]
    return jac


def _null_by_column_op(v: np.ndarray, row: int, col: int) -> Tuple[float, float]:
    # zero v[row, col] with V <- V T(θ,φ)† acting on columns (col, col+1)
    a, b = v[row, col], v[row, col + 1]
    theta = float(np.arctan2(abs(a), abs(b)))
    phi = float(np.angle(a) - np.angle(b)) if abs(a) > 0 else 0.0
    v[:, col:col + 2] = v[:, col:col + 2] @ _element(theta, phi).conj().T
    return theta, phi


def _null_by_row_op(v: np.ndarray, row: int, col: int) -> Tuple[float, float]:
    # zero v[row, col] with V <- T(θ,φ) V acting on rows (row-1, row)
    a, b = v[row - 1, col], v[row, col]
    theta = float(np.arctan2(abs(b), abs(a)))
    phi = float(np.pi + np.angle(b) - np.angle(a)) if abs(b) > 0 else 0.0
    v[row - 1:row + 1, :] = _element(theta, phi) @ v[row - 1:row + 1, :]
    return theta, phi


def decompose_unitary(unitary: ModeUnitary) -> InterferometerMesh:
    """
    Exact mesh parameters for an arbitrary unitary

    Elements are nulled alternately from the right (column operations) and the
    left (row operations); the left elements are then pushed through the
    residual diagonal so that every element acts before the output phases.
    The resulting sequence is scheduled into the rectangular layout.
    """
    m = unitary.m
    v = np.array(unitary.entries, dtype=complex)
    right: List[Tuple[int, float, float]] = []
    left: List[Tuple[int, float, float]] = []

    for i in range(1, m):
        if i % 2 == 1:
            for j in range(i):
                row, col = m - 1 - j, i - 1 - j
                theta, phi = _null_by_column_op(v, row, col)
                right.append((col, theta, phi))
        else:
            for j in range(1, i + 1):
                row, col = m + j - i - 1, j - 1
                theta, phi = _null_by_row_op(v, row, col)
                left.append((row - 1, theta, phi))

    phases = np.angle(np.diag(v)).copy()
    pushed: List[Tuple[int, float, float]] = []
    for p, theta, phi in reversed(left):
        alpha, beta = phases[p], phases[p + 1]
        pushed.append((p, theta, alpha - beta + np.pi))
        phases[p] = beta - phi + np.pi

    sequence = right + pushed
    params = np.zeros(m * m)
    slot = {key: e for e, key in enumerate(element_layout(m))}
    busy_until = [-1] * m
    for p, theta, phi in sequence:
        layer = max(busy_until[p], busy_until[p + 1]) + 1
        if layer % 2 != p % 2:
            layer += 1
        e = slot.get((layer, p))
        if e is None:
            raise DecompositionError(f"element on pair ({p},{p + 1}) does not fit in a depth-{m} mesh")
        params[2 * e] = theta
        params[2 * e + 1] = phi
        busy_until[p] = busy_until[p + 1] = layer
    params[2 * len(slot):] = np.mod(phases, 2 * np.pi)

    mesh = InterferometerMesh(m, params)
    residual = float(np.max(np.abs(_mesh_product(mesh) - unitary.entries)))
    if residual > 1e-9:
        raise DecompositionError(f"mesh reproduces the target only to {residual:.3e}")
    logger.debug(f"Decomposed {m}-mode unitary into {len(sequence)} elements (residual {residual:.1e})")
    return mesh


def haar_unitary(m: int, rng: np.random.Generator) -> ModeUnitary:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with phases fixed"""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))[None, :]
    return ModeUnitary(q)


def haar_random(m: int, seed: Optional[int] = None) -> InterferometerMesh:
    """Mesh realising a Haar-random unitary; deterministic given ``seed``"""
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    rng = np.random.default_rng(seed)
    return decompose_unitary(haar_unitary(m, rng))


def complete_unitary(column: np.ndarray) -> ModeUnitary:
    """Unitary whose first column is the given unit vector (Householder completion)"""
    v = np.asarray(column, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"column must have unit norm, got {norm}")
    m = v.size
    phase = np.exp(1j * np.angle(v[0])) if abs(v[0]) > 0 else 1.0
    u = v / phase
    w = u.copy()
    w[0] -= 1.0
    w_norm2 = float(np.vdot(w, w).real)
    if w_norm2 < 1e-30:
        householder = np.eye(m, dtype=complex)
    else:
        householder = np.eye(m, dtype=complex) - 2.0 * np.outer(w, w.conj()) / w_norm2
    return ModeUnitary(phase * householder)


def pad_embed(unitary: ModeUnitary, m_new: int) -> ModeUnitary:
    """U ⊕ I on m_new modes"""
    m = unitary.m
    if m_new < m:
        raise ShrinkNotAllowed(f"cannot embed {m} modes into {m_new}")
    out = np.eye(m_new, dtype=complex)
    out[:m, :m] = unitary.entries
    return ModeUnitary(out)


def bleed_embed(unitary: ModeUnitary, m_new: int, k_new: int) -> ModeUnitary:
    """
    Embed U so that the extra photon bleeds straight into the last mode

    Inputs 0..k_new-2 feed U as before; input k_new-1 is routed to output
    m_new-1; later inputs shift down by one. An outcome x of the small sampler
    becomes x‖0…0‖1 with the same probability.

    Args:
        unitary: m-mode unitary of the smaller sampler
        m_new: mode count of the larger sampler, at least m + 1
        k_new: photon count of the larger sampler, one more than the smaller one's

    Returns:
        (U ⊕ I) composed with the input routing permutation
    """
    m = unitary.m
    if m_new < m + 1:
        raise DimensionMismatch(f"bleed embedding needs m_new >= {m + 1}, got {m_new}")
    if not 1 <= k_new <= m + 1:
        raise DimensionMismatch(f"photon count {k_new} incompatible with a {m}-mode sampler")
    k = k_new - 1
    padded = np.eye(m_new, dtype=complex)
    padded[:m, :m] = unitary.entries
    sigma = list(range(k)) + [m_new - 1] + list(range(k, m_new - 1))
    return ModeUnitary(padded[:, sigma])
