"""
Hermitian-operator arithmetic.

Dense complex matrices with optional bipartite shape metadata, the spectral
functionals used throughout (trace norm, Hilbert-Schmidt inner product),
partial trace / partial transpose on a ``(d_A, d_B)`` split, and the Helstrom
bias with its optimal projector.

Operators are immutable: the entry array is copied on construction and
flagged read-only, so instances can be shared between threads.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from attrs import define, field

from .config import get_settings
from .errors import DimensionError, ValidationError

PARTIES = ("A", "B")
ROUNDOFF = 1e-15


def _as_matrix(value) -> np.ndarray:
    matrix = np.array(value, dtype=np.complex128, copy=True)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {matrix.shape}",
                             invariant="square")
    return matrix


def _as_shape(value) -> Optional[Tuple[int, int]]:
    if value is None:
        return None
    d_a, d_b = (int(x) for x in value)
    return (d_a, d_b)


@define(frozen=True, eq=False)
class HermitianOp:
    """
    A dense Hermitian matrix.

    ``shape`` is the optional bipartite split ``(d_A, d_B)`` with
    ``d_A * d_B == dim``. Construction rejects non-finite entries and
    anti-Hermitian parts larger than ``hermitian_tol`` relative to the largest
    entry, then stores the symmetrised matrix ``(H + H^dagger)/2``. Skew
    below ``ROUNDOFF`` is ignored.
    """

    entries: np.ndarray = field(converter=_as_matrix)
    shape: Optional[Tuple[int, int]] = field(default=None, converter=_as_shape)

    def __attrs_post_init__(self):
        settings = get_settings()
        m = self.entries
        if not np.all(np.isfinite(m)):
            raise ValidationError("operator has non-finite entries", invariant="finite")
        if m.shape[0] > settings.dim_cap:
            raise DimensionError(f"dimension {m.shape[0]} exceeds cap {settings.dim_cap}",
                                 invariant="dim_cap", magnitude=float(m.shape[0]))
        skew = float(np.max(np.abs(m - m.conj().T)))
        skew = skew / float(np.max(np.abs(m))) if skew > ROUNDOFF else 0.0
        if skew > settings.hermitian_tol:
            raise ValidationError("operator is not Hermitian", invariant="hermitian",
                                  magnitude=skew)
        if self.shape is not None and self.shape[0] * self.shape[1] != m.shape[0]:
            raise DimensionError(f"shape {self.shape} does not factor dimension {m.shape[0]}",
                                 invariant="shape")
        symmetric = 0.5 * (m + m.conj().T)
        symmetric.flags.writeable = False
        object.__setattr__(self, "entries", symmetric)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def with_shape(self, shape: Optional[Tuple[int, int]]) -> "HermitianOp":
        return HermitianOp(self.entries, shape)

    def __add__(self, other: "HermitianOp") -> "HermitianOp":
        _check_same_dim(self, other)
        return HermitianOp(self.entries + other.entries, self.shape or other.shape)

    def __sub__(self, other: "HermitianOp") -> "HermitianOp":
        _check_same_dim(self, other)
        return HermitianOp(self.entries - other.entries, self.shape or other.shape)

    def __mul__(self, scalar: float) -> "HermitianOp":
        return HermitianOp(float(scalar) * self.entries, self.shape)

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOp":
        return HermitianOp(-self.entries, self.shape)

    def allclose(self, other: "HermitianOp", atol: float = 1e-9) -> bool:
        return self.dim == other.dim and np.allclose(self.entries, other.entries, atol=atol, rtol=0)

    def __repr__(self) -> str:
        return f"HermitianOp(dim={self.dim}, shape={self.shape})"


@define(frozen=True, eq=False)
class PureState:
    """A unit vector; ``projector()`` gives the rank-1 density matrix."""

    amplitudes: np.ndarray = field(converter=lambda v: np.array(v, dtype=np.complex128).ravel())

    def __attrs_post_init__(self):
        if self.amplitudes.size == 0:
            raise DimensionError("state must have positive dimension", invariant="dim")
        deviation = abs(float(np.linalg.norm(self.amplitudes)) - 1.0)
        if deviation > 1e-12:
            raise ValidationError("state is not normalised", invariant="unit_norm",
                                  magnitude=deviation)
        self.amplitudes.flags.writeable = False

    @classmethod
    def normalised(cls, vector) -> "PureState":
        v = np.array(vector, dtype=np.complex128).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValidationError("cannot normalise the zero vector", invariant="unit_norm")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> HermitianOp:
        return HermitianOp(np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "PureState") -> float:
        """Squared overlap ``|<self|other>|^2``."""
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@define(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues sorted descending, with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def positive_projector(self, include_zero: bool = False) -> np.ndarray:
        mask = self.eigenvalues >= 0 if include_zero else self.eigenvalues > 0
        v = self.eigenvectors[:, mask]
        return v @ v.conj().T


def _check_same_dim(a: HermitianOp, b: HermitianOp) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}", invariant="dim")


def spectrum(h: HermitianOp) -> Spectrum:
    values, vectors = scipy.linalg.eigh(h.entries)
    order = np.argsort(values)[::-1]
    return Spectrum(values[order], vectors[:, order])


def eigenvalues(h: HermitianOp) -> np.ndarray:
    """Eigenvalues, ascending."""
    return scipy.linalg.eigvalsh(h.entries)


def trace_norm(h: HermitianOp) -> float:
    return float(np.sum(np.abs(eigenvalues(h))))


def hs_inner(a: HermitianOp, b: HermitianOp) -> float:
    """``tr(AB)``, real for Hermitian arguments."""
    _check_same_dim(a, b)
    return float(np.real(np.vdot(b.entries, a.entries)))


def hs_norm(a: HermitianOp) -> float:
    return float(np.sqrt(max(hs_inner(a, a), 0.0)))


def _require_shape(h: HermitianOp) -> Tuple[int, int]:
    if h.shape is None:
        raise DimensionError("operator has no bipartite shape", invariant="shape")
    return h.shape


def partial_trace(h: HermitianOp, side: str) -> HermitianOp:
    """
    Trace out one party.

    Args:
        h: Operator with bipartite shape ``(d_A, d_B)``.
        side: The party to trace out, ``"A"`` or ``"B"``; ``partial_trace(h, "B")``
            is ``tr_B(h)`` and lives on party A.

    Returns:
        The reduced operator (no shape metadata).
    """
    d_a, d_b = _require_shape(h)
    if side not in PARTIES:
        raise ValidationError(f"side must be one of {PARTIES}, got {side!r}", invariant="side")
    t = h.entries.reshape(d_a, d_b, d_a, d_b)
    if side == "B":
        return HermitianOp(np.einsum("ijkj->ik", t))
    return HermitianOp(np.einsum("ijil->jl", t))


def partial_transpose(h: HermitianOp) -> HermitianOp:
    """Transpose on party B in the computational basis."""
    d_a, d_b = _require_shape(h)
    t = h.entries.reshape(d_a, d_b, d_a, d_b).transpose(0, 3, 2, 1)
    return HermitianOp(t.reshape(d_a * d_b, d_a * d_b), h.shape)


def tensor_product(a: HermitianOp, b: HermitianOp) -> HermitianOp:
    cap = get_settings().dim_cap
    if a.dim * b.dim > cap:
        raise DimensionError(f"tensor product dimension {a.dim * b.dim} exceeds cap {cap}",
                             invariant="dim_cap", magnitude=float(a.dim * b.dim))
    return HermitianOp(np.kron(a.entries, b.entries), (a.dim, b.dim))


def conjugate(h: HermitianOp, unitary: np.ndarray) -> HermitianOp:
    """``U H U^dagger``; shape metadata is kept."""
    u = require_unitary(unitary, h.dim)
    return HermitianOp(u @ h.entries @ u.conj().T, h.shape)


def require_unitary(unitary, dim: Optional[int] = None, tol: float = 1e-10) -> np.ndarray:
    u = np.asarray(unitary, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or (dim is not None and u.shape[0] != dim):
        raise DimensionError(f"unitary of shape {u.shape} does not act on dimension {dim}",
                             invariant="dim")
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if defect > tol:
        raise ValidationError("matrix is not unitary", invariant="unitary", magnitude=defect)
    return u


def require_density(h: HermitianOp, name: str = "state", tol: float = 1e-9) -> HermitianOp:
    trace_defect = abs(h.trace - 1.0)
    if trace_defect > tol:
        raise ValidationError(f"{name} does not have unit trace", invariant="unit_trace",
                              magnitude=trace_defect)
    lowest = float(eigenvalues(h)[0])
    if lowest < -tol:
        raise ValidationError(f"{name} is not positive semidefinite", invariant="positive",
                              magnitude=-lowest)
    return h


def require_traceless(h: HermitianOp, tol: float = 1e-10) -> HermitianOp:
    if abs(h.trace) > tol:
        raise ValidationError("operator must be traceless", invariant="traceless",
                              magnitude=abs(h.trace))
    return h


@define(frozen=True, eq=False)
class HelstromResult:
    bias: float
    projector: HermitianOp


def helstrom_bias(rho: HermitianOp, sigma: HermitianOp) -> HelstromResult:
    """
    Optimal two-outcome discrimination of equiprobable ``rho`` and ``sigma``.

    Returns:
        ``bias = ||rho - sigma||_1 / 2`` and the projector onto the positive
        eigenspace of ``rho - sigma``, which attains it.
    """
    require_density(rho, "rho")
    require_density(sigma, "sigma")
    diff = rho - sigma
    spec = spectrum(diff)
    bias = 0.5 * float(np.sum(np.abs(spec.eigenvalues)))
    return HelstromResult(min(bias, 1.0), HermitianOp(spec.positive_projector()))


def identity(d: int, shape: Optional[Tuple[int, int]] = None) -> HermitianOp:
    return HermitianOp(np.eye(d), shape)


def diagonal(values: Sequence[float]) -> HermitianOp:
    return HermitianOp(np.diag(np.asarray(values, dtype=float)))


def zero(d: int, shape: Optional[Tuple[int, int]] = None) -> HermitianOp:
    return HermitianOp(np.zeros((d, d)), shape)


def swap_operator(d: int) -> HermitianOp:
    """The flip ``F|i>|j> = |j>|i>`` on ``C^d (x) C^d``."""
    f = np.eye(d * d).reshape(d, d, d, d).transpose(1, 0, 2, 3).reshape(d * d, d * d)
    return HermitianOp(f, (d, d))


def maximally_entangled(d: int) -> HermitianOp:
    """Projector onto ``sum_i |ii> / sqrt(d)``."""
    v = np.eye(d).reshape(d * d) / np.sqrt(d)
    return HermitianOp(np.outer(v, v), (d, d))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
