"""Dense complex linear algebra: operators, states, commutators, exponentials.

Everything is double precision.  Operators carry a Hermiticity flag that is
checked on construction; inputs that fail the check are rejected rather than
symmetrized.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, HermiticityError, StateError

HERMITIAN_RTOL = 1e-12
NORM_TOL = 1e-10
POSITIVITY_TOL = 1e-10


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest entrywise deviation of ``m`` from its conjugate transpose."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return hermiticity_defect(m) <= HERMITIAN_RTOL * scale


def _as_square(entries, name: str = "operator") -> np.ndarray:
    m = np.array(entries, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """An N x N complex matrix with validated Hermiticity metadata.

    ``hermitian=True`` is a claim that gets checked: the constructor raises
    :class:`HermiticityError` if the matrix is not Hermitian to
    ``1e-12 * max(1, max|entry|)``.
    """

    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = _as_square(self.matrix)
        if self.hermitian and not is_hermitian(m):
            raise HermiticityError(
                f"matrix flagged Hermitian deviates by {hermiticity_defect(m):.3e}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def herm(cls, entries) -> "Operator":
        return cls(entries, hermitian=True)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"Operator(dim={self.dim}, hermitian={self.hermitian})"


def as_matrix(op) -> np.ndarray:
    if isinstance(op, Operator):
        return op.matrix
    return _as_square(op)


def as_hermitian(op, name: str = "operator") -> Operator:
    """Coerce ``op`` to a validated Hermitian :class:`Operator`."""
    if isinstance(op, Operator) and op.hermitian:
        return op
    m = as_matrix(op)
    if not is_hermitian(m):
        raise HermiticityError(f"{name} is not Hermitian (defect {hermiticity_defect(m):.3e})")
    return Operator(m, hermitian=True)


class StateKind(str, Enum):
    PURE = "pure"
    DENSITY = "density"


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A normalized pure state vector or a valid density matrix."""

    kind: StateKind
    data: np.ndarray

    def __post_init__(self):
        kind = StateKind(self.kind)
        d = np.array(self.data, dtype=np.complex128)
        if kind is StateKind.PURE:
            if d.ndim != 1 or d.size < 1:
                raise DimensionError(f"pure state must be a non-empty vector, got shape {d.shape}")
            norm2 = float(np.vdot(d, d).real)
            if abs(norm2 - 1.0) > NORM_TOL:
                raise StateError(f"pure state has squared norm {norm2!r}, expected 1")
        else:
            d = _as_square(d, "density matrix")
            if not is_hermitian(d):
                raise StateError("density matrix is not Hermitian")
            tr = np.trace(d).real
            if abs(tr - 1.0) > NORM_TOL:
                raise StateError(f"density matrix has trace {tr!r}, expected 1")
            lo = float(np.linalg.eigvalsh(d)[0])
            if lo < -POSITIVITY_TOL:
                raise StateError(f"density matrix has negative eigenvalue {lo!r}")
        d.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", d)

    @classmethod
    def pure(cls, vector) -> "QuantumState":
        return cls(StateKind.PURE, vector)

    @classmethod
    def density(cls, matrix) -> "QuantumState":
        return cls(StateKind.DENSITY, matrix)

    @classmethod
    def basis(cls, dim: int, k: int) -> "QuantumState":
        v = np.zeros(dim, dtype=np.complex128)
        v[k] = 1.0
        return cls.pure(v)

    @property
    def is_pure(self) -> bool:
        return self.kind is StateKind.PURE

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_density(self) -> "QuantumState":
        return self if not self.is_pure else QuantumState.density(self.density_matrix())


def commutator(a, b) -> Operator:
    """Return ``ab - ba``."""
    ma, mb = as_matrix(a), as_matrix(b)
    if ma.shape != mb.shape:
        raise DimensionError(f"commutator of {ma.shape} and {mb.shape} operators")
    return Operator(ma @ mb - mb @ ma)


def expectation(state: QuantumState, a) -> complex:
    """<psi|A|psi> for pure states, Tr(rho A) for density matrices."""
    ma = as_matrix(a)
    if ma.shape[0] != state.dim:
        raise DimensionError(f"state of dim {state.dim} with operator of dim {ma.shape[0]}")
    if state.is_pure:
        return complex(np.vdot(state.data, ma @ state.data))
    return complex(np.einsum("ij,ji->", state.data, ma))


def expm_hermitian(h, scale: complex) -> Operator:
    """``exp(scale * h)`` for Hermitian ``h`` via its eigendecomposition."""
    if isinstance(h, Operator):
        if not h.hermitian:
            h = as_hermitian(h, "exponent")
        m = h.matrix
    else:
        m = as_hermitian(h, "exponent").matrix
    w, v = np.linalg.eigh(m)
    return Operator((v * np.exp(scale * w)) @ v.conj().T)


def expm_hermitian_stack(hs: np.ndarray, scale: complex) -> np.ndarray:
    """Batched :func:`expm_hermitian` over a ``(K, N, N)`` stack of Hermitian matrices.

    The caller is responsible for Hermiticity; only the lower triangle is read.
    """
    w, v = np.linalg.eigh(hs)
    return (v * np.exp(scale * w)[:, None, :]) @ dagger(v)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(m, -1, -2).conj()
