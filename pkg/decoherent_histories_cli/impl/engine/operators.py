"""
Dense complex linear algebra on finite Hilbert spaces.

States and operators are immutable wrappers around read-only complex128
numpy arrays. A projector onto computational basis states can be declared
through a boolean `support` mask; its dense matrix is only built on first
use, and chained evaluation applies it as a mask.

Conventions: hbar = 1, the propagator is U(t) = exp(-iHt), Heisenberg
operators are A(t) = U(t)^dag A U(t), and tensor products follow
numpy.kron ordering (first factor most significant).
"""

import functools
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from ..errors import (NotHermitianError, NotProjectorError,
                      SignatureMismatchError, ValidationError, Violation)
from .tolerances import (HERMITIAN_TOL, NORMALIZED_TOL, STRUCTURAL_TOL)


HERMITIAN = 'hermitian'
UNITARY = 'unitary'
PROJECTOR = 'projector'
KNOWN_TAGS = frozenset([HERMITIAN, UNITARY, PROJECTOR])


# -------------------------------------------------------------------------
# UTILS

def _frozen(values, dtype=complex) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.flags.writeable = False
    return array


def max_abs(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix)))


# -------------------------------------------------------------------------
# FACTOR SIGNATURE

class FactorSignature:
    def __init__(self, factors: Sequence[int]):
        factors = tuple(int(f) for f in factors)
        if not factors or any(f < 1 for f in factors):
            raise SignatureMismatchError("factor dimensions must be positive, got {}".format(factors))
        self.factors: Tuple[int, ...] = factors

    @property
    def dim(self) -> int:
        return int(np.prod(self.factors))

    def check(self, dim: int):
        if self.dim != dim:
            raise SignatureMismatchError(
                "signature {} has product {} but the operand has dimension {}".format(
                    self.factors, self.dim, dim),
                [Violation('signature', deviation=abs(self.dim - dim))])

    def concat(self, other: 'FactorSignature') -> 'FactorSignature':
        return FactorSignature(self.factors + other.factors)

    def __len__(self):
        return len(self.factors)

    def __eq__(self, other):
        return isinstance(other, FactorSignature) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __repr__(self):
        return "FactorSignature({})".format(list(self.factors))


def _signature_or_flat(signature: Optional[FactorSignature], dim: int) -> FactorSignature:
    return signature if signature is not None else FactorSignature([dim])


# -------------------------------------------------------------------------
# STATE VECTOR

class StateVector:
    def __init__(self, amplitudes, normalized: bool = False, signature: Optional[FactorSignature] = None):
        amplitudes = _frozen(np.asarray(amplitudes, dtype=complex).reshape(-1))
        if amplitudes.size == 0:
            raise ValidationError("a state needs at least one amplitude")
        if not np.all(np.isfinite(amplitudes)):
            raise ValidationError("state amplitudes must be finite")
        if signature is not None:
            signature.check(amplitudes.size)
        self.amplitudes: np.ndarray = amplitudes
        self.signature: Optional[FactorSignature] = signature
        self.normalized: bool = bool(normalized)
        if self.normalized:
            deviation = abs(self.norm() - 1.0)
            if deviation > NORMALIZED_TOL:
                raise ValidationError("state flagged normalized has |norm - 1| = {:.3e}".format(deviation),
                                      [Violation('normalization', deviation=deviation)])

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized_copy(self) -> 'StateVector':
        norm = self.norm()
        if norm == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / norm, normalized=True, signature=self.signature)

    def inner(self, other: 'StateVector') -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> 'Operator':
        return Operator(np.outer(self.amplitudes, self.amplitudes.conj()),
                        tags=[HERMITIAN], signature=self.signature)

    def __repr__(self):
        return "StateVector(dim={}, norm={:.6g})".format(self.dim, self.norm())


def basis_state(dim: int, index: int, signature: Optional[FactorSignature] = None) -> StateVector:
    amplitudes = np.zeros(dim, dtype=complex)
    amplitudes[index] = 1.0
    return StateVector(amplitudes, normalized=True, signature=signature)


# -------------------------------------------------------------------------
# OPERATOR

class Operator:
    """
    Square complex matrix with lazily asserted structural tags.

    Tags are promises made by whoever built the operator; `verify()` checks
    them on demand against the structural tolerances.
    """

    def __init__(self, entries=None, tags: Iterable[str] = (),
                 signature: Optional[FactorSignature] = None, support=None):
        tags = frozenset(tags)
        unknown = tags - KNOWN_TAGS
        if unknown:
            raise ValidationError("unknown operator tags: {}".format(sorted(unknown)))

        if support is not None:
            if entries is not None:
                raise ValidationError("give either entries or a support mask, not both")
            support = _frozen(np.asarray(support, dtype=bool).reshape(-1), dtype=bool)
            if support.size == 0:
                raise ValidationError("support mask must not be empty")
            self._entries = None
            self._dim = support.size
            tags = tags | {HERMITIAN, PROJECTOR}
        else:
            entries = _frozen(entries)
            if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
                raise ValidationError("operator entries must form a non-empty square matrix, got shape {}".format(
                    entries.shape))
            self._entries = entries
            self._dim = entries.shape[0]

        if signature is not None:
            signature.check(self._dim)
        self.support: Optional[np.ndarray] = support
        self.tags: frozenset = tags
        self.signature: Optional[FactorSignature] = signature

    @property
    def dim(self) -> int:
        return self._dim

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        if self._entries is not None:
            return self._entries
        return _frozen(np.diag(self.support.astype(complex)))

    def with_tags(self, *tags: str) -> 'Operator':
        if self.support is not None:
            return Operator(support=self.support, tags=self.tags | set(tags), signature=self.signature)
        return Operator(self._entries, tags=self.tags | set(tags), signature=self.signature)

    # -- structure

    def dag(self) -> 'Operator':
        if self.support is not None:
            return self
        return Operator(self.matrix.conj().T, tags=self.tags, signature=self.signature)

    def max_asymmetry(self) -> float:
        if self.support is not None:
            return 0.0
        return max_abs(self.matrix - self.matrix.conj().T)

    def unitarity_defect(self) -> float:
        m = self.matrix
        return max_abs(m.conj().T @ m - np.eye(self.dim))

    def idempotency_defect(self) -> float:
        if self.support is not None:
            return 0.0
        m = self.matrix
        return max_abs(m @ m - m)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.max_asymmetry() <= tol

    def is_unitary(self, tol: float = STRUCTURAL_TOL) -> bool:
        return self.unitarity_defect() <= tol

    def is_projector(self, tol: float = STRUCTURAL_TOL) -> bool:
        return self.is_hermitian(tol) and self.idempotency_defect() <= tol

    def verify(self) -> 'Operator':
        if HERMITIAN in self.tags or PROJECTOR in self.tags:
            asymmetry = self.max_asymmetry()
            tol = HERMITIAN_TOL if PROJECTOR not in self.tags else STRUCTURAL_TOL
            if asymmetry > tol:
                raise NotHermitianError(asymmetry, tol)
        if PROJECTOR in self.tags:
            check_projector(self)
        if UNITARY in self.tags:
            defect = self.unitarity_defect()
            if defect > STRUCTURAL_TOL:
                raise ValidationError("operator is not unitary: max |A^dag A - I| = {:.3e}".format(defect),
                                      [Violation('unitary', deviation=defect)])
        return self

    def rank(self, tol: float = 1e-8) -> int:
        if self.support is not None:
            return int(np.count_nonzero(self.support))
        return int(np.linalg.matrix_rank(self.matrix, tol=tol))

    def trace(self) -> complex:
        if self.support is not None:
            return complex(np.count_nonzero(self.support))
        return complex(np.trace(self.matrix))

    # -- action

    def apply(self, vectors):
        """apply to a StateVector, a vector or a matrix whose columns are vectors"""
        if isinstance(vectors, StateVector):
            return StateVector(self.apply(vectors.amplitudes), signature=vectors.signature)
        vectors = np.asarray(vectors)
        if vectors.shape[0] != self.dim:
            raise SignatureMismatchError("operator of dimension {} applied to operand of dimension {}".format(
                self.dim, vectors.shape[0]))
        if self.support is not None:
            if vectors.ndim == 1:
                return np.where(self.support, vectors, 0)
            return np.where(self.support[:, None], vectors, 0)
        return self.matrix @ vectors

    def __matmul__(self, other):
        if isinstance(other, Operator):
            if other.dim != self.dim:
                raise SignatureMismatchError("cannot compose operators of dimension {} and {}".format(
                    self.dim, other.dim))
            if self.support is not None and other.support is not None:
                return Operator(support=self.support & other.support, signature=self.signature)
            tags = [UNITARY] if UNITARY in self.tags and UNITARY in other.tags else []
            return Operator(self.matrix @ other.matrix, tags=tags, signature=self.signature)
        if isinstance(other, StateVector):
            return self.apply(other)
        return NotImplemented

    def __add__(self, other: 'Operator') -> 'Operator':
        tags = [HERMITIAN] if HERMITIAN in self.tags and HERMITIAN in other.tags else []
        return Operator(self.matrix + other.matrix, tags=tags, signature=self.signature)

    def __sub__(self, other: 'Operator') -> 'Operator':
        tags = [HERMITIAN] if HERMITIAN in self.tags and HERMITIAN in other.tags else []
        return Operator(self.matrix - other.matrix, tags=tags, signature=self.signature)

    def __mul__(self, scalar) -> 'Operator':
        tags = [HERMITIAN] if HERMITIAN in self.tags and np.isreal(scalar) else []
        return Operator(self.matrix * scalar, tags=tags, signature=self.signature)

    __rmul__ = __mul__

    def __repr__(self):
        kind = 'support' if self.support is not None else 'dense'
        return "Operator(dim={}, {}, tags={})".format(self.dim, kind, sorted(self.tags))


def check_projector(operator: Operator, tol: float = STRUCTURAL_TOL) -> Operator:
    deviation = operator.idempotency_defect()
    if deviation > tol:
        raise NotProjectorError(deviation, tol)
    asymmetry = operator.max_asymmetry()
    if asymmetry > tol:
        raise NotHermitianError(asymmetry, tol)
    return operator


# -------------------------------------------------------------------------
# CONSTRUCTORS

def identity(dim: int, signature: Optional[FactorSignature] = None) -> Operator:
    return Operator(support=np.ones(dim, dtype=bool), tags=[UNITARY], signature=signature)


def basis_projector(dim: int, indices: Iterable[int], signature: Optional[FactorSignature] = None) -> Operator:
    mask = np.zeros(dim, dtype=bool)
    indices = list(indices)
    if any(i < 0 or i >= dim for i in indices):
        raise ValidationError("basis indices {} out of range for dimension {}".format(indices, dim))
    mask[indices] = True
    return Operator(support=mask, signature=signature)


def factor_projector(signature: FactorSignature, factor: int, states: Iterable[int]) -> Operator:
    """projector onto `states` of one tensor factor, identity on the others"""
    if factor < 0 or factor >= len(signature):
        raise SignatureMismatchError("factor {} out of range for {}".format(factor, signature))
    states = list(states)
    if any(s < 0 or s >= signature.factors[factor] for s in states):
        raise ValidationError("states {} out of range for factor {} of dimension {}".format(
            states, factor, signature.factors[factor]))
    mask = np.zeros(signature.factors, dtype=bool)
    index = [slice(None)] * len(signature)
    index[factor] = states
    mask[tuple(index)] = True
    return Operator(support=mask.reshape(-1), signature=signature)


def ket_projector(vectors, signature: Optional[FactorSignature] = None) -> Operator:
    """orthogonal projector onto the span of the given column vectors"""
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    basis = la.orth(vectors)
    matrix = basis @ basis.conj().T
    return Operator((matrix + matrix.conj().T) / 2, tags=[HERMITIAN, PROJECTOR], signature=signature)


def hermitian(matrix, signature: Optional[FactorSignature] = None) -> Operator:
    """wrap a matrix meant to be hermitian, rejecting it when it is not"""
    operator = Operator(matrix, signature=signature)
    asymmetry = operator.max_asymmetry()
    if asymmetry > HERMITIAN_TOL:
        raise NotHermitianError(asymmetry, HERMITIAN_TOL)
    return operator.with_tags(HERMITIAN)


# -------------------------------------------------------------------------
# EVOLUTION

class Evolution:
    """
    Spectral decomposition of a time-independent Hamiltonian.

    Computed once and shared by every propagator, Heisenberg conjugation and
    chained advance that uses the same H.
    """

    def __init__(self, hamiltonian: Operator):
        asymmetry = hamiltonian.max_asymmetry()
        if asymmetry > HERMITIAN_TOL:
            raise NotHermitianError(asymmetry, HERMITIAN_TOL)
        m = hamiltonian.matrix
        energies, eigenvectors = la.eigh((m + m.conj().T) / 2)
        self._set_spectrum(energies, eigenvectors, hamiltonian.signature)
        self._hamiltonian = hamiltonian.with_tags(HERMITIAN)

    @classmethod
    def from_spectrum(cls, energies, eigenvectors, signature: Optional[FactorSignature] = None) -> 'Evolution':
        evolution = cls.__new__(cls)
        evolution._set_spectrum(np.asarray(energies, dtype=float), np.asarray(eigenvectors, dtype=complex),
                                signature)
        evolution._hamiltonian = None
        return evolution

    @classmethod
    def from_unitary(cls, unitary: Operator, step: float = 1.0) -> 'Evolution':
        """the evolution whose propagator over `step` equals `unitary`"""
        defect = unitary.unitarity_defect()
        if defect > STRUCTURAL_TOL:
            raise ValidationError("step operator is not unitary: max |U^dag U - I| = {:.3e}".format(defect),
                                  [Violation('unitary', deviation=defect)])
        # complex Schur form of a normal matrix is diagonal
        triangular, vectors = la.schur(unitary.matrix, output='complex')
        phases = np.angle(np.diag(triangular))
        return cls.from_spectrum(-phases / step, vectors, unitary.signature)

    def _set_spectrum(self, energies, eigenvectors, signature):
        if eigenvectors.ndim != 2 or eigenvectors.shape[0] != eigenvectors.shape[1] \
           or eigenvectors.shape[0] != energies.size:
            raise ValidationError("spectrum shapes do not match: {} energies, eigenvectors {}".format(
                energies.size, eigenvectors.shape))
        self.energies: np.ndarray = _frozen(energies, dtype=float)
        self.eigenvectors: np.ndarray = _frozen(eigenvectors)
        self.signature: Optional[FactorSignature] = signature

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def hamiltonian(self) -> Operator:
        if self._hamiltonian is None:
            v = self.eigenvectors
            m = (v * self.energies) @ v.conj().T
            self._hamiltonian = Operator((m + m.conj().T) / 2, tags=[HERMITIAN], signature=self.signature)
        return self._hamiltonian

    def _phases(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.energies * t)

    def unitary(self, t: float) -> Operator:
        if t == 0:
            return identity(self.dim, self.signature)
        v = self.eigenvectors
        return Operator((v * self._phases(t)) @ v.conj().T, tags=[UNITARY], signature=self.signature)

    def advance(self, vectors: np.ndarray, t: float) -> np.ndarray:
        """exp(-iHt) applied to a vector or to every column of a matrix"""
        if t == 0:
            return vectors
        v = self.eigenvectors
        coefficients = v.conj().T @ vectors
        phases = self._phases(t)
        if coefficients.ndim == 2:
            phases = phases[:, None]
        return v @ (phases * coefficients)

    def _conjugate(self, operator: Operator, t: float) -> np.ndarray:
        # U(t)^dag A U(t), computed in the energy eigenbasis
        v = self.eigenvectors
        phases = self._phases(t)
        in_eigenbasis = v.conj().T @ operator.apply(v)
        in_eigenbasis = phases.conj()[:, None] * in_eigenbasis * phases[None, :]
        m = v @ in_eigenbasis @ v.conj().T
        return (m + m.conj().T) / 2

    def heisenberg(self, operator: Operator, t: float) -> Operator:
        if t == 0:
            return operator
        return Operator(self._conjugate(operator, t), tags=operator.tags & {HERMITIAN, PROJECTOR},
                        signature=operator.signature)

    def schrodinger(self, operator: Operator, t: float) -> Operator:
        """time-0 representative of a Heisenberg operator given at time t"""
        if t == 0:
            return operator
        return Operator(self._conjugate(operator, -t), tags=operator.tags & {HERMITIAN, PROJECTOR},
                        signature=operator.signature)


def generator_from_unitary(unitary: Operator, step: float = 1.0) -> Operator:
    return Evolution.from_unitary(unitary, step).hamiltonian


# -------------------------------------------------------------------------
# OPERATIONS

def propagator(hamiltonian: Operator, t: float) -> Operator:
    return Evolution(hamiltonian).unitary(t)


def heisenberg_projector(projector: Operator, hamiltonian: Operator, t: float) -> Operator:
    check_projector(projector)
    return Evolution(hamiltonian).heisenberg(projector.with_tags(PROJECTOR), t)


def tensor(a: Union[Operator, StateVector], b: Union[Operator, StateVector]) -> Union[Operator, StateVector]:
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        signature = _signature_or_flat(a.signature, a.dim).concat(_signature_or_flat(b.signature, b.dim))
        return StateVector(np.kron(a.amplitudes, b.amplitudes), normalized=a.normalized and b.normalized,
                           signature=signature)
    if isinstance(a, Operator) and isinstance(b, Operator):
        signature = _signature_or_flat(a.signature, a.dim).concat(_signature_or_flat(b.signature, b.dim))
        if a.support is not None and b.support is not None:
            return Operator(support=np.outer(a.support, b.support).reshape(-1),
                            tags=a.tags & b.tags, signature=signature)
        return Operator(np.kron(a.matrix, b.matrix), tags=a.tags & b.tags, signature=signature)
    raise ValidationError("tensor needs two operators or two states, got {} and {}".format(
        type(a).__name__, type(b).__name__))


def tensor_all(*items):
    result = items[0]
    for item in items[1:]:
        result = tensor(result, item)
    return result


def partial_trace(rho: Operator, signature: FactorSignature, keep: Iterable[int]) -> Operator:
    """trace out every factor not in `keep`; kept factors come out in the order given"""
    signature.check(rho.dim)
    keep = [int(k) for k in keep]
    n = len(signature)
    if any(k < 0 or k >= n for k in keep):
        raise SignatureMismatchError("kept factors {} out of range for {}".format(keep, signature))
    if len(set(keep)) != len(keep):
        raise SignatureMismatchError("kept factors {} repeat a factor".format(keep))

    traced = [i for i in range(n) if i not in keep]
    tensor_form = rho.matrix.reshape(signature.factors * 2)
    remaining = n
    for axis in sorted(traced, reverse=True):
        tensor_form = np.trace(tensor_form, axis1=axis, axis2=axis + remaining)
        remaining -= 1

    # surviving axes are in ascending factor order
    ascending = sorted(keep)
    order = [ascending.index(k) for k in keep]
    tensor_form = np.transpose(tensor_form, order + [remaining + o for o in order])

    kept_factors = [signature.factors[k] for k in keep]
    kept_dim = int(np.prod(kept_factors)) if kept_factors else 1
    matrix = np.asarray(tensor_form).reshape(kept_dim, kept_dim)
    tags = [HERMITIAN] if HERMITIAN in rho.tags else []
    return Operator(matrix, tags=tags, signature=FactorSignature(kept_factors) if kept_factors else None)


def reduced_state(psi: StateVector, signature: FactorSignature, keep: Iterable[int]) -> Operator:
    return partial_trace(psi.density(), signature, keep)


def purity(rho: Operator) -> float:
    m = rho.matrix
    return float(np.real(np.einsum('ij,ji->', m, m)))
