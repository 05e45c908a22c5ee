import math

import numpy as np
import pytest

from conftest import expm_series, index_sum_partial_trace, random_hermitian, random_unitary
from decoherent_histories_cli.impl.engine.operators import (
    HERMITIAN, UNITARY, Evolution, FactorSignature, Operator, StateVector, basis_projector,
    basis_state, factor_projector, generator_from_unitary, heisenberg_projector, identity, ket_projector,
    partial_trace, propagator, purity, reduced_state, tensor)
from decoherent_histories_cli.impl.errors import (NotHermitianError, NotProjectorError,
                                                  SignatureMismatchError, ValidationError)


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# -------------------------------------------------------------------------
# STATES AND OPERATORS

def test_state_flagged_normalized_is_checked():
    StateVector([1, 0], normalized=True)
    with pytest.raises(ValidationError):
        StateVector([1, 1], normalized=True)


def test_state_rejects_non_finite_amplitudes():
    with pytest.raises(ValidationError):
        StateVector([np.nan, 1.0])


def test_state_amplitudes_are_read_only():
    psi = basis_state(3, 1)
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1.0


def test_operator_must_be_square():
    with pytest.raises(ValidationError):
        Operator(np.zeros((2, 3)))


def test_verify_reports_asymmetry():
    op = Operator([[0, 1], [0, 0]], tags=[HERMITIAN])
    with pytest.raises(NotHermitianError) as err:
        op.verify()
    assert err.value.max_asymmetry == pytest.approx(1.0)


def test_verify_accepts_tagged_projector():
    ket_projector(np.array([1, 1j]) / math.sqrt(2)).verify()


def test_support_projector_materializes_lazily():
    p = basis_projector(4, [1, 3])
    assert p.rank() == 2
    assert p.trace() == 2
    assert np.allclose(p.matrix, np.diag([0, 1, 0, 1]))
    v = np.arange(4, dtype=complex)
    assert np.allclose(p.apply(v), [0, 1, 0, 3])


def test_factor_projector_follows_kron_order():
    signature = FactorSignature([2, 3])
    p = factor_projector(signature, 1, [2])
    expected = np.kron(np.eye(2), np.diag([0, 0, 1]))
    assert np.allclose(p.matrix, expected)


def test_signature_mismatch():
    with pytest.raises(SignatureMismatchError):
        Operator(np.eye(4), signature=FactorSignature([2, 3]))


# -------------------------------------------------------------------------
# PROPAGATOR

def test_propagator_at_zero_is_identity(rng):
    u = propagator(Operator(random_hermitian(rng, 5)), 0.0)
    assert np.array_equal(u.matrix, np.eye(5))


def test_propagator_of_sigma_z():
    u = propagator(Operator(SIGMA_Z), math.pi / 2)
    assert np.allclose(u.matrix, np.diag([np.exp(-0.5j * math.pi), np.exp(0.5j * math.pi)]), atol=1e-12)


def test_propagator_matches_series_oracle(rng):
    h = random_hermitian(rng, 8)
    u = propagator(Operator(h), 1.3)
    assert u.unitarity_defect() <= 1e-10
    assert np.max(np.abs(u.matrix - expm_series(-1.3j * h))) <= 1e-10


def test_propagator_rejects_non_hermitian():
    with pytest.raises(NotHermitianError) as err:
        propagator(Operator([[0, 1], [0.5, 0]]), 1.0)
    assert err.value.max_asymmetry == pytest.approx(0.5)


def test_group_property(rng):
    evolution = Evolution(Operator(random_hermitian(rng, 6)))
    product = evolution.unitary(0.4).matrix @ evolution.unitary(1.1).matrix
    assert np.max(np.abs(product - evolution.unitary(1.5).matrix)) <= 1e-9


def test_advance_equals_unitary_on_columns(rng):
    evolution = Evolution(Operator(random_hermitian(rng, 6)))
    vectors = rng.normal(size=(6, 3)) + 1j * rng.normal(size=(6, 3))
    assert np.allclose(evolution.advance(vectors, 0.9), evolution.unitary(0.9).matrix @ vectors, atol=1e-12)


def test_from_spectrum_matches_eigh(rng):
    h = random_hermitian(rng, 5)
    energies, vectors = np.linalg.eigh(h)
    evolution = Evolution.from_spectrum(energies, vectors)
    assert np.allclose(evolution.hamiltonian.matrix, h, atol=1e-12)
    assert np.allclose(evolution.unitary(0.7).matrix, Evolution(Operator(h)).unitary(0.7).matrix, atol=1e-12)


def test_generator_from_unitary_reproduces_step(rng):
    u = random_unitary(rng, 6)
    h = generator_from_unitary(Operator(u, tags=[UNITARY]))
    assert h.max_asymmetry() <= 1e-12
    assert np.max(np.abs(expm_series(-1j * h.matrix) - u)) <= 1e-10


def test_generator_handles_degenerate_permutation():
    swap = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
    evolution = Evolution.from_unitary(Operator(swap, tags=[UNITARY]))
    assert np.max(np.abs(evolution.unitary(1.0).matrix - swap)) <= 1e-10


# -------------------------------------------------------------------------
# HEISENBERG PROJECTOR

def test_heisenberg_at_zero_is_input(rng):
    p0 = ket_projector(np.array([1, 0, 0], dtype=complex))
    assert np.allclose(heisenberg_projector(p0, Operator(random_hermitian(rng, 3)), 0.0).matrix, p0.matrix)


def test_heisenberg_commuting_case():
    p0 = basis_projector(3, [0])
    h = Operator(np.diag([0.3, -1.2, 2.0]))
    for t in (0.5, 1.7, 4.0):
        assert np.allclose(heisenberg_projector(p0, h, t).matrix, p0.matrix, atol=1e-12)


def test_heisenberg_projector_keeps_rank_and_idempotency(rng):
    h = Operator(random_hermitian(rng, 6))
    p0 = ket_projector(rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2)))
    pt = heisenberg_projector(p0, h, 0.8)
    assert pt.idempotency_defect() <= 1e-10
    assert np.sum(np.linalg.eigvalsh(pt.matrix) > 0.5) == 2
    expected = expm_series(0.8j * h.matrix) @ p0.matrix @ expm_series(-0.8j * h.matrix)
    assert np.max(np.abs(pt.matrix - expected)) <= 1e-10


def test_heisenberg_rejects_non_projector(rng):
    with pytest.raises(NotProjectorError):
        heisenberg_projector(Operator(np.diag([1.0, 0.5])), Operator(np.eye(2)), 1.0)


def test_schrodinger_inverts_heisenberg(rng):
    evolution = Evolution(Operator(random_hermitian(rng, 5)))
    p0 = ket_projector(rng.normal(size=5) + 0j)
    back = evolution.schrodinger(evolution.heisenberg(p0, 1.4), 1.4)
    assert np.allclose(back.matrix, p0.matrix, atol=1e-12)


# -------------------------------------------------------------------------
# TENSOR / PARTIAL TRACE

def test_tensor_of_identities():
    assert np.array_equal(tensor(identity(2), identity(3)).matrix, np.eye(6))


def test_tensor_acts_factorwise():
    flipped = tensor(Operator(SIGMA_X), identity(2)).apply(tensor(basis_state(2, 0), basis_state(2, 0)))
    assert np.allclose(flipped.amplitudes, np.kron([0, 1], [1, 0]))


def test_tensor_mixed_product(rng):
    a, b, c, d = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
    lhs = tensor(Operator(a), Operator(b)).matrix @ tensor(Operator(c), Operator(d)).matrix
    assert np.max(np.abs(lhs - np.kron(a @ c, b @ d))) <= 1e-12


def test_tensor_concatenates_signatures():
    result = tensor(Operator(np.eye(2), signature=FactorSignature([2])),
                    Operator(np.eye(6), signature=FactorSignature([2, 3])))
    assert result.signature.factors == (2, 2, 3)


def test_partial_trace_of_product_state(rng):
    rho_a = ket_projector(rng.normal(size=2) + 1j * rng.normal(size=2)).matrix
    rho_b = np.diag([0.25, 0.75, 0.0]).astype(complex)
    rho = Operator(np.kron(rho_a, rho_b), tags=[HERMITIAN])
    reduced = partial_trace(rho, FactorSignature([2, 3]), [0])
    assert np.max(np.abs(reduced.matrix - rho_a)) <= 1e-11


def test_partial_trace_of_bell_state():
    bell = StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2), normalized=True)
    reduced = reduced_state(bell, FactorSignature([2, 2]), [1])
    assert np.allclose(reduced.matrix, np.eye(2) / 2)
    assert purity(reduced) == pytest.approx(0.5)


def test_partial_trace_matches_index_sum(rng):
    factors = [2, 3, 2]
    a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    for keep in ([0], [1], [2], [0, 2], [1, 2], [2, 0], [2, 1, 0], []):
        reduced = partial_trace(Operator(rho, tags=[HERMITIAN]), FactorSignature(factors), keep)
        assert np.max(np.abs(reduced.matrix - index_sum_partial_trace(rho, factors, keep))) <= 1e-12
        assert abs(np.trace(reduced.matrix) - 1.0) <= 1e-12
        assert reduced.max_asymmetry() <= 1e-12


def test_partial_trace_keeps_the_factor_order_given():
    a = np.diag([1.0, 0.0]).astype(complex)
    b = np.diag([0.0, 0.0, 1.0]).astype(complex)
    reduced = partial_trace(Operator(np.kron(a, b)), FactorSignature([2, 3]), [1, 0])
    assert np.allclose(reduced.matrix, np.kron(b, a))
    assert reduced.signature.factors == (3, 2)
    same = partial_trace(Operator(np.kron(a, b)), FactorSignature([2, 3]), [0, 1])
    assert np.allclose(same.matrix, np.kron(a, b))


def test_partial_trace_rejects_repeated_factors():
    with pytest.raises(SignatureMismatchError):
        partial_trace(Operator(np.eye(6)), FactorSignature([2, 3]), [0, 0])


def test_partial_trace_signature_mismatch():
    with pytest.raises(SignatureMismatchError):
        partial_trace(Operator(np.eye(4)), FactorSignature([2, 3]), [0])
