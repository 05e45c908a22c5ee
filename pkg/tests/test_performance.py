import functools
import time
import tracemalloc

import numpy as np
import pytest
import scipy.linalg as la

from conftest import random_hermitian, random_state
from decoherent_histories_cli.impl.engine import histories
from decoherent_histories_cli.impl.engine.histories import HistoryGrid, evolve_family
from decoherent_histories_cli.impl.engine.operators import (Evolution, FactorSignature, StateVector,
                                                            factor_projector)


N_QUBITS = 12
N_TIMES = 8
STEP = 0.5
TIME_LIMIT = 10.0
MEMORY_LIMIT = 2 * 1024 ** 3


@pytest.mark.slow
def test_twelve_qubits_eight_times(rng, monkeypatch):
    def no_class_operators(*args, **kwargs):
        raise AssertionError("class operators must not be built on the fast path")

    monkeypatch.setattr(histories, 'class_operator', no_class_operators)

    # non-interacting register: the spectrum is a kron of single-qubit spectra
    spectra = [la.eigh(random_hermitian(rng, 2)) for _ in range(N_QUBITS)]
    energies = functools.reduce(lambda a, b: np.add.outer(a, b).reshape(-1), [e for e, _ in spectra])
    eigenvectors = functools.reduce(np.kron, [v for _, v in spectra])
    signature = FactorSignature([2] * N_QUBITS)
    evolution = Evolution.from_spectrum(energies, eigenvectors, signature)

    qubit_states = [random_state(rng, 2).amplitudes for _ in range(N_QUBITS)]
    psi = StateVector(functools.reduce(np.kron, qubit_states), normalized=True, signature=signature)

    families = [evolve_family([factor_projector(signature, k, [0]), factor_projector(signature, k, [1])],
                              evolution, STEP * (k + 1), labels=['0', '1'], name='q{}'.format(k))
                for k in range(N_TIMES)]
    grid = HistoryGrid(families, evolution)
    assert grid.dim == 4096
    assert grid.history_count == 256

    started = time.perf_counter()
    report = histories.decoherence_functional(grid, psi, mode=histories.SCHRODINGER)
    elapsed = time.perf_counter() - started

    assert report.history_count == 256
    assert report.certified
    assert abs(report.total() - 1.0) <= 1e-10

    # each qubit is read once, so the weights factorize into single-qubit Born weights
    born = []
    for k in range(N_TIMES):
        e, v = spectra[k]
        evolved = v @ (np.exp(-1j * e * STEP * (k + 1)) * (v.conj().T @ qubit_states[k]))
        born.append(np.abs(evolved) ** 2)
    expected = functools.reduce(lambda a, b: np.outer(a, b).reshape(-1), born)
    assert np.allclose(report.diagonal, expected, atol=1e-10)

    assert elapsed < TIME_LIMIT

    tracemalloc.start()
    try:
        histories.decoherence_functional(grid, psi, mode=histories.SCHRODINGER)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    assert peak < MEMORY_LIMIT
