import itertools
import math

import numpy as np
import pytest

from conftest import random_grid, random_state, seeded_instance
from decoherent_histories_cli.impl.engine.histories import HistoryGrid, decoherence_functional, evolve_family
from decoherent_histories_cli.impl.engine.inference import (
    Condition, ConditionChain, EffectiveState, effective_state, joint_distribution, predict, predict_from_state,
    retrodict, sandwich_update, update)
from decoherent_histories_cli.impl.engine.operators import (Evolution, FactorSignature, Operator, StateVector,
                                                            basis_projector, factor_projector, identity,
                                                            ket_projector)
from decoherent_histories_cli.impl.engine.tolerances import STRUCTURAL_TOL
from decoherent_histories_cli.impl.errors import CertificationRefused, NullConditionError, ValidationError


def frozen_register(n_qubits: int, labels=('a', 'b')) -> HistoryGrid:
    """H = 0 on n qubits; family k at time k + 1 reads qubit k in the computational basis"""
    signature = FactorSignature([2] * n_qubits)
    evolution = Evolution(Operator(np.zeros((2 ** n_qubits, 2 ** n_qubits)), signature=signature))
    families = [evolve_family([factor_projector(signature, k, [0]), factor_projector(signature, k, [1])],
                              evolution, float(k + 1), labels=labels, name='race{}'.format(k + 1))
                for k in range(n_qubits)]
    return HistoryGrid(families, evolution)


def table_state(table: np.ndarray) -> StateVector:
    return StateVector(np.sqrt(table).reshape(-1), normalized=True)


@pytest.fixture
def horse_race(rng):
    table = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
    return frozen_register(3), table, table_state(table)


# -------------------------------------------------------------------------
# CONDITIONS

def test_condition_resolves_names_and_labels(horse_race):
    grid, _, _ = horse_race
    resolved = Condition('race2', 'b').resolve(grid)
    assert (resolved.family, resolved.alternative, resolved.time) == (1, 1, 2.0)
    assert Condition(1, 1).describe(grid) == 'race2=b@2.0'


def test_condition_time_must_match(horse_race):
    grid, _, _ = horse_race
    with pytest.raises(ValidationError):
        Condition('race2', 'a', time=3.0).resolve(grid)


def test_chain_times_must_increase(horse_race):
    grid, _, _ = horse_race
    with pytest.raises(ValidationError):
        ConditionChain([Condition('race2', 'a'), Condition('race1', 'a')]).resolved(grid)
    assert ConditionChain().describe(grid) == '(none)'


# -------------------------------------------------------------------------
# PREDICTION

def test_empty_condition_gives_unconditional_probability(horse_race):
    grid, table, psi = horse_race
    for x in (0, 1):
        assert predict(grid, psi, None, Condition('race3', x)) == pytest.approx(table[:, :, x].sum(), abs=1e-12)


def test_repeated_record_is_certain():
    grid = frozen_register(2)
    psi = StateVector(np.array([0.6, 0.0, 0.0, 0.8]), normalized=True)
    assert predict(grid, psi, Condition('race1', 'b'), Condition('race2', 'b')) == pytest.approx(1.0, abs=1e-12)


def test_prediction_matches_joint_table(horse_race):
    grid, table, psi = horse_race
    for x1, x2, x3 in itertools.product((0, 1), repeat=3):
        expected = table[x1, x2, x3] / table[x1, x2, :].sum()
        value = predict(grid, psi, [Condition(0, x1), Condition(1, x2)], Condition(2, x3))
        assert abs(value - expected) <= 1e-12


def test_prediction_must_look_forward(horse_race):
    grid, _, psi = horse_race
    with pytest.raises(ValidationError):
        predict(grid, psi, Condition('race2', 'a'), Condition('race1', 'a'))


def test_prediction_sums_to_one(horse_race):
    grid, _, psi = horse_race
    condition = [Condition(0, 1), Condition(1, 0)]
    total = sum(predict(grid, psi, condition, Condition(2, x)) for x in (0, 1))
    assert abs(total - 1.0) <= 1e-12


def test_conditioning_on_an_impossible_alternative():
    grid = frozen_register(2)
    psi = StateVector(np.array([1.0, 0.0, 0.0, 0.0]), normalized=True)
    with pytest.raises(NullConditionError):
        predict(grid, psi, Condition('race1', 'b'), Condition('race2', 'a'))


def test_prediction_refuses_interfering_set():
    evolution = Evolution(Operator(np.zeros((2, 2))))
    plus = ket_projector(np.array([1, 1]) / math.sqrt(2))
    minus = ket_projector(np.array([1, -1]) / math.sqrt(2))
    grid = HistoryGrid([
        evolve_family([basis_projector(2, [0]), basis_projector(2, [1])], evolution, 1.0, name='z'),
        evolve_family([plus, minus], evolution, 2.0, labels=['+', '-'], name='x'),
    ], evolution)
    psi = StateVector(np.array([1, 1]) / math.sqrt(2), normalized=True)
    with pytest.raises(CertificationRefused):
        predict(grid, psi, Condition('z', 0), Condition('x', '+'))
    assert predict(grid, psi, Condition('z', 0), Condition('x', '+'), require_certified=False) == pytest.approx(0.5)


def test_joint_distribution_is_the_table(horse_race):
    grid, table, psi = horse_race
    joint = joint_distribution(grid, psi)
    for alpha, p in joint.items():
        assert abs(p - table[alpha]) <= 1e-12


# -------------------------------------------------------------------------
# RETRODICTION

def test_trivial_past_is_certain(rng):
    evolution = Evolution(Operator(np.zeros((2, 2))))
    grid = HistoryGrid([
        evolve_family([identity(2)], evolution, 1.0, labels=['any'], name='past'),
        evolve_family([basis_projector(2, [0]), basis_projector(2, [1])], evolution, 2.0, name='now'),
    ], evolution)
    psi = random_state(rng, 2)
    assert retrodict(grid, psi, Condition('now', 0), Condition('past', 'any')) == pytest.approx(1.0, abs=1e-12)


def test_retrodiction_matches_joint_table(horse_race):
    grid, table, psi = horse_race
    for x1, x3 in itertools.product((0, 1), repeat=2):
        expected = table[x1, :, x3].sum() / table[:, :, x3].sum()
        assert abs(retrodict(grid, psi, Condition(2, x3), Condition(0, x1)) - expected) <= 1e-12


def test_commuting_retrodiction_is_reversed_prediction():
    grid = frozen_register(2)
    psi = StateVector(np.array([0.5, 0.5, 0.5, 0.5j]), normalized=True)
    for x, y in itertools.product((0, 1), repeat=2):
        backward = retrodict(grid, psi, Condition(1, y), Condition(0, x))
        joint = joint_distribution(grid, psi)
        assert backward == pytest.approx(joint[(x, y)] / (joint[(0, y)] + joint[(1, y)]), abs=1e-12)


def _witness_state(a: float, b: float) -> StateVector:
    # A = first qubit, read at race1; B = second qubit, read at race2
    amplitudes = np.array([math.cos(a), 0.0, math.sin(a) * math.cos(b), math.sin(a) * math.sin(b)])
    return StateVector(amplitudes, normalized=True)


def test_retrodiction_needs_the_state():
    grid = frozen_register(2)
    grid_points = np.linspace(0.0, math.pi / 2, 9)
    seen = []
    for a, b in itertools.product(grid_points, repeat=2):
        psi = _witness_state(a, b)
        present = predict(grid, psi, None, Condition('race2', 'a'))
        if present < 1e-3:
            continue
        seen.append((present, retrodict(grid, psi, Condition('race2', 'a'), Condition('race1', 'a')), (a, b)))

    witnesses = [(s, t) for s, t in itertools.combinations(seen, 2)
                 if abs(s[0] - t[0]) <= 1e-12 and abs(s[1] - t[1]) >= 0.1]
    assert witnesses
    first, second = witnesses[0]
    assert first[2] != second[2]


# -------------------------------------------------------------------------
# EFFECTIVE STATE

def test_empty_condition_state_is_the_pure_state(rng):
    grid = random_grid(rng, 4, 2)
    psi = random_state(rng, 4)
    state = effective_state(grid, psi).check()
    assert np.allclose(state.rho.matrix, np.outer(psi.amplitudes, psi.amplitudes.conj()), atol=1e-14)
    assert state.normalizer == pytest.approx(1.0)


def test_rank_one_condition_gives_projector_state():
    grid = frozen_register(1)
    psi = StateVector(np.array([0.6, 0.8]), normalized=True)
    state = effective_state(grid, psi, Condition('race1', 'b'))
    assert np.allclose(state.rho.matrix, np.diag([0.0, 1.0]), atol=1e-14)
    assert state.normalizer == pytest.approx(0.64)


def test_effective_state_is_a_density_matrix(rng):
    grid = random_grid(rng, 6, 3, members=3)
    psi = random_state(rng, 6)
    state = effective_state(grid, psi, [Condition(0, 1), Condition(1, 2)]).check()
    eigenvalues = np.linalg.eigvalsh(state.rho.matrix)
    assert eigenvalues.min() >= -1e-10
    assert eigenvalues.max() <= 1 + 1e-10


def test_effective_state_check_uses_structural_tolerance():
    grid = frozen_register(1)
    psi = StateVector(np.array([0.6, 0.8]), normalized=True)
    state = effective_state(grid, psi)
    skew = np.array([[1.0, 1.0], [0.0, 0.0]])
    near = Operator(np.diag([0.36, 0.64]) + STRUCTURAL_TOL / 10 * skew)
    EffectiveState(near, state.condition, 1.0, grid, psi).check()
    far = Operator(np.diag([0.36, 0.64]) + STRUCTURAL_TOL * 10 * skew)
    with pytest.raises(ValidationError) as err:
        EffectiveState(far, state.condition, 1.0, grid, psi).check()
    assert sorted(v.kind for v in err.value.violations) == ['hermitian', 'trace']


def test_state_prediction_agrees_with_ratio(rng):
    for _ in range(5):
        grid = random_grid(rng, 6, 3)
        psi = random_state(rng, 6)
        condition = [Condition(0, 1), Condition(1, 0)]
        state = effective_state(grid, psi, condition)
        for x in (0, 1):
            direct = predict(grid, psi, condition, Condition(2, x), require_certified=False)
            via_state = predict_from_state(state, Condition(2, x), require_certified=False)
            assert abs(direct - via_state) <= 1e-10


def _likeliest_past(grid, psi):
    """conditions on every family but the last, along the most probable chain"""
    weights = decoherence_functional(grid, psi).diagonal.reshape(grid.shape)
    past = np.unravel_index(np.argmax(weights.sum(axis=-1)), grid.shape[:-1])
    return [Condition(k, int(a)) for k, a in enumerate(past)]


@pytest.mark.parametrize('seed', range(100))
def test_random_inference_is_consistent(seed):
    grid, psi, _ = seeded_instance(2000 + seed, min_times=2)
    condition = _likeliest_past(grid, psi)
    last = len(grid.families) - 1
    state = effective_state(grid, psi, condition).check()
    total = 0.0
    for x in range(grid.shape[-1]):
        direct = predict(grid, psi, condition, Condition(last, x), require_certified=False)
        via_state = predict_from_state(state, Condition(last, x), require_certified=False)
        assert abs(direct - via_state) <= 1e-10
        total += direct
    assert total == pytest.approx(1.0, abs=1e-10)

    stepped = effective_state(grid, psi, condition[:1])
    for c in condition[1:]:
        stepped = update(stepped, c)
    assert np.max(np.abs(stepped.rho.matrix - state.rho.matrix)) <= 1e-11
    assert stepped.normalizer == pytest.approx(state.normalizer, abs=1e-11)


def test_state_prediction_edge_cases():
    grid = frozen_register(2)
    psi = StateVector(np.array([0.6, 0.0, 0.0, 0.8]), normalized=True)
    state = effective_state(grid, psi, Condition('race1', 'a'))
    assert predict_from_state(state, Condition('race2', 'a')) == pytest.approx(1.0, abs=1e-12)
    assert predict_from_state(state, Condition('race2', 'b')) == pytest.approx(0.0, abs=1e-12)


def test_sequential_update_equals_one_shot(rng):
    grid = random_grid(rng, 6, 3)
    psi = random_state(rng, 6)
    state = effective_state(grid, psi, Condition(0, 0))
    stepped = update(update(state, Condition(1, 1)), Condition(2, 0))
    one_shot = effective_state(grid, psi, [Condition(0, 0), Condition(1, 1), Condition(2, 0)])
    assert np.max(np.abs(stepped.rho.matrix - one_shot.rho.matrix)) <= 1e-11
    assert stepped.normalizer == pytest.approx(one_shot.normalizer, abs=1e-11)
    assert len(stepped.condition) == 3


def test_sandwich_update_equals_replay(rng):
    grid = random_grid(rng, 6, 3)
    psi = random_state(rng, 6)
    state = effective_state(grid, psi, Condition(0, 1))
    replayed = update(state, Condition(1, 0))
    sandwiched = sandwich_update(state, Condition(1, 0))
    assert np.max(np.abs(replayed.rho.matrix - sandwiched.rho.matrix)) <= 1e-11
    assert abs(replayed.normalizer - sandwiched.normalizer) <= 1e-11


def test_update_with_identity_keeps_the_state(rng):
    evolution = Evolution(Operator(np.zeros((3, 3))))
    grid = HistoryGrid([
        evolve_family([basis_projector(3, [0, 1]), basis_projector(3, [2])], evolution, 1.0, name='first'),
        evolve_family([identity(3)], evolution, 2.0, labels=['any'], name='nothing'),
    ], evolution)
    psi = random_state(rng, 3)
    state = effective_state(grid, psi, Condition('first', 0))
    updated = update(state, Condition('nothing', 'any'))
    assert np.allclose(updated.rho.matrix, state.rho.matrix, atol=1e-14)


def test_update_must_look_forward(horse_race):
    grid, _, psi = horse_race
    state = effective_state(grid, psi, Condition('race2', 'a'))
    with pytest.raises(ValidationError):
        update(state, Condition('race1', 'a'))


def test_updates_are_bayesian_conditioning(horse_race):
    grid, table, psi = horse_race
    for x1, x2, x3 in itertools.product((0, 1), repeat=3):
        state = update(effective_state(grid, psi, Condition(0, x1)), Condition(1, x2))
        expected = table[x1, x2, x3] / table[x1, x2, :].sum()
        assert abs(predict_from_state(state, Condition(2, x3)) - expected) <= 1e-12
        assert abs(state.normalizer - table[x1, x2, :].sum()) <= 1e-12
