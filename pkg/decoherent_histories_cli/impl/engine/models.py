"""
Ready-made closed systems with their suggested history grids.

Each coupling step is a discrete unitary. A model's Hamiltonian is the
generator of its step unitary at unit time step, so integer times count
steps. Models whose records must stay put after being written carry a clock
factor: the step unitary is a sum over clock ticks of tick-specific
operations, so each coupling fires exactly once per cycle.
"""

import functools
import inspect
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, ValidationError
from ..utils.debug_print import debug_print
from .histories import HistoryGrid, decoherence_functional, evolve_family, probabilities
from .operators import (UNITARY, Evolution, FactorSignature, Operator, StateVector,
                        factor_projector, identity, ket_projector, tensor)
from .tolerances import MAX_EXPLICIT_DIM, STRUCTURAL_TOL


SQRT_HALF = math.sqrt(0.5)

QUBITS = 'qubits'
COLLECTIVE = 'collective'
AUTO = 'auto'
ENV_ENCODINGS = (QUBITS, COLLECTIVE, AUTO)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# -------------------------------------------------------------------------
# MODEL SPEC

class ModelSpec:
    def __init__(self, name: str, evolution: Evolution, psi0: StateVector, signature: FactorSignature,
                 labels: Dict, suggested_grids: Dict[str, HistoryGrid], params: Optional[Dict] = None,
                 notes: str = '', extras: Optional[Dict] = None):
        signature.check(evolution.dim)
        signature.check(psi0.dim)
        if not suggested_grids:
            raise ValidationError("model {!r} suggests no grid".format(name))
        self.name = name
        self.evolution = evolution
        self.psi0 = psi0
        self.signature = signature
        self.labels = labels
        self.suggested_grids = dict(suggested_grids)
        self.params = dict(params or {})
        self.notes = notes
        self.extras = dict(extras or {})

    @property
    def hamiltonian(self) -> Operator:
        return self.evolution.hamiltonian

    @property
    def dim(self) -> int:
        return self.psi0.dim

    @property
    def default_grid(self) -> str:
        return next(iter(self.suggested_grids))

    def grid(self, name: Optional[str] = None) -> HistoryGrid:
        name = name or self.default_grid
        if name not in self.suggested_grids:
            raise ValidationError("model {!r} has no grid {!r}; available: {}".format(
                self.name, name, sorted(self.suggested_grids)))
        return self.suggested_grids[name]

    def __repr__(self):
        return "ModelSpec(name={!r}, factors={}, grids={})".format(
            self.name, list(self.signature.factors), list(self.suggested_grids))


# -------------------------------------------------------------------------
# UTILS

def _kron(*matrices) -> np.ndarray:
    return functools.reduce(np.kron, matrices, np.eye(1, dtype=complex))


def _ket(dim: int, index: int) -> np.ndarray:
    ket = np.zeros(dim, dtype=complex)
    ket[index] = 1.0
    return ket


def _ketbra(dim: int, row: int, col: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[row, col] = 1.0
    return m


def _permutation(images: Sequence[int]) -> np.ndarray:
    """unitary sending basis state i to images[i]"""
    dim = len(images)
    m = np.zeros((dim, dim), dtype=complex)
    for i, j in enumerate(images):
        m[j, i] = 1.0
    return m


def _swap(dim: int, a: int, b: int) -> np.ndarray:
    images = list(range(dim))
    images[a], images[b] = b, a
    return _permutation(images)


def _half_rotation(angle: float) -> np.ndarray:
    """real rotation by angle / 2, so R(-a)|0> and R(a)|0> overlap by cos(a)"""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _x_rotation(angle: float) -> np.ndarray:
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * PAULI_X


def _clocked(operations: Sequence[np.ndarray]) -> np.ndarray:
    """sum_k V_k (x) |k+1 mod K><k| with the clock as last factor"""
    ticks = len(operations)
    return sum(np.kron(v, _ketbra(ticks, (k + 1) % ticks, k)) for k, v in enumerate(operations))


def _step_evolution(step: np.ndarray, signature: FactorSignature) -> Evolution:
    return Evolution.from_unitary(Operator(step, tags=[UNITARY], signature=signature))


def _complex_param(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValidationError("complex values are numbers or [re, im] pairs, got {!r}".format(value))
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _mask_and(*operators: Operator) -> Operator:
    support = functools.reduce(np.logical_and, [op.support for op in operators])
    return Operator(support=support, signature=operators[0].signature)


def _grids(evolution: Evolution, *layouts: Tuple[str, Sequence[Tuple]]) -> Dict[str, HistoryGrid]:
    """layouts: (grid name, [(family name, time, members0, labels), ...])"""
    grids = {}
    for grid_name, families in layouts:
        grids[grid_name] = HistoryGrid(
            [evolve_family(members, evolution, time, labels, name) for name, time, members, labels in families],
            evolution)
    return grids


# -------------------------------------------------------------------------
# TWO SLIT

def _env_encoding(encoding: str, n_path_levels: int, env_spins: int) -> str:
    if encoding not in ENV_ENCODINGS:
        raise ValidationError("unknown env_encoding {!r}, expected one of {}".format(encoding, list(ENV_ENCODINGS)))
    if encoding == AUTO:
        return QUBITS if n_path_levels * 2 ** env_spins <= MAX_EXPLICIT_DIM else COLLECTIVE
    return encoding


def build_two_slit(n_path_levels: int = 8, amplitudes=(SQRT_HALF, SQRT_HALF), env_spins: int = 0,
                   coupling_angle: float = math.pi / 3, env_encoding: str = AUTO) -> ModelSpec:
    """
    Particle through two slits onto a screen, watched by a which-path environment.

    The particle register holds the slit states |0>, |1> plus blocked
    positions; one step applies the which-path coupling and then a discrete
    Fourier propagation onto screen bins. Each environment spin is rotated by
    -angle behind slit 1 and +angle behind slit 2, so the two environment
    states overlap by cos(angle) per spin. The `collective` encoding replaces
    the spins by one qubit carrying the joint overlap cos(angle)^N.
    """
    m = int(n_path_levels)
    if m < 2:
        raise ValidationError("two_slit needs at least 2 path levels, got {}".format(m))
    n_env = int(env_spins)
    if n_env < 0:
        raise ValidationError("env_spins must be non negative, got {}".format(n_env))
    a1, a2 = (_complex_param(a) for a in amplitudes)
    weight = abs(a1) ** 2 + abs(a2) ** 2
    if abs(weight - 1.0) > STRUCTURAL_TOL:
        raise ValidationError("slit amplitudes must be normalized, |a1|^2 + |a2|^2 = {!r}".format(weight))

    encoding = _env_encoding(env_encoding, m, n_env)
    overlap = math.cos(coupling_angle)
    if encoding == QUBITS:
        angles = [coupling_angle] * n_env
    elif n_env:
        angles = [math.acos(min(1.0, max(-1.0, overlap ** n_env)))]
    else:
        angles = []
    env_dim = 2 ** len(angles)
    signature = FactorSignature([m] + [2] * len(angles))
    debug_print("two_slit: {} path levels, {} env spins as {}, dim {}".format(m, n_env, encoding, signature.dim))

    behind = [np.diag(_ket(m, 0)), np.diag(_ket(m, 1))]
    elsewhere = np.eye(m) - behind[0] - behind[1]
    env_turns = [_kron(*[_half_rotation(-a) for a in angles]), _kron(*[_half_rotation(a) for a in angles])]
    coupling = np.kron(behind[0], env_turns[0]) + np.kron(behind[1], env_turns[1]) \
        + np.kron(elsewhere, np.eye(env_dim))
    fourier = np.exp(2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m) / math.sqrt(m)
    evolution = _step_evolution(np.kron(fourier, np.eye(env_dim)) @ coupling, signature)

    particle = np.zeros(m, dtype=complex)
    particle[0], particle[1] = a1, a2
    psi0 = StateVector(np.kron(particle / math.sqrt(weight), _ket(env_dim, 0)), normalized=True,
                       signature=signature)

    slit_members = [factor_projector(signature, 0, [0]), factor_projector(signature, 0, [1])]
    slit_labels = ['slit1', 'slit2']
    if m > 2:
        slit_members.append(factor_projector(signature, 0, range(2, m)))
        slit_labels.append('blocked')
    bins = [factor_projector(signature, 0, [x]) for x in range(m)]
    bin_labels = ['bin{}'.format(x) for x in range(m)]

    grids = _grids(evolution,
                   ('screen', [('slit', 0.0, slit_members, slit_labels), ('screen', 1.0, bins, bin_labels)]),
                   ('screen_only', [('screen', 1.0, bins, bin_labels)]))
    labels = {'factors': ['particle'] + ['env{}'.format(i) for i in range(len(angles))],
              'particle': ['slit1', 'slit2'] + ['path{}'.format(i) for i in range(2, m)]}
    params = {'n_path_levels': m, 'amplitudes': [a1, a2], 'env_spins': n_env,
              'coupling_angle': coupling_angle, 'env_encoding': encoding}
    notes = ("|D((slit1,x),(slit2,x))| = |a1||a2| cos(angle)^N / n_path_levels for every screen bin x; "
             "environment overlap {!r}".format(overlap ** n_env))
    return ModelSpec('two_slit', evolution, psi0, signature, labels, grids, params, notes)


# -------------------------------------------------------------------------
# STERN GERLACH

READY, UP, DOWN = 0, 1, 2
RECORD_STATES = ['ready', 'up', 'down']


def build_stern_gerlach(theta: float = math.pi / 2, precession: float = math.pi / 3,
                        clock_ticks: int = 6) -> ModelSpec:
    """
    Spin measured by a pointer whose reading is copied into a record.

    Tick 0 copies the spin (up/down along z) into the pointer, tick 1 copies
    the pointer into the record, later ticks precess the spin about x and
    leave pointer and record alone. The initial spin is
    cos(theta/2)|up> + sin(theta/2)|down>.

    The clock cycles, so tick 0 fires again at t = clock_ticks and the
    pointer copy reaches the record one step later: records are intact at
    integer times 2 <= t <= clock_ticks + 1. Raise clock_ticks for longer
    grids.
    """
    ticks = int(clock_ticks)
    if ticks < 5:
        raise ValidationError("stern_gerlach needs at least 5 clock ticks, got {}".format(ticks))
    signature = FactorSignature([2, 3, 3, ticks])
    spin_up, spin_down = np.diag(_ket(2, 0)), np.diag(_ket(2, 1))

    copy_spin = _kron(spin_up, _swap(3, READY, UP), np.eye(3)) + _kron(spin_down, _swap(3, READY, DOWN), np.eye(3))
    record_copy = sum(np.kron(np.diag(_ket(3, p)), write)
                      for p, write in [(READY, np.eye(3)), (UP, _swap(3, READY, UP)), (DOWN, _swap(3, READY, DOWN))])
    copy_pointer = np.kron(np.eye(2), record_copy)
    precess = _kron(_x_rotation(precession), np.eye(3), np.eye(3))
    operations = [copy_spin, copy_pointer] + [precess] * (ticks - 3) + [np.eye(18)]
    evolution = _step_evolution(_clocked(operations), signature)

    spin0 = np.array([math.cos(theta / 2), math.sin(theta / 2)], dtype=complex)
    psi0 = StateVector(_kron(spin0, _ket(3, READY), _ket(3, READY), _ket(ticks, 0)), normalized=True,
                       signature=signature)

    spin = [factor_projector(signature, 0, [0]), factor_projector(signature, 0, [1])]
    record = [factor_projector(signature, 2, [UP]), factor_projector(signature, 2, [READY, DOWN])]
    joint = [_mask_and(s, r) for s in spin for r in record]
    joint_labels = ['{}:{}'.format(s, r) for s in ('up', 'down') for r in ('up', 'down')]

    grids = _grids(evolution,
                   ('record', [('record', 3.0, record, ['up', 'down'])]),
                   ('spin_record', [('spin', 0.0, spin, ['up', 'down']), ('record', 3.0, record, ['up', 'down'])]),
                   ('record_persistence', [('record', 3.0, record, ['up', 'down']),
                                           ('record_later', 4.0, record, ['up', 'down'])]),
                   ('scan', [('joint', 3.0, joint, joint_labels), ('joint_later', 4.0, joint, joint_labels)]))
    labels = {'factors': ['spin', 'pointer', 'record', 'clock'],
              'spin': ['up', 'down'], 'pointer': RECORD_STATES, 'record': RECORD_STATES}
    params = {'theta': theta, 'precession': precession, 'clock_ticks': ticks}
    notes = ("p(record up) = cos(theta/2)^2 = {!r}; record 'down' means not up; records hold at integer times "
             "2..{} and are rewritten once the clock cycles".format(math.cos(theta / 2) ** 2, ticks + 1))
    return ModelSpec('stern_gerlach', evolution, psi0, signature, labels, grids, params, notes)


# -------------------------------------------------------------------------
# CAT

ALIVE = (0, 1)
DEAD = (2, 3)


def build_cat(beta=SQRT_HALF, env_qubits: int = 2, clock_ticks: int = 5, mixing: float = math.pi / 4) -> ModelSpec:
    """
    Nucleus decay triggering a cat, the cat's fate copied into environment qubits.

    Tick 0 swaps alive and dead cat states when the nucleus has decayed,
    tick 1 flips every environment qubit when the cat is dead, later ticks
    mix the internal states within the alive and within the dead subspace.
    """
    beta = _complex_param(beta)
    if abs(beta) > 1.0:
        raise ValidationError("decay amplitude must satisfy |beta| <= 1, got {!r}".format(beta))
    n_env = int(env_qubits)
    ticks = int(clock_ticks)
    if n_env < 0 or ticks < 4:
        raise ValidationError("cat needs env_qubits >= 0 and clock_ticks >= 4")
    env_dim = 2 ** n_env
    signature = FactorSignature([2, 4] + [2] * n_env + [ticks])
    intact, decayed = np.diag(_ket(2, 0)), np.diag(_ket(2, 1))
    alive = np.diag([1, 1, 0, 0]).astype(complex)
    dead = np.diag([0, 0, 1, 1]).astype(complex)

    trigger = _kron(intact, np.eye(4), np.eye(env_dim)) + _kron(decayed, _permutation([2, 3, 0, 1]), np.eye(env_dim))
    flips = _kron(*[PAULI_X] * n_env)
    witness = _kron(np.eye(2), alive, np.eye(env_dim)) + _kron(np.eye(2), dead, flips)
    rotation = _half_rotation(mixing)
    internal = np.zeros((4, 4), dtype=complex)
    internal[:2, :2] = rotation
    internal[2:, 2:] = rotation
    mix = _kron(np.eye(2), internal, np.eye(env_dim))
    operations = [trigger, witness] + [mix] * (ticks - 3) + [np.eye(8 * env_dim)]
    evolution = _step_evolution(_clocked(operations), signature)

    nucleus = np.array([math.sqrt(max(0.0, 1.0 - abs(beta) ** 2)), beta], dtype=complex)
    psi0 = StateVector(_kron(nucleus, _ket(4, 0), _ket(env_dim, 0), _ket(ticks, 0)), normalized=True,
                       signature=signature)

    fate = [factor_projector(signature, 1, ALIVE), factor_projector(signature, 1, DEAD)]
    rest = identity(signature.dim // 2)
    superposed = [tensor(ket_projector(np.array([1, sign]) / math.sqrt(2)), rest) for sign in (1, -1)]
    superposed = [Operator(p.matrix, tags=p.tags, signature=signature) for p in superposed]

    grids = _grids(evolution,
                   ('alive_dead', [('cat', 2.0, fate, ['alive', 'dead'])]),
                   ('cat_history', [('cat', 2.0, fate, ['alive', 'dead']),
                                    ('cat_later', 3.0, fate, ['alive', 'dead'])]),
                   ('nucleus_superposition', [('nucleus', 0.0, superposed, ['plus', 'minus']),
                                              ('cat', 2.0, fate, ['alive', 'dead'])]))
    labels = {'factors': ['nucleus', 'cat'] + ['env{}'.format(i) for i in range(n_env)] + ['clock'],
              'nucleus': ['intact', 'decayed'], 'cat': ['alive0', 'alive1', 'dead0', 'dead1']}
    params = {'beta': beta, 'env_qubits': n_env, 'clock_ticks': ticks, 'mixing': mixing}
    notes = "p(dead) = |beta|^2 = {!r}".format(abs(beta) ** 2)
    return ModelSpec('cat', evolution, psi0, signature, labels, grids, params, notes)


# -------------------------------------------------------------------------
# EPR PAIR

class NoSignalingReport:
    """A-side marginal and correlation for each remote axis of a sweep"""

    def __init__(self, axis_a: np.ndarray, axes_b: Sequence[np.ndarray], marginals: Sequence[float],
                 correlations: Sequence[float], expected: Sequence[float]):
        self.axis_a = axis_a
        self.axes_b = list(axes_b)
        self.marginals = np.asarray(marginals, dtype=float)
        self.correlations = np.asarray(correlations, dtype=float)
        self.expected = np.asarray(expected, dtype=float)

    @property
    def max_marginal_variation(self) -> float:
        return float(self.marginals.max() - self.marginals.min())

    @property
    def max_correlation_error(self) -> float:
        return float(np.max(np.abs(self.correlations - self.expected)))

    def holds(self, tol: float = 1e-10) -> bool:
        return self.max_marginal_variation <= tol and self.max_correlation_error <= tol

    def __repr__(self):
        return "NoSignalingReport(settings={}, marginal variation={:.3e}, correlation error={:.3e})".format(
            len(self.axes_b), self.max_marginal_variation, self.max_correlation_error)


def _unit_axis(axis) -> np.ndarray:
    axis = np.asarray(axis, dtype=float).reshape(-1)
    norm = np.linalg.norm(axis)
    if axis.size != 3 or norm == 0:
        raise ValidationError("measurement axes are non-zero 3-vectors, got {!r}".format(axis.tolist()))
    return axis / norm


def _spin_projector(axis: np.ndarray, sign: int) -> np.ndarray:
    sigma = axis[0] * PAULI_X + axis[1] * PAULI_Y + axis[2] * PAULI_Z
    return (np.eye(2) + sign * sigma) / 2


def _local_measurement(axis: np.ndarray) -> np.ndarray:
    """writes the spin outcome along `axis` into the record qubit next to it"""
    return np.kron(_spin_projector(axis, +1), np.eye(2)) + np.kron(_spin_projector(axis, -1), PAULI_X)


def _epr_model(axis_a: np.ndarray, axis_b: np.ndarray) -> ModelSpec:
    signature = FactorSignature([2, 2, 2, 2])
    evolution = _step_evolution(np.kron(_local_measurement(axis_a), _local_measurement(axis_b)), signature)
    zero, one = _ket(2, 0), _ket(2, 1)
    singlet = (_kron(zero, zero, one, zero) - _kron(one, zero, zero, zero)) / math.sqrt(2)
    psi0 = StateVector(singlet, normalized=True, signature=signature)

    outcomes = [_mask_and(factor_projector(signature, 1, [i]), factor_projector(signature, 3, [j]))
                for i in (0, 1) for j in (0, 1)]
    grids = _grids(evolution, ('records', [('records', 1.0, outcomes, ['++', '+-', '-+', '--'])]))
    labels = {'factors': ['A', 'record_A', 'B', 'record_B'], 'record_A': ['+', '-'], 'record_B': ['+', '-']}
    params = {'axis_a': axis_a.tolist(), 'axis_b': axis_b.tolist()}
    notes = "E(a,b) = -a.b = {!r}".format(-float(np.dot(axis_a, axis_b)))
    return ModelSpec('epr_pair', evolution, psi0, signature, labels, grids, params, notes)


def default_sweep(count: int = 8) -> List[np.ndarray]:
    return [np.array([math.sin(k * math.pi / 4), 0.0, math.cos(k * math.pi / 4)]) for k in range(count)]


def build_epr_pair(axis_a=(0.0, 0.0, 1.0), axis_b=(0.0, 0.0, 1.0), sweep=None) -> Tuple[ModelSpec, NoSignalingReport]:
    """singlet with local records, plus the no-signaling check over remote axes"""
    axis_a = _unit_axis(axis_a)
    spec = _epr_model(axis_a, _unit_axis(axis_b))
    axes_b = [_unit_axis(b) for b in sweep] if sweep is not None else default_sweep()

    marginals, correlations, expected = [], [], []
    for axis in axes_b:
        model = _epr_model(axis_a, axis)
        p = probabilities(decoherence_functional(model.grid('records'), model.psi0))
        plus_plus, plus_minus, minus_plus, minus_minus = (p[(k,)] for k in range(4))
        marginals.append(plus_plus + plus_minus)
        correlations.append(plus_plus - plus_minus - minus_plus + minus_minus)
        expected.append(-float(np.dot(axis_a, axis)))
    return spec, NoSignalingReport(axis_a, axes_b, marginals, correlations, expected)


def build_epr_model(axis_a=(0.0, 0.0, 1.0), axis_b=(0.0, 0.0, 1.0), sweep=None) -> ModelSpec:
    """EPR singlet with local records; the no-signaling sweep is kept in extras"""
    spec, report = build_epr_pair(axis_a, axis_b, sweep)
    spec.extras['no_signaling'] = report
    return spec


# -------------------------------------------------------------------------
# RANDOM

def build_random(dim: int = 8, n_times: int = 3, seed: int = 0, members: int = 2, spacing: float = 0.7,
                 rotated: bool = False) -> ModelSpec:
    """random hermitian H, random state, random basis-partition families at equal spacing"""
    dim, n_times, members = int(dim), int(n_times), int(members)
    if dim < 1 or n_times < 1 or not 1 <= members <= dim:
        raise ValidationError("random model needs dim >= 1, n_times >= 1 and 1 <= members <= dim")
    rng = np.random.default_rng(seed)
    signature = FactorSignature([dim])
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    evolution = Evolution(Operator((a + a.conj().T) / 2, signature=signature))
    amplitudes = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi0 = StateVector(amplitudes, signature=signature).normalized_copy()

    families = []
    for k in range(n_times):
        blocks = np.array_split(rng.permutation(dim), members)
        projectors = [Operator(support=np.isin(np.arange(dim), block), signature=signature) for block in blocks]
        if rotated:
            q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
            projectors = [ket_projector(q[:, block], signature) for block in blocks]
        families.append(('t{}'.format(k + 1), spacing * (k + 1), projectors, None))

    grids = _grids(evolution, ('random', families))
    params = {'dim': dim, 'n_times': n_times, 'seed': seed, 'members': members, 'spacing': spacing,
              'rotated': rotated}
    return ModelSpec('random', evolution, psi0, signature, {'factors': ['system']}, grids, params)


# -------------------------------------------------------------------------
# REGISTRY

MODEL_BUILDERS: Dict[str, Callable[..., ModelSpec]] = {
    'two_slit': build_two_slit,
    'stern_gerlach': build_stern_gerlach,
    'cat': build_cat,
    'epr_pair': build_epr_model,
    'random': build_random,
}


def build_model(name: str, params: Optional[Dict] = None) -> ModelSpec:
    if name not in MODEL_BUILDERS:
        raise ConfigError('model.name', "unknown model {!r}; available: {}".format(name, sorted(MODEL_BUILDERS)))
    builder = MODEL_BUILDERS[name]
    params = dict(params or {})
    accepted = inspect.signature(builder).parameters
    unknown = sorted(set(params) - set(accepted))
    if unknown:
        raise ConfigError('model.params', "{} does not take {}; accepted: {}".format(
            name, unknown, list(accepted)))
    return builder(**params)


def describe_models() -> List[Tuple[str, str, Dict]]:
    described = []
    for name, builder in MODEL_BUILDERS.items():
        doc = inspect.getdoc(builder) or ''
        defaults = {p.name: p.default for p in inspect.signature(builder).parameters.values()}
        described.append((name, doc.split('\n')[0], defaults))
    return described
