"""
Prediction, retrodiction and state reduction on top of the history engine.

Conditional probabilities are ratios of branch norms over the joint set of
conditioning and target families; the joint set must be decoherent.
"""

from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from ..errors import (CertificationRefused, NullConditionError, ValidationError,
                      Violation)
from ..utils.debug_print import log_event
from .histories import (HEISENBERG, DecoherenceReport, HistoryGrid, branch_vector,
                        check_mode, decoherence_functional, probabilities)
from .operators import HERMITIAN, Operator, StateVector
from .tolerances import (DEFAULT_EPSILON, DEFAULT_MAX_HISTORIES, DENSITY_EIGEN_TOL,
                         DIVISION_EPSILON, EQUALITY_TOL, STRUCTURAL_TOL)


# -------------------------------------------------------------------------
# CONDITIONS

class Condition:
    """one alternative of one family, by index or by name / label"""

    def __init__(self, family: Union[int, str], alternative: Union[int, str], time: Optional[float] = None):
        self.family = family
        self.alternative = alternative
        self.time = time

    def resolve(self, grid: HistoryGrid) -> 'Condition':
        index = grid.family_index(self.family)
        family = grid.families[index]
        alternative = family.index_of(self.alternative)
        if self.time is not None and abs(self.time - family.time) > EQUALITY_TOL * max(1.0, abs(family.time)):
            raise ValidationError("condition on {!r} names time {!r} but the family sits at {!r}".format(
                family.name, self.time, family.time))
        return Condition(index, alternative, family.time)

    def describe(self, grid: HistoryGrid) -> str:
        family = grid.families[grid.family_index(self.family)]
        return "{}={}@{!r}".format(family.name, family.labels[family.index_of(self.alternative)], family.time)

    def __eq__(self, other):
        return isinstance(other, Condition) and (self.family, self.alternative, self.time) == \
            (other.family, other.alternative, other.time)

    def __repr__(self):
        return "Condition({!r}, {!r}, time={!r})".format(self.family, self.alternative, self.time)


def _as_conditions(entries) -> List[Condition]:
    if entries is None:
        return []
    if isinstance(entries, Condition):
        return [entries]
    if isinstance(entries, ConditionChain):
        return list(entries.entries)
    return list(entries)


class ConditionChain:
    def __init__(self, entries: Iterable[Condition] = ()):
        self.entries = tuple(_as_conditions(entries))

    def resolved(self, grid: HistoryGrid) -> 'ConditionChain':
        entries = tuple(c.resolve(grid) for c in self.entries)
        times = [c.time for c in entries]
        for k in range(1, len(times)):
            if not times[k] > times[k - 1]:
                raise ValidationError("condition times must be strictly increasing, got {}".format(times),
                                      [Violation('time-order', (k - 1, k), times[k - 1] - times[k])])
        return ConditionChain(entries)

    @property
    def last_time(self) -> float:
        return self.entries[-1].time if self.entries else float('-inf')

    def appended(self, condition: Condition) -> 'ConditionChain':
        return ConditionChain(self.entries + (condition,))

    def describe(self, grid: HistoryGrid) -> str:
        if not self.entries:
            return '(none)'
        return ', '.join(c.describe(grid) for c in self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self):
        return "ConditionChain({})".format(list(self.entries))


# -------------------------------------------------------------------------
# UTILS

def _joint_grid(grid: HistoryGrid, conditions: Sequence[Condition]):
    """subgrid of the conditioned families, plus the history they pick"""
    ordered = sorted(conditions, key=lambda c: c.family)
    return grid.subgrid([c.family for c in ordered]), tuple(c.alternative for c in ordered)


def _chain_probability(grid: HistoryGrid, psi: StateVector, conditions: Sequence[Condition], mode: str) -> float:
    if not conditions:
        return psi.norm() ** 2
    subgrid, alpha = _joint_grid(grid, conditions)
    amplitudes = branch_vector(subgrid, alpha, psi, mode).amplitudes
    return float(np.real(np.vdot(amplitudes, amplitudes)))


def _require_certified(grid: HistoryGrid, psi: StateVector, conditions: Sequence[Condition], epsilon: float,
                       mode: str, max_histories: int) -> DecoherenceReport:
    subgrid, _ = _joint_grid(grid, conditions)
    report = decoherence_functional(subgrid, psi, epsilon, mode, max_histories)
    if not report.certified:
        raise CertificationRefused(report.max_offdiag, epsilon,
                                   what="joint set of {}".format(', '.join(subgrid.names)))
    return report


def _ratio(numerator: float, denominator: float) -> float:
    if denominator <= DIVISION_EPSILON:
        raise NullConditionError(denominator, DIVISION_EPSILON)
    return float(numerator / denominator)


# -------------------------------------------------------------------------
# PREDICTION / RETRODICTION

def predict(grid: HistoryGrid, psi: StateVector, condition, future: Condition,
            epsilon: float = DEFAULT_EPSILON, mode: str = HEISENBERG, require_certified: bool = True,
            max_histories: int = DEFAULT_MAX_HISTORIES) -> float:
    """p(future | condition) for a future alternative later than every condition"""
    check_mode(mode)
    chain = ConditionChain(_as_conditions(condition)).resolved(grid)
    target = future.resolve(grid)
    if not target.time > chain.last_time:
        raise ValidationError("the predicted alternative at {!r} is not later than the conditions".format(
            target.time))
    joint = list(chain) + [target]
    if require_certified:
        _require_certified(grid, psi, joint, epsilon, mode, max_histories)
    denominator = _chain_probability(grid, psi, list(chain), mode)
    value = _ratio(_chain_probability(grid, psi, joint, mode), denominator)
    log_event('predict', condition=chain.describe(grid), target=target.describe(grid), probability=value)
    return value


def retrodict(grid: HistoryGrid, psi: StateVector, present: Condition, past,
              epsilon: float = DEFAULT_EPSILON, mode: str = HEISENBERG, require_certified: bool = True,
              max_histories: int = DEFAULT_MAX_HISTORIES) -> float:
    """p(past | present) for past alternatives earlier than the present one"""
    check_mode(mode)
    anchor = present.resolve(grid)
    chain = ConditionChain(_as_conditions(past)).resolved(grid)
    if not chain.last_time < anchor.time:
        raise ValidationError("the retrodicted alternatives must be earlier than the present one at {!r}".format(
            anchor.time))
    joint = list(chain) + [anchor]
    if require_certified:
        _require_certified(grid, psi, joint, epsilon, mode, max_histories)
    denominator = _chain_probability(grid, psi, [anchor], mode)
    value = _ratio(_chain_probability(grid, psi, joint, mode), denominator)
    log_event('retrodict', past=chain.describe(grid), present=anchor.describe(grid), probability=value)
    return value


def joint_distribution(grid: HistoryGrid, psi: StateVector, epsilon: float = DEFAULT_EPSILON,
                       mode: str = HEISENBERG, max_histories: int = DEFAULT_MAX_HISTORIES):
    return probabilities(decoherence_functional(grid, psi, epsilon, mode, max_histories))


# -------------------------------------------------------------------------
# EFFECTIVE STATE

class EffectiveState:
    """
    Heisenberg-picture density matrix summarizing a condition chain.

    Keeps the grid, state, epsilon and mode it came from so that updates can
    be replayed from the original state.
    """

    def __init__(self, rho: Operator, condition: ConditionChain, normalizer: float, grid: HistoryGrid,
                 psi: StateVector, epsilon: float = DEFAULT_EPSILON, mode: str = HEISENBERG):
        self.rho = rho
        self.condition = condition
        self.normalizer = float(normalizer)
        self.grid = grid
        self.psi = psi
        self.epsilon = epsilon
        self.mode = mode

    @property
    def dim(self) -> int:
        return self.rho.dim

    def check(self) -> 'EffectiveState':
        m = self.rho.matrix
        violations = []
        trace_deviation = abs(np.trace(m) - 1.0)
        if trace_deviation > STRUCTURAL_TOL:
            violations.append(Violation('trace', deviation=trace_deviation))
        asymmetry = self.rho.max_asymmetry()
        if asymmetry > STRUCTURAL_TOL:
            violations.append(Violation('hermitian', deviation=asymmetry))
        lowest = float(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2)))
        if lowest < -DENSITY_EIGEN_TOL:
            violations.append(Violation('positivity', deviation=-lowest))
        if violations:
            raise ValidationError("effective state is not a density matrix: {}".format(
                '; '.join(v.describe() for v in violations)), violations)
        return self

    def __repr__(self):
        return "EffectiveState(dim={}, conditions={}, normalizer={:.6g})".format(
            self.dim, len(self.condition), self.normalizer)


def _density(vector: np.ndarray, normalizer: float) -> Operator:
    rho = np.outer(vector, vector.conj()) / normalizer
    return Operator((rho + rho.conj().T) / 2, tags=[HERMITIAN])


def effective_state(grid: HistoryGrid, psi: StateVector, condition=None, epsilon: float = DEFAULT_EPSILON,
                    mode: str = HEISENBERG) -> EffectiveState:
    check_mode(mode)
    chain = ConditionChain(_as_conditions(condition)).resolved(grid)
    if len(chain):
        subgrid, alpha = _joint_grid(grid, list(chain))
        vector = branch_vector(subgrid, alpha, psi, mode).amplitudes
    else:
        vector = psi.amplitudes
    normalizer = float(np.real(np.vdot(vector, vector)))
    if normalizer <= DIVISION_EPSILON:
        raise NullConditionError(normalizer, DIVISION_EPSILON)
    return EffectiveState(_density(vector, normalizer), chain, normalizer, grid, psi, epsilon, mode)


def _later_target(state: EffectiveState, future: Condition) -> Condition:
    target = future.resolve(state.grid)
    if not target.time > state.condition.last_time:
        raise ValidationError("alternative at {!r} is not later than the state's conditions".format(target.time))
    return target


def predict_from_state(state: EffectiveState, future: Condition, require_certified: bool = True,
                       max_histories: int = DEFAULT_MAX_HISTORIES) -> float:
    """Tr[P(t) rho_eff]"""
    target = _later_target(state, future)
    if require_certified:
        _require_certified(state.grid, state.psi, list(state.condition) + [target], state.epsilon, state.mode,
                           max_histories)
    projector = state.grid.families[target.family].members[target.alternative]
    return float(np.real(np.trace(projector.apply(state.rho.matrix))))


def update(state: EffectiveState, new: Condition) -> EffectiveState:
    """reduce the state on a new, later alternative by replaying the extended chain"""
    target = _later_target(state, new)
    return effective_state(state.grid, state.psi, state.condition.appended(target), state.epsilon, state.mode)


def sandwich_update(state: EffectiveState, new: Condition) -> EffectiveState:
    """reduce the state directly as P rho P / Tr(P rho P)"""
    target = _later_target(state, new)
    projector = state.grid.families[target.family].members[target.alternative]
    left = projector.apply(state.rho.matrix)
    sandwiched = projector.apply(left.conj().T)
    weight = float(np.real(np.trace(sandwiched)))
    normalizer = state.normalizer * weight
    if normalizer <= DIVISION_EPSILON:
        raise NullConditionError(normalizer, DIVISION_EPSILON)
    rho = sandwiched / weight
    rho = Operator((rho + rho.conj().T) / 2, tags=[HERMITIAN])
    return EffectiveState(rho, state.condition.appended(target), normalizer, state.grid, state.psi,
                          state.epsilon, state.mode)
