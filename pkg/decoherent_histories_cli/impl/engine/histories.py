"""
Projector families, history grids, branch vectors and the decoherence
functional.

Branch vectors are produced by a level-by-level chain: at every family the
current block of partial branches (one column per history prefix) is hit by
each member and the results are interleaved so that columns stay in
lexicographic history order. Class operators are never formed on this path.
"""

import functools
import itertools
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from ..errors import (CertificationRefused, HistoryCapExceededError, HistoryIndexError,
                      InvalidFamilyError, PartitionError, UnequalSpacingError,
                      ValidationError, Violation)
from ..utils.debug_print import debug_print, log_event
from .operators import (HERMITIAN, PROJECTOR, Evolution, Operator, StateVector,
                        identity, max_abs)
from .tolerances import (DEFAULT_EPSILON, DEFAULT_MAX_HISTORIES, EQUALITY_TOL,
                         NEGATIVE_PROBABILITY_TOL, STRUCTURAL_TOL)


HEISENBERG = 'heisenberg'
SCHRODINGER = 'schrodinger'
MODES = (HEISENBERG, SCHRODINGER)

History = Tuple[int, ...]


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValidationError("unknown evaluation mode {!r}, expected one of {}".format(mode, list(MODES)))
    return mode


# -------------------------------------------------------------------------
# PROJECTOR FAMILY

def check_family(members: Sequence[Operator], tol: float = STRUCTURAL_TOL) -> List[Violation]:
    """every way the members fail to be an exhaustive set of orthogonal projectors"""
    if not members:
        return [Violation('empty', detail='a family needs at least one member')]
    dims = {m.dim for m in members}
    if len(dims) > 1:
        return [Violation('dimension', detail='member dimensions {}'.format(sorted(dims)))]
    dim = dims.pop()

    violations = []
    if all(m.support is not None for m in members):
        counts = np.sum([m.support for m in members], axis=0)
        completeness = float(np.max(np.abs(counts - 1)))
        if completeness > tol:
            violations.append(Violation('completeness', deviation=completeness))
        for i, j in itertools.combinations(range(len(members)), 2):
            if np.any(members[i].support & members[j].support):
                violations.append(Violation('orthogonality', (i, j), deviation=1.0))
        return violations

    for i, member in enumerate(members):
        asymmetry = member.max_asymmetry()
        if asymmetry > tol:
            violations.append(Violation('hermitian', (i,), asymmetry))
        idempotency = member.idempotency_defect()
        if idempotency > tol:
            violations.append(Violation('idempotent', (i,), idempotency))

    total = np.zeros((dim, dim), dtype=complex)
    for member in members:
        total += member.matrix
    completeness = max_abs(total - np.eye(dim))
    if completeness > tol:
        violations.append(Violation('completeness', deviation=completeness))

    for i, j in itertools.combinations(range(len(members)), 2):
        overlap = max_abs(members[i].matrix @ members[j].matrix)
        if overlap > tol:
            violations.append(Violation('orthogonality', (i, j), overlap))
    return violations


def _raise_on_violations(violations: List[Violation], name: str):
    if violations:
        raise InvalidFamilyError(
            "family {!r} is not a valid projector family: {}".format(
                name, '; '.join(v.describe() for v in violations)),
            violations)


def _default_labels(labels, count: int) -> Tuple[str, ...]:
    if labels is None:
        return tuple(str(i) for i in range(count))
    labels = tuple(str(label) for label in labels)
    if len(labels) != count:
        raise ValidationError("{} labels given for {} members".format(len(labels), count))
    if len(set(labels)) != count:
        raise ValidationError("family labels must be unique, got {}".format(list(labels)))
    return labels


class ProjectorFamily:
    """
    Exhaustive set of orthogonal projectors attached to one time.

    `members` are the Heisenberg-picture projectors at `time`. A family built
    by `evolve_family` keeps its time-0 members and conjugates them lazily.
    Use `validate_family` or `evolve_family` to build one.
    """

    def __init__(self, time: float, members: Optional[Sequence[Operator]], labels=None, name: str = None,
                 schrodinger_members: Optional[Sequence[Operator]] = None, evolution: Evolution = None):
        if members is None and (schrodinger_members is None or evolution is None):
            raise ValidationError("a family needs its members or its time-0 members and an evolution")
        self.time = float(time)
        self.name = name if name is not None else 't={!r}'.format(self.time)
        self._members = tuple(members) if members is not None else None
        self._schrodinger = tuple(schrodinger_members) if schrodinger_members is not None else None
        self._evolution = evolution
        count = len(self._members if self._members is not None else self._schrodinger)
        self.labels: Tuple[str, ...] = _default_labels(labels, count)

    @functools.cached_property
    def members(self) -> Tuple[Operator, ...]:
        if self._members is not None:
            return self._members
        return tuple(self._evolution.heisenberg(m, self.time) for m in self._schrodinger)

    def schrodinger_members(self, evolution: Evolution) -> Tuple[Operator, ...]:
        if self.time == 0:
            return self._members if self._members is not None else self._schrodinger
        if self._schrodinger is not None and evolution is self._evolution:
            return self._schrodinger
        return tuple(evolution.schrodinger(m, self.time) for m in self.members)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        source = self._members if self._members is not None else self._schrodinger
        return source[0].dim

    @property
    def fine_grained(self) -> bool:
        source = self._members if self._members is not None else self._schrodinger
        return all(m.rank() == 1 for m in source)

    def index_of(self, alternative: Union[int, str]) -> int:
        if isinstance(alternative, (int, np.integer)) and not isinstance(alternative, bool):
            if 0 <= alternative < self.size:
                return int(alternative)
        elif alternative in self.labels:
            return self.labels.index(alternative)
        raise HistoryIndexError("family {!r} has no alternative {!r}; labels are {}".format(
            self.name, alternative, list(self.labels)))

    def __len__(self):
        return self.size

    def __repr__(self):
        return "ProjectorFamily(name={!r}, time={!r}, labels={})".format(self.name, self.time, list(self.labels))


def validate_family(members: Sequence[Operator], time: float = 0.0, labels=None, name: str = None) -> ProjectorFamily:
    """family of Heisenberg projectors given directly at `time`"""
    members = [m.with_tags(HERMITIAN, PROJECTOR) if m.support is None else m for m in members]
    _raise_on_violations(check_family(members), name)
    return ProjectorFamily(time, members, labels=labels, name=name)


def evolve_family(members0: Sequence[Operator], evolution: Evolution, time: float, labels=None,
                  name: str = None) -> ProjectorFamily:
    """family given by time-0 members, Heisenberg-evolved to `time` on demand"""
    members0 = [m.with_tags(HERMITIAN, PROJECTOR) if m.support is None else m for m in members0]
    _raise_on_violations(check_family(members0), name)
    if members0[0].dim != evolution.dim:
        raise ValidationError("family dimension {} differs from the evolution's {}".format(
            members0[0].dim, evolution.dim))
    return ProjectorFamily(time, None, labels=labels, name=name, schrodinger_members=members0,
                           evolution=evolution)


def merge_projectors(members: Sequence[Operator]) -> Operator:
    if all(m.support is not None for m in members):
        return Operator(support=np.any([m.support for m in members], axis=0), signature=members[0].signature)
    total = sum(m.matrix for m in members)
    return Operator((total + total.conj().T) / 2, tags=[HERMITIAN, PROJECTOR], signature=members[0].signature)


def check_partition(blocks: Sequence[Sequence[int]], size: int, what: str = 'partition') -> Tuple[Tuple[int, ...], ...]:
    blocks = tuple(tuple(int(i) for i in block) for block in blocks)
    seen = [i for block in blocks for i in block]
    violations = []
    if any(len(block) == 0 for block in blocks):
        violations.append(Violation('empty-class', detail='a class has no members'))
    out_of_range = sorted(set(i for i in seen if i < 0 or i >= size))
    if out_of_range:
        violations.append(Violation('range', out_of_range))
    duplicated = sorted(set(i for i in seen if seen.count(i) > 1))
    if duplicated:
        violations.append(Violation('disjoint', duplicated))
    missing = sorted(set(range(size)) - set(seen))
    if missing:
        violations.append(Violation('covering', missing))
    if violations:
        raise PartitionError("{} is not disjoint and covering: {}".format(
            what, '; '.join(v.describe() for v in violations)), violations)
    return blocks


# -------------------------------------------------------------------------
# HISTORY GRID

class HistoryGrid:
    def __init__(self, families: Sequence[ProjectorFamily], evolution: Optional[Evolution] = None):
        families = tuple(families)
        if not families:
            raise ValidationError("a history grid needs at least one family",
                                  [Violation('empty', detail='no families')])
        dims = {f.dim for f in families}
        if len(dims) > 1:
            raise ValidationError("families have different dimensions {}".format(sorted(dims)))
        times = [f.time for f in families]
        for k in range(1, len(times)):
            if not times[k] > times[k - 1]:
                raise ValidationError("family times must be strictly increasing, got {}".format(times),
                                      [Violation('time-order', (k - 1, k), times[k - 1] - times[k])])
        names = [f.name for f in families]
        if len(set(names)) != len(names):
            raise ValidationError("family names must be unique, got {}".format(names))
        if evolution is not None and evolution.dim != dims.copy().pop():
            raise ValidationError("evolution dimension {} differs from the families'".format(evolution.dim))
        self.families: Tuple[ProjectorFamily, ...] = families
        self.evolution: Optional[Evolution] = evolution

    @property
    def dim(self) -> int:
        return self.families[0].dim

    @property
    def times(self) -> Tuple[float, ...]:
        return tuple(f.time for f in self.families)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.families)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(f.size for f in self.families)

    @property
    def history_count(self) -> int:
        return int(np.prod(self.shape))

    def check_cap(self, max_histories: int = DEFAULT_MAX_HISTORIES):
        if self.history_count > max_histories:
            raise HistoryCapExceededError(self.history_count, max_histories)

    def histories(self, max_histories: int = DEFAULT_MAX_HISTORIES) -> Iterator[History]:
        self.check_cap(max_histories)
        return itertools.product(*(range(size) for size in self.shape))

    def check_index(self, alpha: Sequence[int]) -> History:
        alpha = tuple(alpha)
        if len(alpha) != len(self.families):
            raise HistoryIndexError("history {} has {} entries for {} families".format(
                alpha, len(alpha), len(self.families)))
        for k, (a, size) in enumerate(zip(alpha, self.shape)):
            if not 0 <= a < size:
                raise HistoryIndexError("alternative {} out of range for family {!r} of size {}".format(
                    a, self.families[k].name, size))
        return tuple(int(a) for a in alpha)

    def labels_of(self, alpha: Sequence[int]) -> Tuple[str, ...]:
        return tuple(f.labels[a] for f, a in zip(self.families, alpha))

    def family_index(self, key: Union[int, str]) -> int:
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            if 0 <= key < len(self.families):
                return int(key)
        elif key in self.names:
            return self.names.index(key)
        raise HistoryIndexError("grid has no family {!r}; families are {}".format(key, list(self.names)))

    def subgrid(self, indices: Sequence[int]) -> 'HistoryGrid':
        indices = sorted(set(self.family_index(i) for i in indices))
        return HistoryGrid([self.families[i] for i in indices], self.evolution)

    def coarsened(self, partitions: Sequence[Sequence[Sequence[int]]]) -> 'HistoryGrid':
        """grid whose families merge the members of each class"""
        if len(partitions) != len(self.families):
            raise PartitionError("{} partitions given for {} families".format(len(partitions), len(self.families)))
        families = []
        for family, blocks in zip(self.families, partitions):
            blocks = check_partition(blocks, family.size, "partition of family {!r}".format(family.name))
            labels = ['+'.join(family.labels[i] for i in block) for block in blocks]
            if family._schrodinger is not None:
                members0 = [merge_projectors([family._schrodinger[i] for i in block]) for block in blocks]
                families.append(ProjectorFamily(family.time, None, labels, family.name,
                                                schrodinger_members=members0, evolution=family._evolution))
            else:
                members = [merge_projectors([family.members[i] for i in block]) for block in blocks]
                families.append(ProjectorFamily(family.time, members, labels, family.name))
        return HistoryGrid(families, self.evolution)

    def __repr__(self):
        return "HistoryGrid(names={}, times={}, shape={})".format(list(self.names), list(self.times), list(self.shape))


# -------------------------------------------------------------------------
# BRANCH SET

class BranchSet:
    """branch vectors as the columns of one (dim, count) array, in history order"""

    def __init__(self, grid: HistoryGrid, state: StateVector, vectors: np.ndarray, histories: Sequence,
                 labels: Sequence[Tuple[str, ...]], label_columns: Sequence[str], mode: str):
        vectors = np.asarray(vectors, dtype=complex)
        vectors.flags.writeable = False
        self.grid = grid
        self.state = state
        self.vectors = vectors
        self.histories = tuple(histories)
        self.labels = tuple(tuple(label) for label in labels)
        self.label_columns = tuple(label_columns)
        self.mode = mode
        self._positions = {h: i for i, h in enumerate(self.histories)}

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def position(self, history) -> int:
        try:
            return self._positions[history if not isinstance(history, list) else tuple(history)]
        except KeyError:
            raise HistoryIndexError("history {!r} is not in this branch set".format(history))

    def vector(self, history) -> StateVector:
        return StateVector(self.vectors[:, self.position(history)], signature=self.state.signature)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.real(np.sum(np.abs(self.vectors) ** 2, axis=0)))

    def total(self) -> np.ndarray:
        return self.vectors.sum(axis=1)

    def sum_rule_defect(self) -> float:
        return float(np.max(np.abs(self.total() - self.state.amplitudes)))


def _check_state(grid: HistoryGrid, psi: StateVector):
    if psi.dim != grid.dim:
        raise ValidationError("state dimension {} differs from the grid's {}".format(psi.dim, grid.dim))


def _check_normalized(psi: StateVector):
    deviation = abs(psi.norm() - 1.0)
    if deviation > STRUCTURAL_TOL:
        raise ValidationError("state must be normalized, |norm - 1| = {:.3e}".format(deviation),
                              [Violation('normalization', deviation=deviation)])


def _schrodinger_evolution(grid: HistoryGrid) -> Evolution:
    if grid.evolution is None:
        raise ValidationError("the schrodinger chain needs the grid's Hamiltonian")
    steps = np.diff(grid.times)
    if steps.size > 1:
        deviation = float(np.max(np.abs(steps - steps[0])))
        if deviation > EQUALITY_TOL * max(1.0, abs(steps[0])):
            raise UnequalSpacingError(
                "the schrodinger chain needs equally spaced family times, got steps {}; "
                "use mode {!r} instead".format(list(steps), HEISENBERG),
                [Violation('spacing', deviation=deviation)])
    return grid.evolution


def _apply_members(members: Sequence[Operator], vectors: np.ndarray, n_jobs: int) -> List[np.ndarray]:
    if n_jobs == 1 or len(members) == 1:
        return [m.apply(vectors) for m in members]
    return Parallel(n_jobs=n_jobs, prefer='threads')(delayed(m.apply)(vectors) for m in members)


def _chain(grid: HistoryGrid, vectors: np.ndarray, mode: str, select=None, n_jobs: int = 1) -> np.ndarray:
    """
    run the chain over every family; `select` picks one member per family
    instead of all of them
    """
    evolution = _schrodinger_evolution(grid) if mode == SCHRODINGER else None
    elapsed = 0.0
    for k, family in enumerate(grid.families):
        if mode == SCHRODINGER:
            vectors = evolution.advance(vectors, family.time - elapsed)
            elapsed = family.time
            members = family.schrodinger_members(evolution)
        else:
            members = family.members
        if select is not None:
            vectors = members[select[k]].apply(vectors)
            continue
        blocks = _apply_members(members, vectors, n_jobs)
        vectors = np.stack(blocks, axis=2).reshape(grid.dim, -1)
    if mode == SCHRODINGER:
        vectors = evolution.advance(vectors, -elapsed)
    return vectors


def branch_set(grid: HistoryGrid, psi: StateVector, mode: str = HEISENBERG,
               max_histories: int = DEFAULT_MAX_HISTORIES, n_jobs: int = 1) -> BranchSet:
    check_mode(mode)
    _check_state(grid, psi)
    grid.check_cap(max_histories)
    debug_print("branch set: {} histories, dim {}, mode {}".format(grid.history_count, grid.dim, mode))
    vectors = _chain(grid, psi.amplitudes.reshape(-1, 1), mode, n_jobs=n_jobs)
    histories = tuple(grid.histories(max_histories))
    return BranchSet(grid, psi, vectors, histories, [grid.labels_of(a) for a in histories], grid.names, mode)


def branch_vector(grid: HistoryGrid, alpha: Sequence[int], psi: StateVector, mode: str = HEISENBERG) -> StateVector:
    check_mode(mode)
    _check_state(grid, psi)
    alpha = grid.check_index(alpha)
    return StateVector(_chain(grid, psi.amplitudes, mode, select=alpha), signature=psi.signature)


def class_operator(grid: HistoryGrid, alpha: Sequence[int]) -> Operator:
    """the explicit matrix P_n(t_n)...P_1(t_1)"""
    alpha = grid.check_index(alpha)
    result = identity(grid.dim).matrix
    for family, a in zip(grid.families, alpha):
        result = family.members[a].apply(result)
    return Operator(result)


# -------------------------------------------------------------------------
# DECOHERENCE FUNCTIONAL

class DecoherenceReport:
    def __init__(self, functional: np.ndarray, epsilon: float, histories: Sequence, labels: Sequence,
                 label_columns: Sequence[str], mode: str):
        functional = np.array(functional, dtype=complex)
        functional.flags.writeable = False
        self.functional = functional
        self.epsilon = float(epsilon)
        self.histories = tuple(histories)
        self.labels = tuple(labels)
        self.label_columns = tuple(label_columns)
        self.mode = mode

        off_diagonal = functional - np.diag(np.diag(functional))
        self.max_offdiag = max_abs(off_diagonal)
        # real-part (weak) consistency, reported only
        self.max_offdiag_real = max_abs(off_diagonal.real)
        self.certified = self.max_offdiag <= self.epsilon
        self.diagonal = np.real(np.diag(functional)).copy()
        self.diagonal.flags.writeable = False
        self._positions = {h: i for i, h in enumerate(self.histories)}

    @property
    def history_count(self) -> int:
        return len(self.histories)

    @property
    def probabilities(self) -> Optional[Tuple[float, ...]]:
        if not self.certified:
            return None
        return tuple(float(p) for p in self.diagonal)

    @property
    def branch_norms(self) -> np.ndarray:
        return np.sqrt(np.clip(self.diagonal, 0.0, None))

    def position(self, history) -> int:
        try:
            return self._positions[history]
        except KeyError:
            raise HistoryIndexError("history {!r} is not in this report".format(history))

    def total(self) -> complex:
        return complex(self.functional.sum())

    def __repr__(self):
        return "DecoherenceReport(histories={}, max_offdiag={:.3e}, epsilon={:.1e}, certified={})".format(
            self.history_count, self.max_offdiag, self.epsilon, self.certified)


def report_for(branches: BranchSet, epsilon: float = DEFAULT_EPSILON) -> DecoherenceReport:
    v = branches.vectors
    functional = v.conj().T @ v
    functional = (functional + functional.conj().T) / 2
    report = DecoherenceReport(functional, epsilon, branches.histories, branches.labels,
                               branches.label_columns, branches.mode)
    log_event('decoherence', histories=report.history_count, max_offdiag=report.max_offdiag,
              epsilon=report.epsilon, certified=report.certified, mode=report.mode)
    return report


def decoherence_functional(grid: HistoryGrid, psi: StateVector, epsilon: float = DEFAULT_EPSILON,
                           mode: str = HEISENBERG, max_histories: int = DEFAULT_MAX_HISTORIES,
                           n_jobs: int = 1) -> DecoherenceReport:
    _check_normalized(psi)
    return report_for(branch_set(grid, psi, mode, max_histories, n_jobs), epsilon)


def coarse_grain(branches: BranchSet, partition: Sequence[Sequence], names: Optional[Sequence] = None,
                 label_columns: Optional[Sequence[str]] = None) -> BranchSet:
    """
    sum the branch vectors of each class

    `partition` lists classes of histories (as they appear in `branches`);
    `names` gives one label, or one label tuple, per class.
    """
    positions = [[branches.position(h if not isinstance(h, list) else tuple(h)) for h in block]
                 for block in partition]
    check_partition(positions, branches.count, "coarse graining of {} histories".format(branches.count))

    vectors = np.stack([branches.vectors[:, block].sum(axis=1) for block in positions], axis=1)
    if names is None:
        names = ['{' + ','.join('/'.join(branches.labels[i]) for i in block) + '}' for block in positions]
    labels = [name if isinstance(name, tuple) else (str(name),) for name in names]
    if len(labels) != len(positions):
        raise ValidationError("{} names given for {} classes".format(len(labels), len(positions)))
    columns = label_columns if label_columns is not None else ('class',)
    return BranchSet(branches.grid, branches.state, vectors, tuple(range(len(positions))), labels, columns,
                     branches.mode)


def probabilities(report: DecoherenceReport) -> Dict:
    if not report.certified:
        raise CertificationRefused(report.max_offdiag, report.epsilon)
    lowest = float(np.min(report.diagonal))
    if lowest < -NEGATIVE_PROBABILITY_TOL:
        raise ValidationError("diagonal of D dips to {:.3e}".format(lowest),
                              [Violation('negative-probability', deviation=-lowest)])
    clamped = np.clip(report.diagonal, 0.0, 1.0)
    return {h: float(p) for h, p in zip(report.histories, clamped)}


def interference_terms(report: DecoherenceReport, members: Sequence) -> complex:
    """sum of D over distinct pairs inside one coarse class"""
    idx = [report.position(h) for h in members]
    block = report.functional[np.ix_(idx, idx)]
    return complex(block.sum() - np.trace(block))
