"""
Search over coarse grainings of a model's fine history grid.

A candidate picks one set partition of the members of every family. Its
coarse branch vectors are sums of fine ones, so every candidate is scored
from a single fine branch set. Ranking uses computable proxies only:
decoherence margin, entropy of the history distribution and persistence of
classes between neighbouring times.
"""

import functools
import itertools
from typing import Dict, Hashable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from ..errors import ValidationError
from ..utils.debug_print import debug_print, log_event
from .histories import (HEISENBERG, BranchSet, HistoryGrid, ProjectorFamily, branch_set,
                        check_partition, coarse_grain, report_for)
from .models import ModelSpec
from .tolerances import (DEFAULT_EPSILON, DEFAULT_MAX_HISTORIES, DIVISION_EPSILON,
                         MAX_ENUMERATED_MEMBERS)


Partition = Tuple[Tuple[int, ...], ...]

PERSISTENCE_MEASURE = 'persistence proxy: mean over adjacent times of max_a p(class with the same members | class a)'

# key of a class holding every member of its family
WHOLE_FAMILY = '*'

CERTIFIED = 'certified'
PERSISTENCE = 'persistence'
ENTROPY = 'entropy'
CLASSES = 'classes'
ORDER_KEYS = (CERTIFIED, PERSISTENCE, ENTROPY, CLASSES)
DEFAULT_ORDER = (CERTIFIED, PERSISTENCE, ENTROPY)


# -------------------------------------------------------------------------
# ENUMERATION

def set_partitions(size: int, max_classes: Optional[int] = None) -> Iterator[Partition]:
    """set partitions of range(size) in restricted growth string order"""
    if size < 1:
        return
    limit = size if max_classes is None else max(1, int(max_classes))

    def grow(prefix: List[int], used: int):
        if len(prefix) == size:
            yield tuple(tuple(i for i, c in enumerate(prefix) if c == k) for k in range(used))
            return
        for c in range(min(used + 1, limit)):
            prefix.append(c)
            yield from grow(prefix, max(used, c + 1))
            prefix.pop()

    yield from grow([0], 1)


def trivial_partition(size: int) -> Partition:
    return (tuple(range(size)),)


def fine_partition(size: int) -> Partition:
    return tuple((i,) for i in range(size))


class GrainingCandidate:
    def __init__(self, partitions: Sequence[Sequence[Sequence[int]]], grid: HistoryGrid):
        if len(partitions) != len(grid.families):
            raise ValidationError("candidate has {} partitions for {} families".format(
                len(partitions), len(grid.families)))
        self.partitions: Tuple[Partition, ...] = tuple(
            check_partition(blocks, family.size, "partition of family {!r}".format(family.name))
            for blocks, family in zip(partitions, grid.families))
        self.grid = grid

    @property
    def n_classes(self) -> Tuple[int, ...]:
        return tuple(len(p) for p in self.partitions)

    @property
    def history_count(self) -> int:
        return int(np.prod(self.n_classes))

    @property
    def is_trivial(self) -> bool:
        return all(len(p) == 1 for p in self.partitions)

    @functools.cached_property
    def coarse_grid(self) -> HistoryGrid:
        return self.grid.coarsened(self.partitions)

    def class_labels(self) -> List[Tuple[str, ...]]:
        """one label per coarse history, in lexicographic class order"""
        per_time = [['+'.join(family.labels[i] for i in block) for block in partition]
                    for family, partition in zip(self.grid.families, self.partitions)]
        return list(itertools.product(*per_time))

    def class_keys(self) -> List[List[Hashable]]:
        """per family, one key per class: its member labels, or WHOLE_FAMILY for a single class"""
        keys = []
        for family, partition in zip(self.grid.families, self.partitions):
            if len(partition) == 1:
                keys.append([WHOLE_FAMILY])
            else:
                keys.append([frozenset(family.labels[i] for i in block) for block in partition])
        return keys

    def history_partition(self) -> List[List[Tuple[int, ...]]]:
        """the classes of fine histories, one per coarse history"""
        return [list(itertools.product(*blocks)) for blocks in itertools.product(*self.partitions)]

    def describe(self) -> str:
        parts = []
        for family, partition in zip(self.grid.families, self.partitions):
            blocks = ''.join('{' + ','.join(family.labels[i] for i in block) + '}' for block in partition)
            parts.append('{}:{}'.format(family.name, blocks))
        return ' | '.join(parts)

    def __repr__(self):
        return "GrainingCandidate({})".format(self.describe())


def enumerate_grainings(family: ProjectorFamily, max_classes: Optional[int] = None) -> Iterator[GrainingCandidate]:
    """every coarse graining of a single family, deterministically ordered"""
    if family.size > MAX_ENUMERATED_MEMBERS:
        raise ValidationError("family {!r} has {} members, enumeration stops at {}; supply candidates instead".format(
            family.name, family.size, MAX_ENUMERATED_MEMBERS))
    grid = HistoryGrid([family])
    for partition in set_partitions(family.size, max_classes):
        yield GrainingCandidate([partition], grid)


# -------------------------------------------------------------------------
# SCORE

class RealmScore:
    def __init__(self, max_offdiag: float, certified: bool, entropy: float, persistence: float,
                 n_classes: Tuple[int, ...], epsilon: float, probabilities: np.ndarray,
                 measure: str = PERSISTENCE_MEASURE):
        self.max_offdiag = max_offdiag
        self.certified = certified
        self.entropy = entropy
        self.persistence = persistence
        self.n_classes = n_classes
        self.epsilon = epsilon
        self.probabilities = probabilities
        self.measure = measure

    def __repr__(self):
        return "RealmScore(certified={}, max_offdiag={:.3e}, entropy={:.4f}, persistence={:.4f}, classes={})".format(
            self.certified, self.max_offdiag, self.entropy, self.persistence, list(self.n_classes))


def entropy_bits(weights: np.ndarray) -> float:
    p = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def persistence(weights: np.ndarray, classes: Sequence[Sequence[Hashable]]) -> float:
    """
    Mean over adjacent times of the best chance that a class is still occupied next time.

    `classes[k]` holds one key per class of family k, in class order. A class
    at time k continues as the class at time k+1 with an equal key; without
    such a counterpart it scores 0.
    """
    n_classes = tuple(len(keys) for keys in classes)
    if len(n_classes) < 2:
        return 1.0
    table = np.clip(np.asarray(weights, dtype=float), 0.0, None).reshape(n_classes)
    values = []
    for k in range(len(n_classes) - 1):
        others = tuple(i for i in range(len(n_classes)) if i not in (k, k + 1))
        pair = table.sum(axis=others) if others else table
        later = {key: b for b, key in enumerate(classes[k + 1])}
        best = None
        for a, key in enumerate(classes[k]):
            weight = pair[a].sum()
            if weight <= DIVISION_EPSILON:
                continue
            b = later.get(key)
            same = 0.0 if b is None else pair[a, b] / weight
            best = same if best is None else max(best, same)
        if best is not None:
            values.append(best)
    return float(np.mean(values)) if values else 1.0


def _fine_branches(model_or_branches: Union[ModelSpec, BranchSet], grid: HistoryGrid, mode: str,
                   max_histories: int) -> BranchSet:
    if isinstance(model_or_branches, BranchSet):
        return model_or_branches
    return branch_set(grid, model_or_branches.psi0, mode, max_histories)


def score(candidate: GrainingCandidate, model_or_branches: Union[ModelSpec, BranchSet],
          epsilon: float = DEFAULT_EPSILON, mode: str = HEISENBERG,
          max_histories: int = DEFAULT_MAX_HISTORIES) -> RealmScore:
    if candidate.history_count > max_histories:
        raise ValidationError("candidate has {} coarse histories, above the cap of {}".format(
            candidate.history_count, max_histories))
    fine = _fine_branches(model_or_branches, candidate.grid, mode, max_histories)
    coarse = coarse_grain(fine, candidate.history_partition(), candidate.class_labels(), candidate.grid.names)
    report = report_for(coarse, epsilon)
    weights = report.diagonal
    return RealmScore(report.max_offdiag, report.certified, entropy_bits(weights),
                      persistence(weights, candidate.class_keys()), candidate.n_classes, epsilon, weights)


# -------------------------------------------------------------------------
# SCAN

class ScanConstraints:
    """
    What to scan and how to rank it.

    `fixed` maps a family (index or name) to 'fine', 'trivial' or an explicit
    partition; `tied` applies one partition to every free family;
    `candidates` replaces enumeration by explicit per-family partitions.
    """

    def __init__(self, grid: Optional[str] = None, max_classes: Optional[int] = None, tied: bool = False,
                 fixed: Optional[Dict] = None, epsilon: float = DEFAULT_EPSILON,
                 order: Sequence[str] = DEFAULT_ORDER, mode: str = HEISENBERG,
                 max_histories: int = DEFAULT_MAX_HISTORIES, max_candidates: int = 4096, n_jobs: int = 1,
                 candidates: Optional[Sequence] = None):
        unknown = [key for key in order if key not in ORDER_KEYS]
        if unknown:
            raise ValidationError("unknown ranking keys {}; expected some of {}".format(unknown, list(ORDER_KEYS)))
        self.grid = grid
        self.max_classes = max_classes
        self.tied = bool(tied)
        self.fixed = dict(fixed or {})
        self.epsilon = float(epsilon)
        self.order = tuple(order)
        self.mode = mode
        self.max_histories = int(max_histories)
        self.max_candidates = int(max_candidates)
        self.n_jobs = int(n_jobs)
        self.candidates = candidates


def _fixed_partition(value, size: int) -> Partition:
    if value == 'fine':
        return fine_partition(size)
    if value == 'trivial':
        return trivial_partition(size)
    return tuple(tuple(block) for block in value)


def _enumerable(family: ProjectorFamily, max_classes: Optional[int]) -> List[Partition]:
    if family.size > MAX_ENUMERATED_MEMBERS:
        raise ValidationError("family {!r} has {} members, enumeration stops at {}; supply candidates instead".format(
            family.name, family.size, MAX_ENUMERATED_MEMBERS))
    return list(set_partitions(family.size, max_classes))


def _candidate_partitions(grid: HistoryGrid, constraints: ScanConstraints) -> List[Tuple[Partition, ...]]:
    if constraints.candidates is not None:
        combos = [tuple(tuple(tuple(block) for block in p) for p in c) for c in constraints.candidates]
        if not combos:
            raise ValidationError("the supplied candidate set is empty")
        return combos

    n = len(grid.families)
    fixed = {grid.family_index(key): _fixed_partition(value, grid.families[grid.family_index(key)].size)
             for key, value in constraints.fixed.items()}
    free = [k for k in range(n) if k not in fixed]

    if constraints.tied and free:
        sizes = {grid.families[k].size for k in free}
        if len(sizes) > 1:
            raise ValidationError("tied grainings need families of equal size, got {}".format(sorted(sizes)))
        shared = _enumerable(grid.families[free[0]], constraints.max_classes)
        return [tuple(fixed.get(k, p) for k in range(n)) for p in shared]

    per_family = [[fixed[k]] if k in fixed else _enumerable(grid.families[k], constraints.max_classes)
                  for k in range(n)]
    count = int(np.prod([len(options) for options in per_family]))
    if count > constraints.max_candidates:
        raise ValidationError("{} candidate grainings exceed the cap of {}; tie or fix families".format(
            count, constraints.max_candidates))
    return list(itertools.product(*per_family))


def _rank_key(order: Sequence[str]):
    def key(item):
        _, s = item
        values = []
        for name in order:
            if name == CERTIFIED:
                values.append(0 if s.certified else 1)
            elif name == PERSISTENCE:
                values.append(-s.persistence)
            elif name == ENTROPY:
                values.append(s.entropy)
            elif name == CLASSES:
                values.append(-int(np.prod(s.n_classes)))
        return tuple(values)
    return key


def scan(model: ModelSpec, constraints: Optional[ScanConstraints] = None) -> List[Tuple[GrainingCandidate, RealmScore]]:
    """
    Score every candidate graining and rank them.

    Informative candidates come first, sorted by `constraints.order` with
    enumeration order breaking ties; the all-coarse candidate closes the list
    as the baseline.
    """
    constraints = constraints or ScanConstraints()
    grid = model.grid(constraints.grid)
    combos = _candidate_partitions(grid, constraints)
    candidates = [GrainingCandidate(c, grid) for c in combos]
    if not any(c.is_trivial for c in candidates):
        candidates.append(GrainingCandidate([trivial_partition(f.size) for f in grid.families], grid))
    debug_print("scan: {} candidates over grid {}".format(len(candidates), list(grid.names)))

    fine = branch_set(grid, model.psi0, constraints.mode, constraints.max_histories, constraints.n_jobs)
    scores = Parallel(n_jobs=constraints.n_jobs, prefer='threads')(
        delayed(score)(c, fine, constraints.epsilon, constraints.mode, constraints.max_histories)
        for c in candidates)

    scored = list(zip(candidates, scores))
    informative = sorted([item for item in scored if not item[0].is_trivial], key=_rank_key(constraints.order))
    baseline = [item for item in scored if item[0].is_trivial]
    ranked = informative + baseline
    log_event('scan', model=model.name, grid=','.join(grid.names), candidates=len(ranked),
              certified=sum(1 for _, s in ranked if s.certified), order=','.join(constraints.order))
    return ranked
