from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..conf import RunConfig
from ..errors import ConfigError, ValidationError
from ..engine import inference, models, realms
from ..engine.histories import (DecoherenceReport, HistoryGrid, decoherence_functional,
                                evolve_family, validate_family)
from ..engine.models import ModelSpec
from ..engine.operators import (Evolution, FactorSignature, Operator, StateVector,
                                basis_projector, factor_projector, hermitian, ket_projector)
from ..engine.tolerances import STRUCTURAL_TOL
from ..utils.debug_print import debug_print, debug_pprint, log_event


CONFIG_GRID = 'config'
PICTURES = ('schrodinger', 'heisenberg')


# -------------------------------------------------------------------------
# PARSING

def parse_complex_array(field: str, value, ndim: int) -> np.ndarray:
    """nested lists whose leaves are [re, im] pairs or plain numbers"""
    try:
        array = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(field, "expected nested arrays of numbers or [re, im] pairs")
    if array.ndim == ndim + 1 and array.shape[-1] == 2:
        return array[..., 0] + 1j * array[..., 1]
    if array.ndim == ndim:
        return array.astype(complex)
    raise ConfigError(field, "expected a {}-dimensional array of [re, im] pairs, got shape {}".format(
        ndim, array.shape))


def _parse_member(field: str, entry: Dict, signature: FactorSignature) -> Tuple[str, Operator]:
    if not isinstance(entry, dict):
        raise ConfigError(field, "expected a mapping")
    label = entry.get('label')
    kinds = [k for k in ('basis_states', 'matrix', 'factor', 'ket') if k in entry]
    if len(kinds) != 1:
        raise ConfigError(field, "give exactly one of basis_states, matrix, factor (+states) or ket")
    try:
        if 'basis_states' in entry:
            member = basis_projector(signature.dim, entry['basis_states'], signature)
        elif 'matrix' in entry:
            member = Operator(parse_complex_array(field + '.matrix', entry['matrix'], 2), signature=signature)
        elif 'factor' in entry:
            member = factor_projector(signature, int(entry['factor']), entry.get('states', []))
        else:
            member = ket_projector(parse_complex_array(field + '.ket', entry['ket'], 1), signature)
    except ValidationError as err:
        raise ConfigError(field, str(err))
    return label, member


def parse_grid(document: Dict, evolution: Evolution, signature: FactorSignature) -> HistoryGrid:
    families = []
    for k, spec in enumerate(document['families']):
        field = 'grid.families[{}]'.format(k)
        if not isinstance(spec, dict) or 'time' not in spec or not spec.get('members'):
            raise ConfigError(field, "expected a mapping with 'time' and a non-empty 'members' list")
        picture = spec.get('picture', 'schrodinger')
        if picture not in PICTURES:
            raise ConfigError(field + '.picture', "expected one of {}".format(list(PICTURES)))
        parsed = [_parse_member('{}.members[{}]'.format(field, i), m, signature) for i, m in enumerate(spec['members'])]
        labels = [label if label is not None else str(i) for i, (label, _) in enumerate(parsed)]
        members = [member for _, member in parsed]
        name = spec.get('name', 'f{}'.format(k))
        time = float(spec['time'])
        if picture == 'schrodinger':
            families.append(evolve_family(members, evolution, time, labels, name))
        else:
            families.append(validate_family(members, time, labels, name))
    return HistoryGrid(families, evolution)


def parse_explicit_model(document: Dict) -> Tuple[Evolution, StateVector, FactorSignature, Dict]:
    h = parse_complex_array('model.hamiltonian', document['hamiltonian'], 2)
    state = parse_complex_array('model.state', document['state'], 1)
    if h.shape[0] != h.shape[1] or h.shape[0] != state.size:
        raise ConfigError('model', "hamiltonian shape {} and state length {} do not match".format(
            h.shape, state.size))
    factors = document.get('factors') or [state.size]
    try:
        signature = FactorSignature(factors)
        signature.check(state.size)
    except ValidationError as err:
        raise ConfigError('model.factors', str(err))
    psi = StateVector(state, signature=signature)
    if abs(psi.norm() - 1.0) > STRUCTURAL_TOL:
        raise ConfigError('model.state', "state must be normalized, norm is {!r}".format(psi.norm()))
    evolution = Evolution(hermitian(h, signature))
    return evolution, psi, signature, dict(document.get('labels') or {})


# -------------------------------------------------------------------------
# RESULTS

class SimulationResult:
    def __init__(self, model: ModelSpec, grid: HistoryGrid, report: DecoherenceReport):
        self.model = model
        self.grid = grid
        self.report = report


class InferenceResult:
    def __init__(self, kind: str, model: ModelSpec, grid: HistoryGrid, conditions: inference.ConditionChain,
                 targets: inference.ConditionChain, report: DecoherenceReport, probability: Optional[float]):
        self.kind = kind
        self.model = model
        self.grid = grid
        self.conditions = conditions
        self.targets = targets
        self.report = report
        self.probability = probability

    @property
    def refused(self) -> bool:
        return not self.report.certified


class ScanResult:
    def __init__(self, model: ModelSpec, grid: HistoryGrid, constraints: realms.ScanConstraints,
                 ranked: List[Tuple[realms.GrainingCandidate, realms.RealmScore]]):
        self.model = model
        self.grid = grid
        self.constraints = constraints
        self.ranked = ranked


# -------------------------------------------------------------------------
# CLIENT

class HistoriesClient:
    """resolves a RunConfig into engine calls"""

    def __init__(self, run: RunConfig):
        self.run = run
        self._model: Optional[ModelSpec] = None

    def model(self) -> ModelSpec:
        if self._model is None:
            self._model = self._build_model()
        return self._model

    def _build_model(self) -> ModelSpec:
        spec = self.run.model
        if 'name' in spec:
            params = dict(spec.get('params') or {})
            if spec['name'] == 'random' and self.run.seed is not None:
                params['seed'] = self.run.seed
            debug_print("building model {}".format(spec['name']))
            debug_pprint(params)
            model = models.build_model(spec['name'], params)
            if isinstance(self.run.grid, dict):
                model.suggested_grids[CONFIG_GRID] = parse_grid(self.run.grid, model.evolution, model.signature)
            return model

        evolution, psi, signature, labels = parse_explicit_model(spec)
        grid = parse_grid(self.run.grid, evolution, signature)
        return ModelSpec('explicit', evolution, psi, signature, labels, {CONFIG_GRID: grid})

    def grid_name(self) -> str:
        if isinstance(self.run.grid, dict):
            return CONFIG_GRID
        return self.run.grid or self.model().default_grid

    def grid(self) -> HistoryGrid:
        return self.model().grid(self.grid_name())

    # -- operations

    def simulate(self) -> SimulationResult:
        model, grid = self.model(), self.grid()
        report = decoherence_functional(grid, model.psi0, self.run.epsilon, self.run.mode, self.run.max_histories,
                                        self.run.n_jobs)
        return SimulationResult(model, grid, report)

    def check_decoherence(self) -> SimulationResult:
        return self.simulate()

    def _conditions(self, entries: Sequence[Dict]) -> inference.ConditionChain:
        grid = self.grid()
        chain = inference.ConditionChain([inference.Condition(e['family'], e['alternative'], e.get('time'))
                                          for e in entries])
        return chain.resolved(grid)

    def _joint_report(self, chain: Sequence[inference.Condition]) -> DecoherenceReport:
        grid = self.grid()
        subgrid = grid.subgrid([c.family for c in chain])
        return decoherence_functional(subgrid, self.model().psi0, self.run.epsilon, self.run.mode,
                                      self.run.max_histories, self.run.n_jobs)

    def predict(self) -> InferenceResult:
        model, grid = self.model(), self.grid()
        conditions = self._conditions(self.run.conditions)
        targets = self._conditions(self.run.target)
        if len(targets) != 1:
            raise ConfigError('target', "predict asks about exactly one future alternative")
        report = self._joint_report(list(conditions) + list(targets))
        probability = None
        if report.certified:
            probability = inference.predict(grid, model.psi0, conditions, targets.entries[0], self.run.epsilon,
                                            self.run.mode, require_certified=False,
                                            max_histories=self.run.max_histories)
        return InferenceResult('predict', model, grid, conditions, targets, report, probability)

    def retrodict(self) -> InferenceResult:
        model, grid = self.model(), self.grid()
        present = self._conditions(self.run.conditions)
        past = self._conditions(self.run.target)
        report = self._joint_report(list(past) + list(present))
        probability = None
        if report.certified:
            probability = inference.retrodict(grid, model.psi0, present.entries[0], past, self.run.epsilon,
                                              self.run.mode, require_certified=False,
                                              max_histories=self.run.max_histories)
        return InferenceResult('retrodict', model, grid, present, past, report, probability)

    def scan_realms(self) -> ScanResult:
        model = self.model()
        scan = self.run.scan
        grid_name = scan.get('grid') or self.grid_name()
        constraints = realms.ScanConstraints(
            grid=grid_name, max_classes=scan.get('max_classes'), tied=scan.get('tied', False),
            fixed=scan.get('fixed'), epsilon=self.run.epsilon, order=scan.get('order', realms.DEFAULT_ORDER),
            mode=self.run.mode, max_histories=self.run.max_histories,
            max_candidates=scan.get('max_candidates', 4096), n_jobs=self.run.n_jobs,
            candidates=scan.get('candidates'))
        ranked = realms.scan(model, constraints)
        return ScanResult(model, model.grid(grid_name), constraints, ranked)


def describe_run(run: RunConfig) -> Dict:
    fields = {'operation': run.operation, 'epsilon': run.epsilon, 'mode': run.mode,
              'max_histories': run.max_histories, 'n_jobs': run.n_jobs,
              'model': run.model.get('name', 'explicit')}
    if run.seed is not None:
        fields['seed'] = run.seed
    log_event('run', **fields)
    return fields
