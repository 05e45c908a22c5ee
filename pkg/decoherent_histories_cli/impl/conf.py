import os
from typing import Dict, List, Mapping, Optional, Sequence
import argparse
import yaml

from .errors import ConfigError
from .engine.histories import HEISENBERG, MODES
from .engine.tolerances import DEFAULT_EPSILON, DEFAULT_MAX_HISTORIES


SCHEMA = 'decoherent-histories/1'
OPERATIONS = ['simulate', 'check-decoherence', 'predict', 'retrodict', 'scan-realms']
COMMANDS = OPERATIONS + ['models']
ENV_PREFIX = 'DH_'


# -------------------------------------------------------------------------
# UTILS: DICT

def exists(cfg: Mapping, key: str) -> bool:
    return key in cfg and cfg[key] is not None


def _typed(field: str, value, kind):
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            lowered = str(value).strip().lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off', ''):
                return False
            raise ValueError(value)
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(field, "expected {}, got {!r}".format(kind.__name__, value))


def load_document(path: Optional[str]) -> Dict:
    """read a run document; JSON documents are valid YAML"""
    if not path:
        raise ConfigError('--config', "a run document is required (--config PATH or {}CONFIG)".format(ENV_PREFIX))
    try:
        with open(path, "r", encoding="utf8") as cfg_raw:
            document = yaml.safe_load(cfg_raw)
    except IOError as err:
        raise ConfigError('--config', "cannot read {}: {}".format(path, err))
    except yaml.YAMLError as err:
        raise ConfigError('--config', "{} is not valid JSON/YAML: {}".format(path, err))
    if not isinstance(document, dict):
        raise ConfigError('(document)', "the run document must be a mapping")
    return document


# -------------------------------------------------------------------------
# CONF OBJECT

class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError('argv', message)


class Config:
    ATTRIBUTES = ['command', 'models_action', 'config_path', 'epsilon', 'max_histories', 'mode',
                  'out_dir', 'seed', 'n_jobs', 'debug']

    def __init__(self):
        self.command: str = None
        self.models_action: str = None
        self.config_path: str = None

        self.epsilon: float = None
        self.max_histories: int = None
        self.mode: str = None
        self.out_dir: str = None
        self.seed: int = None
        self.n_jobs: int = None

        self.debug: bool = False

    @staticmethod
    def merged(confs):
        """later confs win over earlier ones, defaults never override"""
        default_conf = Config()
        conf = Config()
        for c in confs:
            for a in Config.ATTRIBUTES:
                v = getattr(c, a)
                if getattr(default_conf, a) != v:
                    setattr(conf, a, v)
        return conf

    # -- cli

    @staticmethod
    def loaded_from_cli_args(argv: Optional[Sequence[str]] = None):
        conf = Config()
        conf.load_from_cli_args(argv)
        return conf

    def load_from_cli_args(self, argv: Optional[Sequence[str]] = None):
        parsed = Config.parse_cli_args(argv)
        self.command = parsed.command
        self.models_action = parsed.action
        self.config_path = parsed.config
        self.epsilon = parsed.epsilon
        self.max_histories = parsed.max_histories
        self.mode = parsed.mode
        self.out_dir = parsed.out
        self.seed = parsed.seed
        self.n_jobs = parsed.n_jobs
        if parsed.debug:
            self.debug = True

    @staticmethod
    def parse_cli_args(argv: Optional[Sequence[str]] = None):
        parser = ArgumentParser(prog='decoherent-histories-cli',
                                description='decoherent-histories-cli computes decoherence functionals, '
                                            'history probabilities and realm scans for finite quantum models')
        parser.add_argument("command", choices=COMMANDS,
                            help="operation to run ('models list' shows the model zoo)")
        parser.add_argument("action", nargs='?', default=None,
                            help="for 'models': list")

        parser.add_argument("--config", type=str, required=False,
                            help="run document (JSON or YAML)")
        parser.add_argument("--epsilon", type=float, required=False,
                            help="decoherence threshold on max |D_ab|")
        parser.add_argument("--max-histories", type=int, required=False,
                            help="refuse grids with more histories than this")
        parser.add_argument("--mode", type=str, choices=list(MODES), required=False,
                            help="chain evaluation picture")
        parser.add_argument("--out", type=str, required=False,
                            help="output directory for reports and tables")
        parser.add_argument("--seed", type=int, required=False,
                            help="seed for randomized models")
        parser.add_argument("--n-jobs", type=int, required=False,
                            help="worker threads for branch chains and scans")

        parser.add_argument("--debug", action='store_const', const=True,
                            help="enable debug")

        parsed = parser.parse_args(argv)

        if parsed.command == 'models' and parsed.action != 'list':
            parser.error("the models command takes one action: list")
        if parsed.command != 'models' and parsed.action is not None:
            parser.error("unexpected argument {!r}".format(parsed.action))

        return parsed

    # -- environment

    @staticmethod
    def loaded_from_env(environ: Optional[Mapping[str, str]] = None):
        conf = Config()
        conf.load_from_env(os.environ if environ is None else environ)
        return conf

    def load_from_env(self, environ: Mapping[str, str]):
        for attribute, key, kind in [('config_path', 'CONFIG', str), ('epsilon', 'EPSILON', float),
                                     ('max_histories', 'MAX_HISTORIES', int), ('mode', 'MODE', str),
                                     ('out_dir', 'OUT', str), ('seed', 'SEED', int), ('n_jobs', 'N_JOBS', int),
                                     ('debug', 'DEBUG', bool)]:
            name = ENV_PREFIX + key
            if name in environ:
                setattr(self, attribute, _typed(name, environ[name], kind))

    # -- run document

    @staticmethod
    def loaded_from_document(document: Mapping):
        conf = Config()
        conf.load_from_document(document)
        return conf

    def load_from_document(self, document: Mapping):
        if exists(document, "operation"):
            self.command = document["operation"]
        if exists(document, "epsilon"):
            self.epsilon = _typed('epsilon', document["epsilon"], float)
        if exists(document, "max_histories"):
            self.max_histories = _typed('max_histories', document["max_histories"], int)
        if exists(document, "mode"):
            self.mode = document["mode"]
        if exists(document, "n_jobs"):
            self.n_jobs = _typed('n_jobs', document["n_jobs"], int)
        if exists(document, "seed"):
            self.seed = _typed('seed', document["seed"], int)
        output = document.get("output") or {}
        if not isinstance(output, dict):
            raise ConfigError('output', "expected a mapping with a 'dir' entry")
        if exists(output, "dir"):
            self.out_dir = str(output["dir"])


# -------------------------------------------------------------------------
# RUN CONFIG

DOCUMENT_FIELDS = ['schema', 'operation', 'model', 'grid', 'epsilon', 'mode', 'max_histories', 'n_jobs', 'seed',
                   'conditions', 'target', 'scan', 'output']
SCAN_FIELDS = ['grid', 'max_classes', 'tied', 'fixed', 'order', 'candidates', 'max_candidates']


def _check_condition(field: str, entry) -> Dict:
    if not isinstance(entry, dict) or not exists(entry, 'family') or not exists(entry, 'alternative'):
        raise ConfigError(field, "expected a mapping with 'family' and 'alternative'")
    unknown = sorted(set(entry) - {'family', 'alternative', 'time'})
    if unknown:
        raise ConfigError(field, "unknown entries {}".format(unknown))
    return dict(entry)


def _as_condition_list(field: str, value) -> List[Dict]:
    if value is None:
        return []
    if isinstance(value, dict):
        value = [value]
    if not isinstance(value, list):
        raise ConfigError(field, "expected a list of conditions")
    return [_check_condition('{}[{}]'.format(field, i), entry) for i, entry in enumerate(value)]


class RunConfig:
    """the validated run document, with command line and environment overrides applied"""

    def __init__(self):
        self.schema: str = SCHEMA
        self.operation: str = None
        self.model: Dict = None
        self.grid = None
        self.epsilon: float = DEFAULT_EPSILON
        self.mode: str = HEISENBERG
        self.max_histories: int = DEFAULT_MAX_HISTORIES
        self.n_jobs: int = 1
        self.seed: int = None
        self.conditions: List[Dict] = []
        self.target: List[Dict] = []
        self.scan: Dict = {}
        self.out_dir: str = 'out'
        self.config_path: str = None

    @staticmethod
    def from_document(document: Mapping, conf: Config) -> 'RunConfig':
        run = RunConfig()
        run.load_document(document)
        run.apply(conf)
        run.validate()
        return run

    def load_document(self, document: Mapping):
        unknown = sorted(set(document) - set(DOCUMENT_FIELDS))
        if unknown:
            raise ConfigError(unknown[0], "unknown field; allowed fields are {}".format(DOCUMENT_FIELDS))
        if document.get('schema') != SCHEMA:
            raise ConfigError('schema', "expected {!r}, got {!r}".format(SCHEMA, document.get('schema')))

        model = document.get('model')
        if not isinstance(model, dict):
            raise ConfigError('model', "expected a mapping with 'name' or 'hamiltonian' and 'state'")
        if exists(model, 'name'):
            unknown = sorted(set(model) - {'name', 'params'})
            if unknown:
                raise ConfigError('model', "unknown entries {} for a named model".format(unknown))
            if model.get('params') is not None and not isinstance(model['params'], dict):
                raise ConfigError('model.params', "expected a mapping")
        elif not (exists(model, 'hamiltonian') and exists(model, 'state')):
            raise ConfigError('model', "give either 'name' or both 'hamiltonian' and 'state'")
        self.model = dict(model)

        grid = document.get('grid')
        if grid is not None and not isinstance(grid, (str, dict)):
            raise ConfigError('grid', "expected a grid name or a mapping with 'families'")
        if isinstance(grid, dict):
            families = grid.get('families')
            if not isinstance(families, list) or not families:
                raise ConfigError('grid.families', "a grid needs at least one family")
        if grid is None and not exists(model, 'name'):
            raise ConfigError('grid', "an explicit model needs an explicit grid")
        self.grid = grid

        self.conditions = _as_condition_list('conditions', document.get('conditions'))
        self.target = _as_condition_list('target', document.get('target'))

        scan = document.get('scan') or {}
        if not isinstance(scan, dict):
            raise ConfigError('scan', "expected a mapping")
        unknown = sorted(set(scan) - set(SCAN_FIELDS))
        if unknown:
            raise ConfigError('scan.' + unknown[0], "unknown field; allowed fields are {}".format(SCAN_FIELDS))
        self.scan = dict(scan)

    def apply(self, conf: Config):
        for attribute in ['operation', 'epsilon', 'mode', 'max_histories', 'n_jobs', 'seed', 'out_dir',
                          'config_path']:
            value = getattr(conf, 'command' if attribute == 'operation' else attribute)
            if value is not None:
                setattr(self, attribute, value)

    def validate(self):
        if self.operation not in OPERATIONS:
            raise ConfigError('operation', "expected one of {}, got {!r}".format(OPERATIONS, self.operation))
        if not self.epsilon > 0:
            raise ConfigError('epsilon', "must be positive, got {!r}".format(self.epsilon))
        if self.mode not in MODES:
            raise ConfigError('mode', "expected one of {}, got {!r}".format(list(MODES), self.mode))
        if self.max_histories < 1:
            raise ConfigError('max_histories', "must be at least 1, got {!r}".format(self.max_histories))
        if self.n_jobs == 0:
            raise ConfigError('n_jobs', "must be non-zero (negative counts back from the cpu count)")
        if self.operation in ('predict', 'retrodict') and not self.target:
            raise ConfigError('target', "required for {}".format(self.operation))
        if self.operation == 'retrodict' and len(self.conditions) != 1:
            raise ConfigError('conditions', "retrodict conditions on exactly one present alternative")
