"""Run configuration.

A run configuration is a JSON document whose nested keys flatten to the dotted
keys of `RunConfig.DEFAULTS`. Keys that are not in the schema are rejected.
"""
import json
import numbers

from ..exceptions import ConfigError
from ..stationary import Tolerances

SCENARIOS = ('eigen', 'stationary', 'pure_singular', 'semilinear', 'evolve_g', 'evolve_p', 'stabilize', 'study_gap',
             'study_seminorm', 'verify_all')

INITIAL_DATA = ('pure_singular', 'lower', 'upper')

# Keys holding a free-form mapping; their contents are checked by the catalog
MAPPING_KEYS = ('source.params', 'nonlinearity.params')


class RunConfig:
    """Run configuration schema class.
    Provides uniform access to the dotted configuration keys.
    """

    DEFAULTS = {
        'scenario': 'eigen',
        'domain.a': -1.0,
        'domain.b': 1.0,
        'n': 128,
        's': 0.25,
        'q': 0.5,
        'lambda': 1.0,
        'epsilon': 0.0,
        'T': 1.0,
        'n_steps': 20,
        't0': 0.0,
        'initial': 'pure_singular',
        'source.name': 'constant',
        'source.params': {},
        'nonlinearity.name': 'saturating',
        'nonlinearity.params': {},
        'stabilize.threshold': 1e-4,
        'stabilize.window': 10,
        'study.levels': 4,
        'study.base_steps': 8,
        'study.beta': None,
        'study.ns': [128, 256, 512, 1024],
        'study.epsilon': 1e-6,
        'verify.quick': False,
        'seed': 0,
        'output': 'fraclab-out',
        'progress': True,
        **{'tolerances.' + key: value
           for key, value in Tolerances()._asdict().items()}
    }

    @staticmethod
    def defaults():
        """Builder method that returns a `RunConfig` with every key at its default"""
        return RunConfig({})

    @staticmethod
    def from_file(path):
        """Builder method that reads a JSON configuration file"""
        try:
            with open(path) as fp:
                document = json.load(fp)
        except OSError as err:
            raise ConfigError('Cannot read config file {}: {}'.format(path, err))
        except json.JSONDecodeError as err:
            raise ConfigError('Config file {} is not valid JSON: {}'.format(path, err))
        if not isinstance(document, dict):
            raise ConfigError('Config file {} must hold a JSON object'.format(path))
        if 'manifest_version' in document:
            document = document.get('config', {})
        return RunConfig(document)

    def __init__(self, mapping):
        self._values = dict(RunConfig.DEFAULTS)
        self.update(mapping)

    def update(self, mapping):
        """Update the configuration with a (possibly nested) `mapping`"""
        for key, value in _flatten(mapping):
            self[key] = value
        return self

    def override(self, assignment):
        """Applies one `key=value` override; the value is parsed as JSON when possible"""
        key, sep, raw = assignment.partition('=')
        if not sep or not key:
            raise ConfigError('Override {!r} is not of the form key=value'.format(assignment))
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        self[key.strip()] = value
        return self

    def validate(self):
        """Checks cross-key requirements before any compute and returns `self`"""
        if self['scenario'] not in SCENARIOS:
            raise ConfigError('Unknown scenario {!r}, choose one of {}'.format(self['scenario'], list(SCENARIOS)))
        if self['initial'] not in INITIAL_DATA:
            raise ConfigError('Unknown initial datum {!r}, choose one of {}'.format(
                self['initial'], list(INITIAL_DATA)))
        if not self['domain.b'] > self['domain.a']:
            raise ConfigError('domain.b must exceed domain.a')
        for key in ('n', 'n_steps', 'study.levels', 'study.base_steps', 'stabilize.window'):
            if self[key] < 1:
                raise ConfigError('{} must be positive, got {}'.format(key, self[key]))
        if not all(isinstance(n, numbers.Integral) and n >= 3 for n in self['study.ns']):
            raise ConfigError('study.ns must list integers >= 3')
        if len(self['study.ns']) < 3:
            raise ConfigError('study.ns needs at least 3 grids, got {}'.format(len(self['study.ns'])))
        return self

    def tolerances(self):
        """Returns the `Tolerances` selected by the tolerances.* keys"""
        return Tolerances(**{key: self['tolerances.' + key] for key in Tolerances._fields})

    def to_dict(self):
        """Returns the configuration as a nested mapping (the JSON file layout)"""
        nested = {}
        for key, value in self:
            *parents, leaf = key.split('.')
            node = nested
            for parent in parents:
                node = node.setdefault(parent, {})
            node[leaf] = value
        return nested

    def __contains__(self, key):
        """Returns True if key is in the schema"""
        return key in self._values

    def __setitem__(self, key, value):
        if key not in RunConfig.DEFAULTS:
            raise ConfigError('Unknown config key {!r}'.format(key))
        self._values[key] = _coerce(key, value, RunConfig.DEFAULTS[key])

    def __getitem__(self, key):
        """Returns the value of the given `key`"""
        return self._values[key]

    def __iter__(self):
        return iter(sorted(self._values.items()))

    def __repr__(self):
        return "RunConfig(scenario={}, n={}, s={}, q={})".format(self['scenario'], self['n'], self['s'], self['q'])

    def __eq__(self, other):
        return self._values == other._values


def _flatten(mapping, prefix=''):
    if not isinstance(mapping, dict):
        raise ConfigError('Expected a mapping at {!r}'.format(prefix.rstrip('.') or '<root>'))
    for key, value in mapping.items():
        dotted = prefix + str(key)
        if isinstance(value, dict) and dotted not in MAPPING_KEYS:
            yield from _flatten(value, dotted + '.')
        else:
            yield dotted, value


def _coerce(key, value, default):
    """Casts `value` to the type of `default`, rejecting incompatible values"""
    def fail():
        raise ConfigError('Invalid value {!r} for {}'.format(value, key))

    if key in MAPPING_KEYS:
        if not isinstance(value, dict):
            fail()
        return dict(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            fail()
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, numbers.Real) or not float(value).is_integer():
            fail()
        return int(value)
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            fail()
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            fail()
        return list(value)
    if not isinstance(value, str):
        fail()
    return value
