"""
Plain-text run configuration.

A run config is an INI file with the sections of ``RunConfig.SCHEMA``. Every
command writes its fully resolved config as ``run.cfg`` next to its outputs;
passing that file back with ``--config`` repeats the run.
"""

# Standard Library
import configparser
import os
from copy import deepcopy

# This module
from .errors import ConfigError
from .fileformat import atomic_write
from .noise import PRESETS, NoiseConfig
from .optics import GridSpec


CONFIG_NAME = 'run.cfg'

NOISE_FIELDS = (
    'center_jitter_sigma',
    'waist_jitter_rel',
    'impurity_eps',
    'pol_crosstalk_rad',
    'intensity_noise_rel',
    'background_rel',
)


def parse_int_list(value) -> tuple:
    """Integers from text like ``5,10,25`` or from any iterable."""
    if isinstance(value, str):
        value = [part for part in value.split(',') if part.strip()]
    values = tuple(int(part) for part in value)
    if not values:
        raise ValueError('expected at least one integer')
    return values


def _parse_bool(text: str) -> bool:
    try:
        return configparser.ConfigParser.BOOLEAN_STATES[str(text).lower()]
    except KeyError:
        raise ValueError('not a boolean: {!r}'.format(text))


class RunConfig:
    """Typed view over the run sections, defaults filled in."""

    SCHEMA = {
        'run': {
            'task': (str, 'class15'),
            'seed': (int, 0),
            'jobs': (int, 1),
            'deterministic': (bool, False),
        },
        'grid': {
            'resolution': (int, 64),
            'half_extent': (float, 4.0),
            'waist': (float, 1.0),
        },
        'noise': dict(
            {'preset': (str, 'none')},
            **{name: (float, None) for name in NOISE_FIELDS}
        ),
        'dataset': {
            'per_class': (int, 400),
            'val_per_class': (int, 100),
            'count': (int, 10000),
            'val_count': (int, 2500),
            'per_class_limit': (int, None),
            'mix_fraction': (float, None),
        },
        'pca': {
            'n_components': (int, 40),
            'bins': (int, 30),
        },
        'svm': {
            'lam': (float, 1e-4),
            'epochs': (int, 50),
            'projection': (bool, True),
        },
        'cnn': {
            'epochs': (int, 30),
            'batch_size': (int, 32),
            'learning_rate': (float, 0.01),
            'momentum': (float, 0.9),
        },
        'train': {
            'model': (str, None),
            'ncomp_sweep': (parse_int_list, None),
        },
        'paths': {
            'train': (str, None),
            'val': (str, None),
            'mix_dataset': (str, None),
            'dataset': (str, None),
            'model': (str, None),
            'pca': (str, None),
            'alignment': (str, None),
            'calibration': (str, None),
        },
        'state': {
            'm1': (int, None),
            'm2': (int, None),
            'theta': (float, None),
            'phi': (float, None),
        },
    }

    TASKS = ('class15', 'sector26', 'regression')

    MODELS = ('svm', 'cnn')

    # (section, key) -> smallest allowed value
    MINIMUMS = {
        ('run', 'jobs'): 1,
        ('grid', 'resolution'): 8,
        ('dataset', 'per_class'): 1,
        ('dataset', 'val_per_class'): 1,
        ('dataset', 'count'): 1,
        ('dataset', 'val_count'): 1,
        ('dataset', 'per_class_limit'): 1,
        ('pca', 'n_components'): 1,
        ('pca', 'bins'): 1,
        ('svm', 'epochs'): 1,
        ('cnn', 'epochs'): 1,
        ('cnn', 'batch_size'): 1,
    }

    def __init__(self, values: dict = None):
        self.values = {
            section: {key: default for key, (_, default) in keys.items()}
            for section, keys in self.SCHEMA.items()
        }
        for section, keys in (values or {}).items():
            for key, value in keys.items():
                self.set(section, key, value)

    @classmethod
    def from_file(cls, path) -> 'RunConfig':
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding='utf-8') as fh:
                parser.read_file(fh)
        except OSError as error:
            raise ConfigError('Cannot read config {}: {}'.format(path, error))
        except configparser.Error as error:
            raise ConfigError('Malformed config {}: {}'.format(path, error))

        unknown = []
        for section in parser.sections():
            known = cls.SCHEMA.get(section)
            for key in parser[section]:
                if known is None or key not in known:
                    unknown.append('{}.{}'.format(section, key))
            if known is None and not parser[section]:
                unknown.append(section)
        if unknown:
            raise ConfigError(
                'Unknown config keys: {}'.format(', '.join(sorted(unknown)))
            )

        config = cls()
        for section in parser.sections():
            for key, text in parser[section].items():
                config.set(section, key, text)
        return config

    def set(self, section: str, key: str, value):
        """Store one value, converting text to the schema type."""
        try:
            type_, _ = self.SCHEMA[section][key]
        except KeyError:
            raise ConfigError('Unknown config key {}.{}'.format(section, key))

        if value is not None and value != '':
            try:
                value = _parse_bool(value) if type_ is bool else type_(value)
            except (TypeError, ValueError) as error:
                raise ConfigError(
                    'Bad value for {}.{}: {}'.format(section, key, error)
                )
        else:
            value = None
        self.values[section][key] = value

    def get(self, section: str, key: str):
        return self.values[section][key]

    def update(self, overrides: dict):
        """Apply ``{(section, key): value}`` pairs, skipping ``None``."""
        for (section, key), value in overrides.items():
            if value is not None:
                self.set(section, key, value)
        return self

    def validate(self) -> 'RunConfig':
        for (section, key), minimum in self.MINIMUMS.items():
            value = self.get(section, key)
            if value is not None and value < minimum:
                raise ConfigError(
                    '{}.{} must be >= {}, got {}'.format(
                        section, key, minimum, value
                    )
                )

        if self.get('run', 'task') not in self.TASKS:
            raise ConfigError(
                'Unknown task "{}"; known: {}'.format(
                    self.get('run', 'task'), ', '.join(self.TASKS)
                )
            )
        if self.get('noise', 'preset') not in PRESETS:
            raise ConfigError(
                'Unknown noise preset "{}"; known: {}'.format(
                    self.get('noise', 'preset'), ', '.join(sorted(PRESETS))
                )
            )
        fraction = self.get('dataset', 'mix_fraction')
        if fraction is not None and not 0 <= fraction <= 1:
            raise ConfigError('dataset.mix_fraction must lie in [0, 1]')

        model = self.get('train', 'model')
        if model is not None and model not in self.MODELS:
            raise ConfigError(
                'Unknown model "{}"; known: {}'.format(
                    model, ', '.join(self.MODELS)
                )
            )
        sweep = self.get('train', 'ncomp_sweep')
        if sweep is not None and min(sweep) < 1:
            raise ConfigError('train.ncomp_sweep values must be >= 1')
        return self

    def require(self, section: str, key: str):
        """A value the current command cannot run without."""
        value = self.get(section, key)
        if value is None:
            raise ConfigError(
                'Missing {}.{}: pass --{} or set it in the config'.format(
                    section, key, key.replace('_', '-')
                )
            )
        return value

    def absolute_paths(self) -> 'RunConfig':
        """Resolve every path against the working directory."""
        for key, value in self.values['paths'].items():
            if value is not None:
                self.values['paths'][key] = os.path.abspath(value)
        return self

    @property
    def seed(self) -> int:
        return self.get('run', 'seed')

    @property
    def jobs(self) -> int:
        if self.get('run', 'deterministic'):
            return 1
        return self.get('run', 'jobs')

    def grid(self) -> GridSpec:
        section = self.values['grid']
        return GridSpec(
            section['resolution'], section['half_extent'], section['waist']
        )

    def noise(self) -> NoiseConfig:
        """Preset values, overridden by explicit keys, seeded by the run."""
        section = self.values['noise']
        overrides = {
            name: section[name]
            for name in NOISE_FIELDS
            if section[name] is not None
        }
        return NoiseConfig.preset(section['preset'], self.seed, **overrides)

    def copy(self) -> 'RunConfig':
        return RunConfig(deepcopy(self.values))

    def to_ini(self) -> str:
        lines = []
        for section, keys in self.SCHEMA.items():
            lines.append('[{}]'.format(section))
            for key in keys:
                value = self.values[section][key]
                if value is None:
                    continue
                if isinstance(value, float):
                    value = repr(value)
                elif isinstance(value, tuple):
                    value = ','.join(str(item) for item in value)
                lines.append('{} = {}'.format(key, value))
            lines.append('')
        return '\n'.join(lines)

    def write(self, directory) -> str:
        path = os.path.join(os.fspath(directory), CONFIG_NAME)
        atomic_write(path, self.to_ini().encode('utf-8'))
        return path
