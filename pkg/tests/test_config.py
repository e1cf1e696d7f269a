# Standard Library
import os

# Third Party
import pytest

# Project
from vvb_learn.config import CONFIG_NAME, RunConfig
from vvb_learn.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / 'custom.cfg'
    path.write_text(text)
    return path


def test_defaults():
    config = RunConfig()

    assert config.seed == 0
    assert config.jobs == 1
    assert config.get('pca', 'n_components') == 40
    assert config.get('dataset', 'mix_fraction') is None
    assert config.grid().resolution == 64
    assert config.noise().impurity_eps == 0.0
    assert config.validate() is config


def test_file_values_are_typed(tmp_path):
    path = _write(
        tmp_path,
        '[run]\nseed = 7\ndeterministic = yes\n'
        '[grid]\nresolution = 32\n'
        '[svm]\nlam = 1e-3\n',
    )
    config = RunConfig.from_file(path)

    assert config.seed == 7
    assert config.get('run', 'deterministic') is True
    assert config.get('grid', 'resolution') == 32
    assert config.get('svm', 'lam') == pytest.approx(1e-3)


@pytest.mark.parametrize(
    'text',
    [
        '[run]\ncolour = red\n',
        '[extras]\nanything = 1\n',
        '[extras]\n',
        '[run]\nseed = seven\n',
        '[run]\ndeterministic = maybe\n',
        '[train]\nncomp_sweep = 5,ten\n',
        'not an ini file\n',
    ],
)
def test_bad_files(tmp_path, text):
    with pytest.raises(ConfigError):
        RunConfig.from_file(_write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / 'absent.cfg')


def test_written_config_reads_back(tmp_path):
    config = RunConfig().update(
        {
            ('run', 'task'): 'sector26',
            ('noise', 'preset'): 'labproxy',
            ('noise', 'impurity_eps'): 0.25,
            ('cnn', 'learning_rate'): 0.003,
            ('dataset', 'mix_fraction'): None,
        }
    )
    path = config.write(tmp_path)

    assert path.endswith(CONFIG_NAME)
    again = RunConfig.from_file(path)
    assert again.values == config.values


def test_update_skips_none():
    config = RunConfig().update({('run', 'seed'): None, ('run', 'jobs'): 3})

    assert config.seed == 0
    assert config.jobs == 3
    with pytest.raises(ConfigError):
        config.update({('run', 'colour'): 'red'})


@pytest.mark.parametrize(
    'section, key, value',
    [
        ('grid', 'resolution', 4),
        ('run', 'jobs', 0),
        ('pca', 'n_components', 0),
        ('cnn', 'batch_size', 0),
        ('run', 'task', 'colour'),
        ('noise', 'preset', 'storm'),
        ('dataset', 'mix_fraction', 1.5),
        ('train', 'model', 'forest'),
        ('train', 'ncomp_sweep', '0,5'),
    ],
)
def test_validation(section, key, value):
    config = RunConfig({section: {key: value}})

    with pytest.raises(ConfigError):
        config.validate()


def test_deterministic_runs_single_threaded():
    config = RunConfig({'run': {'jobs': 4, 'deterministic': True}})
    assert config.jobs == 1


def test_noise_overrides_preset():
    config = RunConfig(
        {
            'run': {'seed': 9},
            'noise': {'preset': 'labproxy', 'background_rel': 0.0},
        }
    )
    noise = config.noise()

    assert noise.seed == 9
    assert noise.background_rel == 0.0
    assert noise.impurity_eps == 0.15


def test_copy_is_independent():
    config = RunConfig()
    clone = config.copy()
    clone.set('run', 'seed', 5)

    assert config.seed == 0
    assert clone.seed == 5


def test_inputs_round_trip(tmp_path):
    config = RunConfig(
        {
            'train': {'model': 'svm', 'ncomp_sweep': [5, 10, 25]},
            'paths': {'train': 'data/train.vvbd'},
            'state': {'m1': -1, 'm2': 1, 'phi': 0.3},
        }
    ).absolute_paths()

    assert config.get('train', 'ncomp_sweep') == (5, 10, 25)
    assert config.get('paths', 'train') == os.path.join(
        os.getcwd(), 'data', 'train.vvbd'
    )
    assert 'ncomp_sweep = 5,10,25' in config.to_ini()

    again = RunConfig.from_file(config.write(tmp_path))
    assert again.values == config.values


def test_require():
    config = RunConfig({'state': {'m1': 2}})

    assert config.require('state', 'm1') == 2
    with pytest.raises(ConfigError, match='--m2'):
        config.require('state', 'm2')
