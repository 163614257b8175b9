import json

import pytest

from fraclab.cli import RunConfig
from fraclab.exceptions import ConfigError
from fraclab.stationary import Tolerances


def test_defaults():
    """Test the default configuration"""
    config = RunConfig.defaults()
    assert config['scenario'] == 'eigen'
    assert config['n'] == 128
    assert config['source.params'] == {}
    assert config.tolerances() == Tolerances()
    assert 'tolerances.newton' in config
    assert 'tolerances.unknown' not in config


def test_nested_update():
    """Test nested mappings update dotted keys"""
    config = RunConfig({'domain': {'a': 0, 'b': 2}, 'nonlinearity': {'name': 'affine', 'params': {'mu': 0.2}}})
    assert config['domain.a'] == 0.0 and isinstance(config['domain.a'], float)
    assert config['domain.b'] == 2.0
    assert config['nonlinearity.params'] == {'mu': 0.2}


def test_unknown_key():
    """Test unknown keys are rejected"""
    with pytest.raises(ConfigError):
        RunConfig({'domain': {'c': 1.0}})
    with pytest.raises(ConfigError):
        RunConfig.defaults()['resolution'] = 3


@pytest.mark.parametrize('key, value', [('n', 'many'), ('n', 12.5), ('n', True), ('s', '0.3'), ('progress', 1),
                                        ('source.params', [1, 2]), ('study.ns', 4)])
def test_invalid_values(key, value):
    """Test values of the wrong type are rejected"""
    with pytest.raises(ConfigError):
        RunConfig({key: value})


def test_overrides():
    """Test key=value overrides parse JSON and fall back to strings"""
    config = RunConfig.defaults()
    config.override('n=64').override('source.name=bump').override('nonlinearity.params={"mu": 0.3}')
    config.override('study.beta=2.5').override('s=0.4')
    assert config['n'] == 64
    assert config['source.name'] == 'bump'
    assert config['nonlinearity.params'] == {'mu': 0.3}
    assert config['study.beta'] == 2.5
    assert config['s'] == 0.4
    with pytest.raises(ConfigError):
        config.override('n')


def test_validate():
    """Test cross-key validation"""
    with pytest.raises(ConfigError):
        RunConfig({'scenario': 'nope'}).validate()
    with pytest.raises(ConfigError):
        RunConfig({'domain': {'a': 1.0, 'b': 0.0}}).validate()
    with pytest.raises(ConfigError):
        RunConfig({'initial': 'middle'}).validate()
    with pytest.raises(ConfigError):
        RunConfig({'study': {'ns': [2, 16]}}).validate()
    with pytest.raises(ConfigError):
        RunConfig({'study': {'ns': [16, 32]}}).validate()
    assert RunConfig({'scenario': 'evolve_p'}).validate()['scenario'] == 'evolve_p'


def test_round_trip(tmp_path):
    """Test the nested layout reproduces the configuration"""
    config = RunConfig({'n': 64, 'source': {'name': 'bump', 'params': {'c': 2.0}}})
    assert RunConfig(config.to_dict()) == config
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(config.to_dict()))
    assert RunConfig.from_file(str(path)) == config


def test_manifest_as_config(tmp_path):
    """Test a run manifest is accepted as a configuration file"""
    config = RunConfig({'scenario': 'stationary', 'q': 2.0})
    path = tmp_path / 'manifest.json'
    path.write_text(json.dumps({'manifest_version': 1, 'config': config.to_dict(), 'passed': True}))
    assert RunConfig.from_file(str(path)) == config


def test_bad_files(tmp_path):
    """Test unreadable and malformed configuration files"""
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(tmp_path / 'missing.json'))
    path = tmp_path / 'broken.json'
    path.write_text('{"n": ')
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(path))
    path.write_text('[1, 2]')
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(path))
