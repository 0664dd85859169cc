from pathlib import Path

import pytest
import yaml

from projection.config_validator import ConfigValidator, flatten_errors

CONFIG_FILE = Path(__file__).resolve().parents[1] / 'scripts' / 'config.yaml'


@pytest.fixture
def validator():
    return ConfigValidator()


@pytest.fixture
def default_config():
    with open(CONFIG_FILE, 'r', encoding='utf-8') as f:
        return yaml.safe_load(f)


def test_bundled_config_is_valid(validator, default_config):
    result = validator.validate_config(default_config)
    assert result['valid'], result['errors']
    assert result['warnings'] == []
    assert 'inference' in result['info']['sections']


def test_out_of_range_alpha_names_the_field(validator, default_config):
    default_config['inference']['alpha'] = 0.9
    result = validator.validate_config(default_config)
    assert not result['valid']
    assert any(error.startswith('inference.alpha') for error in result['errors'])


def test_unknown_keys_are_rejected(validator, default_config):
    default_config['inference']['lambda'] = 1.0
    result = validator.validate_config(default_config)
    assert not result['valid']
    assert any('inference.lambda' in error for error in result['errors'])


@pytest.mark.parametrize('eta, valid', [(0.01, True), ('liberal', True), ('tight', False),
                                        (1.5, False)])
def test_eta_values(validator, default_config, eta, valid):
    default_config['inference']['eta'] = eta
    assert validator.validate_config(default_config)['valid'] is valid


def test_soft_problems_are_warnings(validator, default_config):
    default_config['inference'].update({'B': 50, 'rho': 2.0, 'eta': 0.01})
    default_config['eam']['epsilon'] = 0.0
    result = validator.validate_config(default_config)
    assert result['valid']
    assert len(result['warnings']) == 3


def test_non_mapping_config(validator):
    result = validator.validate_config(['inference'])
    assert not result['valid']


def test_flatten_errors():
    errors = {'inference': [{'alpha': ['max value is 0.5'], 'B': ['must be of integer type']}]}
    assert sorted(flatten_errors(errors)) == ['inference.B: must be of integer type',
                                              'inference.alpha: max value is 0.5']


def test_model_definitions(validator):
    assert validator.validate_model({'family': 'mean', 'theta_box': [[-1.0, 1.0]]})['valid']
    assert validator.validate_model({'family': 'entry_game', 'params': {'dgp': 'set1'}})['valid']
    assert not validator.validate_model({'family': 'entry_game', 'params': {'dgp': 'x'}})['valid']
    assert not validator.validate_model({'family': 'probit'})['valid']
    assert not validator.validate_model({'theta_box': [[0.0, 1.0]]})['valid']


def test_linear_model_definition(validator):
    good = {'family': 'linear', 'theta_box': [[0.0, 1.0], [0.0, 1.0]],
            'params': {'Z': [[1.0, 0.0], [0.0, 1.0]]}}
    assert validator.validate_model(good)['valid']
    assert not validator.validate_model({**good, 'theta_box': [[0.0, 1.0]]})['valid']
    assert not validator.validate_model({**good, 'theta_box': [[1.0, 0.0], [0.0, 1.0]]})['valid']
    assert not validator.validate_model({'family': 'linear', 'params': {'Z': [[1.0]]}})['valid']
    paired = validator.validate_model({**good, 'pairing': [[0, 1]]})
    assert not paired['valid']
    assert any(e.startswith('pairing') for e in paired['errors'])


def test_experiment_definition(validator):
    result = validator.validate_experiment({'dgp': 'set1', 'mc_reps': 10})
    assert result['valid']
    assert result['warnings']
    assert not validator.validate_experiment({'dgp': 'set9'})['valid']


def test_experiment_template_is_valid_once_filled(validator):
    path = Path(__file__).resolve().parents[1] / 'global' / 'templates' / 'experiment_template.yaml'
    text = path.read_text(encoding='utf-8')
    text = text.replace('{{DGP}}', 'set1').replace('{{COMPONENT}}', 'delta1')
    result = validator.validate_config(yaml.safe_load(text))
    assert result['valid'], result['errors']
