import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from projection.critical_level import rho_from_eta
from projection.data_manager import (DataManager, eam_options, inference_settings,
                                     records_to_frame)
from projection.entry_game import get_dgp, moments, simulate
from projection.exceptions import ConfigurationError

TEMPLATES = Path(__file__).resolve().parents[1] / 'global' / 'templates'


@pytest.fixture
def manager():
    return DataManager()


def test_data_round_trip_keeps_integer_columns(manager, tmp_path, set1_spec):
    data = simulate(set1_spec, n=50, seed=2)
    path = manager.save_data(data, tmp_path / 'nested' / 'sample.csv')
    text = Path(path).read_text().splitlines()
    assert text[0] == 'y1,y2,z'
    assert '.' not in text[1]
    np.testing.assert_array_equal(manager.load_data(path, columns=['y1', 'y2', 'z']), data)


def test_load_data_errors(manager, tmp_path):
    with pytest.raises(ConfigurationError) as err:
        manager.load_data(tmp_path / 'absent.csv')
    assert err.value.field == 'data'
    path = tmp_path / 'short.csv'
    pd.DataFrame({'y1': [0, 1]}).to_csv(path, index=False)
    with pytest.raises(ConfigurationError):
        manager.load_data(path, columns=['y1', 'y2', 'z'])


def test_model_template_loads(manager):
    model = manager.load_model(TEMPLATES / 'model_template.yaml')
    assert model.d == 1
    assert (model.J1, model.J2) == (1, 0)


def test_linear_and_entry_game_definitions(manager):
    linear = manager.load_model({'family': 'linear', 'theta_box': [[0.0, 1.0], [0.0, 2.0]],
                                 'params': {'Z': [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 'J2': 1}})
    assert (linear.d, linear.J1, linear.J2) == (2, 2, 1)
    game = manager.load_model({'family': 'entry_game', 'params': {'dgp': 'set1'}})
    assert game.d == moments(get_dgp('set1')).d
    with pytest.raises(ConfigurationError):
        manager.load_model({'family': 'probit'})


def test_declared_shape_must_match_the_model(manager):
    definition = {'family': 'linear', 'theta_box': [[0.0, 1.0], [0.0, 2.0]],
                  'params': {'Z': [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 'J2': 1},
                  'd': 2, 'J1': 2, 'J2': 1}
    assert manager.load_model(definition).J == 4
    for key, wrong in (('d', 3), ('J1', 3), ('J2', 0)):
        with pytest.raises(ConfigurationError) as err:
            manager.load_model({**definition, key: wrong})
        assert err.value.field == key

    game = {'family': 'entry_game', 'params': {'dgp': 'set1'}}
    expected = moments(get_dgp('set1')).pairing
    pairs = [list(pair) for pair in expected]
    assert manager.load_model({**game, 'pairing': pairs}).pairing == expected
    with pytest.raises(ConfigurationError) as err:
        manager.load_model({**game, 'pairing': pairs[:1]})
    assert err.value.field == 'pairing'


def test_render_report_formats_missing_values(manager):
    context = {
        'config': {'dgp': 'set1', 'n': 100, 'mc_reps': 2, 'seed': 0, 'eta': None,
                   'inference': {'B': 20, 'bootstrap': 'multiplier', 'gms': 'phi1_hard',
                                 'kappa_rule': 'sqrt_ln_n', 'rho': math.inf}},
        'bounds': {'delta1': (0.3872, 0.4239)},
        'rows': [{'component': 'delta1', 'alpha': 0.05, 'method': 'calibrated',
                  'median_lower': None, 'median_upper': 0.5, 'coverage_lower': 0.5,
                  'coverage_upper': 1.0, 'coverage_lower_se': 0.35, 'coverage_upper_se': 0.0,
                  'empty_share': 0.5, 'failures': 0, 'avg_time_s': 1.25}],
    }
    text = manager.render_report(context)
    assert '| delta1 | 0.3872 | 0.4239 |' in text
    assert '[-, 0.5000]' in text
    assert 'rho: -' in text


def test_save_results_accepts_dicts(manager, tmp_path):
    path = manager.save_results([{'a': 1.0, 'b': 'x'}, {'a': 2.5, 'b': 'y'}], tmp_path / 'r.csv')
    frame = pd.read_csv(path)
    assert list(frame.columns) == ['a', 'b']
    assert frame['a'].tolist() == [1.0, 2.5]


def test_records_are_ordered_by_replication():
    frame = records_to_frame([
        {'rep': 1, 'component': 'delta1', 'alpha': 0.05, 'method': 'calibrated'},
        {'rep': 0, 'component': 'delta2', 'alpha': 0.05, 'method': 'calibrated'},
        {'rep': 0, 'component': 'delta1', 'alpha': 0.05, 'method': 'calibrated'},
    ])
    assert frame['rep'].tolist() == [0, 0, 1]
    assert frame['component'].tolist() == ['delta1', 'delta2', 'delta1']
    assert records_to_frame([]).empty


def test_inference_settings_derive_rho_from_eta():
    model = moments(get_dgp('set1'))
    settings = inference_settings({'eta': 0.01, 'B': 50}, model)
    assert settings.rho == pytest.approx(rho_from_eta(0.01, model.J1 + model.J2, model.d))
    assert inference_settings({'rho': 2.0, 'eta': 0.01}).rho == 2.0
    assert math.isinf(inference_settings({}).rho)
    with pytest.raises(ConfigurationError):
        inference_settings({'eta': 0.01})


def test_eam_options_from_sections():
    options = eam_options({'k': 15, 'max_iter': 5}, {'kernel': 'matern', 'nu': 1.5}, n_jobs=2)
    assert options.k == 15
    assert options.max_iter == 5
    assert options.kernel == 'matern'
    assert options.nu == 1.5
    assert options.n_jobs == 2
