import json

import numpy as np
import pandas as pd
import pytest
import yaml

from projection.critical_level import as_projection_critical, bonferroni_bound
from projection.moment_model import GmsConfig, mean_model
import run_projection
from run_projection import ProjectionRunner, build_parser, main


def test_rho_action_prints_radius(capsys):
    assert main(['rho', '--eta', '0.01', '--J', '10', '--d', '3']) == 0
    assert float(capsys.readouterr().out) == pytest.approx(4.2, abs=0.05)


def test_rho_action_rejects_bad_dimensions(capsys):
    assert main(['rho', '--eta', '0.01', '--J', '2', '--d', '3']) == 2
    assert 'Error' in capsys.readouterr().err


def test_missing_config_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(['--config', str(tmp_path / 'missing.toml'), 'mc'])
    assert err.value.code == 2


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_invalid_config_names_the_field(tmp_path, capsys):
    config = tmp_path / 'bad.yaml'
    config.write_text(yaml.safe_dump({'inference': {'alpha': 0.9}}))
    code = main(['--config', str(config), 'simulate', '--dgp', 'set1',
                 '--out', str(tmp_path / 'x.csv')])
    assert code == 2
    assert 'inference.alpha' in capsys.readouterr().err
    assert not (tmp_path / 'x.csv').exists()


def test_simulate_writes_a_csv(tmp_path, capsys):
    out = tmp_path / 'sample.csv'
    assert main(['simulate', '--dgp', 'set2-dgp1', '--n', '250', '--seed', '4',
                 '--out', str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ['y1', 'y2', 'z']
    assert len(frame) == 250
    assert f"Output: {out}" in capsys.readouterr().out


def test_runner_merges_config_sections(tmp_path):
    config = tmp_path / 'run.yaml'
    config.write_text(yaml.safe_dump({'inference': {'B': 150}, 'eam': {'max_iter': 7}}))
    runner = ProjectionRunner(str(config), {'inference': {'alpha': 0.1, 'B': None}})
    assert runner.config['inference']['B'] == 150
    assert runner.config['inference']['alpha'] == 0.1
    assert runner.config['inference']['gms'] == 'phi1_hard'
    assert runner.config['eam']['max_iter'] == 7
    assert runner.validate()['valid']


def _mean_inputs(tmp_path, mean_data):
    data_file = tmp_path / 'mean.csv'
    pd.DataFrame(mean_data, columns=['x']).to_csv(data_file, index=False)
    model_file = tmp_path / 'mean.yaml'
    model_file.write_text(yaml.safe_dump({
        'name': 'mean', 'family': 'mean', 'theta_box': [[-1.0, 1.0]],
        'params': {'equality': True},
    }))
    return data_file, model_file


def test_chat_prints_the_critical_level(tmp_path, mean_data, capsys):
    data_file, model_file = _mean_inputs(tmp_path, mean_data)
    code = main(['chat', '--model', str(model_file), '--data', str(data_file),
                 '--theta', '0.2', '--B', '99'])
    assert code == 0
    record = yaml.safe_load(capsys.readouterr().out)
    assert record['value'] > 0.0
    assert isinstance(record['bracket_failed'], bool)


def test_ci_without_model_or_dgp_fails(tmp_path, mean_data, capsys):
    data_file, _ = _mean_inputs(tmp_path, mean_data)
    assert main(['ci', '--data', str(data_file)]) == 1
    assert 'required' in capsys.readouterr().err


@pytest.mark.slow
def test_ci_on_a_mean_matches_the_closed_form(tmp_path, mean_data, capsys):
    data_file, model_file = _mean_inputs(tmp_path, mean_data)
    output = tmp_path / 'ci.json'
    code = main(['ci', '--model', str(model_file), '--data', str(data_file),
                 '--B', '99', '--seed', '0', '--output', str(output)])
    assert code == 0
    assert 'calibrated interval' in capsys.readouterr().out

    record = json.loads(output.read_text())
    x = mean_data[:, 0]
    xbar, scale = x.mean(), x.std() / np.sqrt(len(x))
    gms = GmsConfig.from_rule('phi1_hard', 'sqrt_ln_n', len(x))
    quantile = as_projection_critical(mean_model(-1.0, 1.0, equality=True), mean_data,
                                      np.array([xbar]), 0.05, gms, 99, seed=0)
    # one dimension pins lambda to 0, so only the Bonferroni cap can bind
    c_hat = min(quantile, bonferroni_bound(0.05, 2))
    assert record['lower'] == pytest.approx(xbar - c_hat * scale, abs=0.01)
    assert record['upper'] == pytest.approx(xbar + c_hat * scale, abs=0.01)


def test_mc_accepts_level_and_rho_overrides(monkeypatch):
    captured = []

    def fake_run(config, manager=None, progress=True):
        captured.append(config)
        return []

    monkeypatch.setattr(run_projection, 'run_monte_carlo', fake_run)
    assert main(['mc', '--reps', '1', '--alpha', '0.1', '--eta', '0.01']) == 0
    assert main(['mc', '--reps', '1', '--rho', '2.5']) == 0

    by_eta, by_rho = captured
    assert by_eta.alphas == (0.1,)
    assert by_eta.inference.alpha == 0.1
    assert by_eta.eta == 0.01
    assert by_rho.inference.rho == 2.5
    assert by_rho.eta is None
    with pytest.raises(SystemExit):
        build_parser().parse_args(['mc', '--rho', '2.0', '--eta', '0.01'])
