import numpy as np
import pytest

from projection.entry_game import (DGPS, N_SUPPORT, EntryGameMoments, EntryGameSpec,
                                   analytic_gradients, get_dgp, identified_bounds, moments,
                                   outcome_probabilities, population_moments,
                                   region_probabilities, simulate)
from projection.exceptions import ConfigurationError


def finite_difference(fn, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    columns = []
    for k in range(len(theta)):
        step = np.zeros_like(theta)
        step[k] = h
        columns.append((fn(theta + step) - fn(theta - step)) / (2.0 * h))
    return np.column_stack(columns)


@pytest.mark.parametrize('name', sorted(DGPS))
def test_outcome_probabilities_are_distributions(name):
    probs = outcome_probabilities(get_dgp(name))
    assert probs.shape == (N_SUPPORT, 4)
    assert np.all(probs >= -1e-12)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize('name', sorted(DGPS))
def test_true_parameter_satisfies_the_moments(name):
    spec = get_dgp(name)
    model = moments(spec)
    values = population_moments(spec, spec.theta_true)
    assert values.shape == (model.n_moments,)
    assert np.all(values[:model.J1] <= 1e-12)
    np.testing.assert_allclose(values[model.J1:], 0.0, atol=1e-12)


def test_paired_rows_sum_to_minus_multiplicity(set1_spec, set1_sample):
    theta = np.array([0.45, 0.55, 0.05, 0.15, 0.25])
    values = EntryGameMoments(set1_spec)(set1_sample, theta)
    multiple = region_probabilities(set1_spec, theta).multiple * set1_spec.p_z
    for j in range(N_SUPPORT):
        np.testing.assert_allclose(values[:, j] + values[:, j + N_SUPPORT], -multiple[j])
        assert -multiple[j] <= 0.0


@pytest.mark.parametrize('name, theta', [
    ('set1', [0.4, 0.6, 0.1, 0.2, 0.3]),
    ('set1', [0.55, 0.35, 0.12, 0.05, 0.3]),
    ('set2-dgp1', None),
    ('set2-dgp3', None),
    ('set2-dgp3', [0.45, 0.2, 0.55, 0.3, -1.1, -0.6, -0.9, -0.7, 0.3]),
])
def test_analytic_gradients_match_finite_differences(name, theta):
    spec = get_dgp(name)
    theta = spec.theta_true if theta is None else np.asarray(theta, dtype=float)
    numeric = finite_difference(lambda t: population_moments(spec, t), theta)
    np.testing.assert_allclose(analytic_gradients(spec, theta), numeric, rtol=1e-5, atol=1e-8)


def test_simulated_frequencies_match_the_model():
    spec = get_dgp('set2-dgp1')
    data = simulate(spec, n=400000, seed=3)
    expected = outcome_probabilities(spec)
    y1, y2, z = data[:, 0], data[:, 1], data[:, 2].astype(int)
    for k in range(N_SUPPORT):
        rows = z == k
        assert rows.mean() == pytest.approx(spec.p_z[k], abs=0.01)
        observed = [np.mean((y1[rows] == a) & (y2[rows] == b)) for a, b in ((0, 0), (0, 1),
                                                                              (1, 0), (1, 1))]
        np.testing.assert_allclose(observed, expected[k], atol=0.01)


def test_simulate_layout_and_determinism(set1_spec):
    first = simulate(set1_spec, n=300, seed=9)
    second = simulate(set1_spec, n=300, seed=9)
    np.testing.assert_array_equal(first, second)
    assert first.shape == (300, 3)
    assert set(np.unique(first[:, :2])) <= {0.0, 1.0}
    assert set(np.unique(first[:, 2])) <= set(range(N_SUPPORT))


def test_moment_model_layout():
    set1 = moments(get_dgp('set1'))
    assert (set1.d, set1.J1, set1.J2) == (5, 8, 4)
    assert set1.pairing == ((0, 4), (1, 5), (2, 6), (3, 7))
    dgp3 = moments(get_dgp('set2-dgp3'))
    assert (dgp3.d, dgp3.J1, dgp3.J2) == (9, 8, 8)


def test_set1_identified_bounds_for_delta1(set1_spec):
    lower, upper = identified_bounds(set1_spec, 'delta1')
    assert lower == pytest.approx(0.3872, abs=0.001)
    assert upper == pytest.approx(0.4239, abs=0.001)
    assert lower <= set1_spec.theta_true[0] <= upper


def test_stored_bounds_for_other_variants():
    dgp1 = get_dgp('set2-dgp1')
    assert identified_bounds(dgp1, 'zeta1_1') == (0.5, 0.5)
    with pytest.raises(ConfigurationError):
        identified_bounds(get_dgp('set2-dgp3'), 'Delta1_1')


def test_component_lookup():
    set1 = get_dgp('set1')
    assert set1.component_index('delta2') == 1
    assert set1.component_index(4) == 4
    assert get_dgp('set2-dgp3').component_index('r') == 8
    with pytest.raises(ConfigurationError):
        set1.component_index(5)
    with pytest.raises(ConfigurationError):
        set1.component_index('r')


def test_unknown_dgp():
    with pytest.raises(ConfigurationError) as err:
        get_dgp('set3')
    assert err.value.field == 'dgp'


def test_spec_validation():
    base = dict(name='custom', variant='set1', theta_true=[0.4, 0.6, 0.1, 0.2, 0.3],
                theta_box=[[0.0, 1.0]] * 5, mu=0.5)
    assert EntryGameSpec(**base).d == 5
    with pytest.raises(ConfigurationError):
        EntryGameSpec(**{**base, 'variant': 'set3'})
    with pytest.raises(ConfigurationError):
        EntryGameSpec(**{**base, 'mu': 1.5})
    with pytest.raises(ConfigurationError):
        EntryGameSpec(**{**base, 'p_z': [0.5, 0.5, 0.5, 0.5]})
    with pytest.raises(ConfigurationError):
        EntryGameSpec(**{**base, 'theta_true': [0.4, 0.6]})
