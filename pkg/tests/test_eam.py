import numpy as np
import pytest

from projection.critical_level import as_projection_critical
from projection.eam import (FEASIBILITY_TOL, EamOptions, EamProblem, EamState,
                            InferenceSettings, confidence_interval, expected_improvement,
                            initialize, interval_from_problem, run_direction)
from projection.exceptions import ConfigurationError
from projection.linprog import OPTIMAL, LinearSystem, maximize
from projection.moment_model import GmsConfig
from projection.surrogate import KrigingModel

FAST = dict(n_starts=5, n_candidates=400, max_iter=60)


def linear_problem(A, b, box, p, slope=None, offset=0.0):
    """g(theta) = A theta - b against c(theta) = offset + slope'theta."""
    A, b = np.asarray(A, dtype=float), np.asarray(b, dtype=float)
    slope = np.zeros(A.shape[1]) if slope is None else np.asarray(slope, dtype=float)

    def constraint_fn(theta):
        return A @ theta - b, A

    def critical_fn(theta, sign):
        return offset + float(slope @ theta)

    return EamProblem(box, constraint_fn, critical_fn, p=p)


def test_initialize_is_deterministic_and_in_box():
    box = np.array([[0.0, 1.0], [-2.0, 3.0]])
    first = initialize(box, 21, seed=4)
    second = initialize(box, 21, seed=4)
    np.testing.assert_array_equal(first, second)
    assert first.shape == (21, 2)
    assert np.all(first >= box[:, 0]) and np.all(first <= box[:, 1])


def test_initialize_needs_d_plus_one_points():
    with pytest.raises(ConfigurationError):
        initialize(np.array([[0.0, 1.0], [0.0, 1.0]]), 2, seed=0)


def test_options_are_validated():
    with pytest.raises(ConfigurationError):
        EamOptions(epsilon=1.0)
    with pytest.raises(ConfigurationError):
        EamOptions(conv_tol=0.0)
    with pytest.raises(ConfigurationError):
        EamOptions(min_stall=0)
    assert EamOptions().initial_points(3) == 31
    assert EamOptions(k=7).initial_points(3) == 7


def test_settings_are_validated():
    with pytest.raises(ConfigurationError):
        InferenceSettings(alpha=0.7)
    with pytest.raises(ConfigurationError):
        InferenceSettings(method='bonferroni')
    assert InferenceSettings().gms_config(100) == GmsConfig.from_rule('phi1_hard', 'sqrt_ln_n', 100)


def test_problem_needs_an_objective():
    with pytest.raises(ConfigurationError):
        EamProblem([[0.0, 1.0]], lambda t: (t, np.eye(1)), lambda t, s: 0.0)


def test_objective_floor_and_sign():
    problem = linear_problem(np.eye(2), np.ones(2), [[0.0, 1.0], [-1.0, 2.0]], p=[1.0, -1.0])
    assert problem.objective_floor() == pytest.approx(-2.0)
    flipped = problem.flipped()
    theta = np.array([0.5, 0.25])
    assert flipped.objective(theta) == pytest.approx(-problem.objective(theta))
    assert flipped.objective_floor() == pytest.approx(-2.0)


def test_flipped_problem_shares_the_constraint_cache():
    calls = []

    def constraint_fn(theta):
        calls.append(theta.copy())
        return np.array([theta[0] - 0.5]), np.eye(1)

    problem = EamProblem([[0.0, 1.0]], constraint_fn, lambda t, s: 0.0, p=[1.0])
    theta = np.array([0.3])
    problem.constraints(theta)
    problem.flipped().constraints(theta)
    assert len(calls) == 1


def test_one_dimensional_toy_reaches_the_constraint():
    problem = linear_problem([[1.0]], [0.5], [[0.0, 1.0]], p=[1.0])
    result = run_direction(problem, EamOptions(k=11, seed=2, **FAST))
    assert not result.empty
    assert result.endpoint <= 0.5 + FEASIBILITY_TOL
    assert result.endpoint == pytest.approx(0.5, abs=0.005)
    assert result.evaluations == 11 + result.iterations
    assert len(result.ei_trace) == result.iterations


def test_interval_covers_both_sides():
    problem = linear_problem([[1.0]], [0.5], [[0.0, 1.0]], p=[1.0])
    interval = interval_from_problem(problem, EamOptions(k=11, seed=2, **FAST))
    assert not interval.empty
    assert interval.lower == pytest.approx(0.0, abs=0.005)
    assert interval.upper == pytest.approx(0.5, abs=0.005)
    record = interval.to_dict()
    assert record['lower'] == interval.lower
    assert record['upper_run']['evaluations'] == interval.upper_run.evaluations


def test_empty_constraint_set_is_reported():
    problem = EamProblem([[0.0, 1.0]], lambda t: (np.ones(1), np.zeros((1, 1))),
                         lambda t, s: 0.0, p=[1.0])
    result = run_direction(problem, EamOptions(k=5, max_iter=3, n_starts=2, n_candidates=20))
    assert result.empty
    assert result.endpoint is None
    assert not result.converged
    interval = interval_from_problem(problem, EamOptions(k=5, max_iter=3, n_starts=2, n_candidates=20))
    assert interval.empty
    assert interval.lower is None and interval.upper is None


def _ei_state(incumbent):
    sites = np.linspace(0.0, 1.0, 5)[:, None]
    values = np.array([1.2, 0.4, 0.9, 1.6, 0.7])
    model = KrigingModel(sites, values, beta=np.array([0.05]))
    state = EamState(points=sites, cvals=values, gmax=values, objective=sites[:, 0],
                     incumbent=incumbent)
    return model, state


def test_expected_improvement_is_half_the_gain_on_the_boundary():
    theta = np.array([0.125])
    model, state = _ei_state(incumbent=theta[0] - 1.0)
    c_L, s2, _ = model.predict(theta)
    assert s2 > 0.0
    assert expected_improvement(theta, model, state, c_L, [1.0]) == pytest.approx(0.5)


def test_expected_improvement_vanishes_without_gain_or_in_the_tail():
    theta = np.array([0.125])
    model, state = _ei_state(incumbent=theta[0])
    c_L, s2, _ = model.predict(theta)
    assert expected_improvement(theta, model, state, c_L - 5.0, [1.0]) == 0.0
    model, state = _ei_state(incumbent=theta[0] - 1.0)
    far = c_L + 10.0 * np.sqrt(s2)
    assert expected_improvement(theta, model, state, far, [1.0]) <= 1e-15


def _random_linear_program(seed):
    """Nonempty polytope {A theta - b <= c} in [0, 1]^2 with a unit direction."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(3, 6))
    A = rng.normal(size=(m, 2))
    x0 = rng.uniform(0.2, 0.8, size=2)
    c = 0.5
    b = A @ x0 - c + rng.uniform(0.1, 0.6, size=m)
    p = rng.normal(size=2)
    return A, b, c, p / np.linalg.norm(p)


@pytest.mark.slow
def test_matches_the_linear_program_on_random_polytopes():
    box = np.array([[0.0, 1.0], [0.0, 1.0]])
    hits = 0
    for seed in range(20):
        A, b, c, p = _random_linear_program(seed)
        reference = maximize(p, LinearSystem(A, b + c, box))
        assert reference.status == OPTIMAL
        result = run_direction(linear_problem(A, b, box, p, offset=c),
                               EamOptions(seed=seed, n_starts=10, n_candidates=1000, max_iter=100))
        assert not result.empty
        assert result.endpoint <= reference.value + 1e-6
        hits += abs(result.endpoint - reference.value) <= 0.005
    assert hits >= 19


@pytest.mark.slow
def test_agrees_with_the_linear_program():
    A = np.array([[1.0, 1.0], [1.0, -0.5], [-0.3, 1.0]])
    b = np.array([1.2, 0.4, 0.5])
    slope = np.array([0.05, 0.0])
    box = np.array([[0.0, 1.0], [0.0, 1.0]])
    p = np.array([0.6, 0.8])
    problem = linear_problem(A, b, box, p, slope=slope, offset=0.1)
    result = run_direction(problem, EamOptions(seed=1, n_starts=10, n_candidates=1000, max_iter=100))

    # A theta - b <= 0.1 + slope'theta is linear in theta
    reference = maximize(p, LinearSystem(A - slope, b + 0.1, box))
    assert reference.status == OPTIMAL
    assert result.endpoint <= reference.value + 1e-8
    assert result.endpoint == pytest.approx(reference.value, abs=0.02)


def test_as_projection_interval_for_a_mean(mean_equality_model, mean_data):
    settings = InferenceSettings(method='as-proj', B=99, seed=0)
    interval = confidence_interval(mean_equality_model, mean_data, [1.0], settings,
                                   EamOptions(k=11, seed=3, **FAST))
    x = mean_data[:, 0]
    xbar, scale = x.mean(), x.std() / np.sqrt(len(x))
    gms = GmsConfig.from_rule('phi1_hard', 'sqrt_ln_n', len(x))
    c_hat = as_projection_critical(mean_equality_model, mean_data, np.array([xbar]), 0.05, gms,
                                   99, seed=0)
    assert c_hat > 0.0
    assert interval.method == 'as-proj'
    assert interval.lower == pytest.approx(xbar - c_hat * scale, abs=0.01)
    assert interval.upper == pytest.approx(xbar + c_hat * scale, abs=0.01)


@pytest.mark.slow
def test_calibrated_interval_lies_inside_the_projection_interval(linear_setup):
    model, data = linear_setup
    options = EamOptions(k=21, seed=3, **FAST)
    p = [1.0, 0.0]
    calibrated = confidence_interval(model, data, p, InferenceSettings(B=49, seed=5), options)
    projected = confidence_interval(model, data, p,
                                    InferenceSettings(B=49, seed=5, method='as-proj'), options)
    assert not calibrated.empty and not projected.empty
    assert calibrated.lower >= projected.lower - 0.005
    assert calibrated.upper <= projected.upper + 0.005
