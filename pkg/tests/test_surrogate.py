import logging

import numpy as np
import pytest

from projection.exceptions import ConfigurationError
from projection.surrogate import (NUGGET_START, KrigingModel, correlation_gradient,
                                  correlation_matrix, default_beta_bounds, fit, kernel_eval,
                                  matern_correlation, merge_duplicates)

SITES = np.linspace(0.0, 1.0, 5)[:, None]
VALUES = np.array([1.2, 0.4, 0.9, 1.6, 0.7])


@pytest.mark.parametrize('nu', [0.5, 1.5, 2.5])
def test_matern_closed_forms_match_bessel(nu):
    h = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(matern_correlation(h, nu),
                               matern_correlation(h, nu, closed_form=False), atol=1e-10)


def test_kernel_eval():
    assert kernel_eval('gaussian', [0.25], [0.5], [0.0]) == pytest.approx(np.exp(-1.0))
    assert kernel_eval('matern', [1.0], [0.3], [0.3]) == 1.0
    with pytest.raises(ConfigurationError):
        kernel_eval('cubic', [1.0], [0.0], [1.0])


@pytest.mark.parametrize('kernel, nu', [('gaussian', 2.5), ('matern', 1.5), ('matern', 2.5)])
def test_correlation_gradient_matches_finite_differences(kernel, nu):
    beta = np.array([0.3, 0.8])
    X = np.random.default_rng(0).uniform(size=(6, 2))
    x = np.array([0.41, 0.57])
    analytic = correlation_gradient(kernel, beta, x, X, nu)
    h = 1e-6
    for k in range(2):
        step = np.zeros(2)
        step[k] = h
        fd = (correlation_matrix(kernel, beta, x + step, X, nu)[0]
              - correlation_matrix(kernel, beta, x - step, X, nu)[0]) / (2.0 * h)
        np.testing.assert_allclose(analytic[:, k], fd, rtol=1e-5, atol=1e-9)


def test_model_interpolates_its_sites():
    model = KrigingModel(SITES, VALUES, beta=np.array([0.05]))
    for site, value in zip(SITES, VALUES):
        c_L, s2, _ = model.predict(site)
        assert c_L == pytest.approx(value, abs=1e-6)
        assert s2 == pytest.approx(0.0, abs=1e-6)
    c_many, s2_many = model.predict_many(SITES)
    np.testing.assert_allclose(c_many, VALUES, atol=1e-6)
    assert np.all(s2_many >= 0.0)


def test_variance_is_positive_between_sites():
    model = KrigingModel(SITES, VALUES, beta=np.array([0.05]))
    _, s2, _ = model.predict(np.array([0.125]))
    assert s2 > 0.0


@pytest.mark.parametrize('kernel', ['gaussian', 'matern'])
def test_predictor_and_variance_gradients(kernel):
    model = KrigingModel(SITES, VALUES, beta=np.array([0.05]), kernel=kernel)
    theta, h = np.array([0.37]), 1e-6
    _, _, grad = model.predict(theta)
    up, down = model.predict(theta + h), model.predict(theta - h)
    assert grad[0] == pytest.approx((up[0] - down[0]) / (2.0 * h), rel=1e-5)
    assert model.variance_gradient(theta)[0] == pytest.approx((up[1] - down[1]) / (2.0 * h),
                                                              rel=1e-5)


def test_merge_duplicates_keeps_latest_value():
    points, values = merge_duplicates(np.array([[0.0], [1.0], [0.0]]), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(points, [[0.0], [1.0]])
    np.testing.assert_array_equal(values, [3.0, 2.0])


def test_constant_values_give_constant_predictor():
    model = fit(SITES, np.full(5, 0.8))
    c_L, _, grad = model.predict(np.array([0.33]))
    assert c_L == pytest.approx(0.8)
    assert grad[0] == pytest.approx(0.0, abs=1e-8)


def test_fit_interpolates_and_respects_bounds():
    rng = np.random.default_rng(12)
    points = rng.uniform(size=(8, 2))
    values = rng.normal(size=8)
    bounds = np.array([[0.01, 0.1], [0.01, 0.1]])
    model = fit(points, values, beta_bounds=bounds, seed=3)
    assert np.all(model.beta >= bounds[:, 0] * (1 - 1e-9))
    assert np.all(model.beta <= bounds[:, 1] * (1 + 1e-9))
    c_L, _ = model.predict_many(points)
    np.testing.assert_allclose(c_L, values, atol=1e-4)


def test_fit_is_deterministic_for_a_seed():
    first = fit(SITES, VALUES, seed=5)
    second = fit(SITES, VALUES, seed=5)
    np.testing.assert_array_equal(first.beta, second.beta)


def test_fit_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        fit(SITES, VALUES, kernel='cubic')
    with pytest.raises(ConfigurationError):
        fit(np.zeros((3, 1)), np.ones(3))


def test_default_beta_bounds():
    np.testing.assert_allclose(default_beta_bounds([2.0]), [[0.02, 20.0]])


def test_no_warning_without_nugget_escalation(caplog):
    with caplog.at_level(logging.WARNING, logger='projection.surrogate'):
        fit(SITES, VALUES, beta_bounds=[[0.01, 0.05]])
    assert not caplog.records


def test_zero_nugget_escalates_on_duplicate_sites(caplog):
    with caplog.at_level(logging.DEBUG, logger='projection.surrogate'):
        model = KrigingModel(np.array([[0.0], [0.0], [1.0]]), np.array([1.0, 1.0, 2.0]),
                             beta=np.array([0.5]), nugget=0.0)
    assert model.nugget == NUGGET_START
    assert any('needed nugget 1e-10' in record.getMessage() for record in caplog.records)


def test_mean_and_variance_ignore_site_order():
    rng = np.random.default_rng(4)
    points = rng.uniform(size=(9, 2))
    values = rng.normal(size=9)
    beta = np.array([0.2, 0.4])
    model = KrigingModel(points, values, beta=beta)
    order = rng.permutation(9)
    shuffled = KrigingModel(points[order], values[order], beta=beta)
    assert shuffled.mu_hat == pytest.approx(model.mu_hat, abs=1e-10)
    assert shuffled.varsigma2_hat == pytest.approx(model.varsigma2_hat, abs=1e-10)


@pytest.mark.parametrize('kernel', ['gaussian', 'matern'])
def test_mean_and_variance_match_a_dense_solve(kernel):
    rng = np.random.default_rng(6)
    points = rng.uniform(size=(7, 2))
    values = rng.normal(size=7)
    beta = np.array([0.3, 0.6])
    model = KrigingModel(points, values, beta=beta, kernel=kernel)

    R = correlation_matrix(kernel, beta, points, points) + model.nugget * np.eye(7)
    ones = np.ones(7)
    mu = ones @ np.linalg.solve(R, values) / (ones @ np.linalg.solve(R, ones))
    resid = values - mu
    varsigma2 = resid @ np.linalg.solve(R, resid) / 7
    assert model.mu_hat == pytest.approx(mu, rel=1e-8)
    assert model.varsigma2_hat == pytest.approx(varsigma2, rel=1e-8)
