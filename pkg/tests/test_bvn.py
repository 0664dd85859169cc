import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from projection.bvn import (bvn_cdf, bvn_cdf_dx, rectangle_gradient,
                            rectangle_probability)


@pytest.mark.parametrize('r', [-0.99, -0.95, -0.5, 0.0, 0.3, 0.9, 0.93, 0.999])
def test_cdf_at_origin_matches_arcsine_law(r):
    expected = 0.25 + np.arcsin(r) / (2.0 * np.pi)
    assert bvn_cdf(0.0, 0.0, r) == pytest.approx(expected, abs=1e-10)


def test_independent_case_factorizes():
    x = np.array([-1.5, -0.2, 0.0, 0.7, 2.1])
    y = np.array([0.3, -1.1, 1.4, 0.0, -0.4])
    np.testing.assert_allclose(bvn_cdf(x, y, 0.0), norm.cdf(x) * norm.cdf(y), atol=1e-14)


@pytest.mark.parametrize('r', [-0.7, 0.2, 0.5, 0.95])
def test_cdf_agrees_with_scipy(r):
    rng = np.random.default_rng(3)
    points = rng.uniform(-2.5, 2.5, size=(20, 2))
    ours = bvn_cdf(points[:, 0], points[:, 1], r)
    cov = [[1.0, r], [r, 1.0]]
    reference = np.array([multivariate_normal(mean=[0, 0], cov=cov).cdf(pt) for pt in points])
    np.testing.assert_allclose(ours, reference, atol=1e-5)


def test_infinite_limits_reduce_to_marginals():
    assert bvn_cdf(np.inf, 0.5, 0.4) == pytest.approx(norm.cdf(0.5))
    assert bvn_cdf(-0.3, np.inf, 0.4) == pytest.approx(norm.cdf(-0.3))
    assert bvn_cdf(-np.inf, 0.5, 0.4) == 0.0
    assert bvn_cdf(np.inf, np.inf, 0.4) == 1.0


def test_cdf_is_symmetric_in_its_arguments():
    assert bvn_cdf(0.4, -1.2, 0.6) == pytest.approx(bvn_cdf(-1.2, 0.4, 0.6), abs=1e-14)


def test_rectangle_over_plane_has_unit_mass():
    prob = rectangle_probability(-np.inf, np.inf, -np.inf, np.inf, 0.3)
    assert prob == pytest.approx(1.0)


def test_empty_rectangle_has_zero_mass_and_gradient():
    assert rectangle_probability(1.0, 0.5, 0.0, 1.0, 0.2) == 0.0
    grad = rectangle_gradient(1.0, 0.5, 0.0, 1.0, 0.2)
    for part in grad:
        assert part == 0.0


def test_cdf_dx_matches_finite_difference():
    x, y, r, h = 0.3, -0.4, 0.45, 1e-6
    fd = (bvn_cdf(x + h, y, r) - bvn_cdf(x - h, y, r)) / (2.0 * h)
    assert bvn_cdf_dx(x, y, r) == pytest.approx(fd, rel=1e-6)


def test_rectangle_gradient_matches_finite_differences():
    bounds = np.array([-0.8, 0.6, -0.2, 1.1])
    r = 0.35
    grad = rectangle_gradient(*bounds, r)
    h = 1e-6
    for idx, analytic in enumerate((grad.lo1, grad.hi1, grad.lo2, grad.hi2)):
        up, down = bounds.copy(), bounds.copy()
        up[idx] += h
        down[idx] -= h
        fd = (rectangle_probability(*up, r) - rectangle_probability(*down, r)) / (2.0 * h)
        assert analytic == pytest.approx(fd, rel=1e-5)
    fd_r = (rectangle_probability(*bounds, r + h) - rectangle_probability(*bounds, r - h)) / (2.0 * h)
    assert grad.r == pytest.approx(fd_r, rel=1e-5)


def test_infinite_bound_has_zero_derivative():
    grad = rectangle_gradient(-np.inf, 0.5, 0.1, np.inf, 0.2)
    assert grad.lo1 == 0.0
    assert grad.hi2 == 0.0
    assert grad.hi1 > 0.0
