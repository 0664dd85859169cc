"""
Kriging surrogate for the critical-level map theta -> c(theta).

Ordinary kriging with a constant GLS mean, process variance and kernel
length-scales fitted by concentrated maximum likelihood. The fitted model
interpolates the evaluated critical levels and exposes an analytic gradient
and predictive variance for the acquisition step.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.special import gamma, kv

from .exceptions import ConfigurationError, IllConditionedSurrogateError

logger = logging.getLogger(__name__)

KERNELS = ('gaussian', 'matern')
NUGGET_START = 1e-10
NUGGET_MAX = 1e-6
DUPLICATE_TOL = 1e-12
# unit predictive variance below this is a factorisation failure, not round-off
_NEGATIVE_VARIANCE_TOL = 1e-6


def _scaled_distance(beta: np.ndarray, X1: np.ndarray, X2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pairwise differences (n1, n2, d) and squared scaled distances sum diff^2 / beta."""
    diff = X1[:, None, :] - X2[None, :, :]
    h2 = np.sum(diff * diff / beta, axis=2)
    return diff, h2


def matern_correlation(h: np.ndarray, nu: float, closed_form: bool = True) -> np.ndarray:
    """
    Matern correlation at scaled distance h.

    Closed forms are used for nu in {1/2, 3/2, 5/2} unless ``closed_form``
    is False; otherwise the modified Bessel function of the second kind.
    """
    h = np.asarray(h, dtype=float)
    if closed_form and nu == 0.5:
        return np.exp(-h)
    if closed_form and nu == 1.5:
        a = np.sqrt(3.0) * h
        return (1.0 + a) * np.exp(-a)
    if closed_form and nu == 2.5:
        a = np.sqrt(5.0) * h
        return (1.0 + a + a * a / 3.0) * np.exp(-a)
    x = np.sqrt(2.0 * nu) * h
    with np.errstate(invalid='ignore', over='ignore'):
        value = 2.0 ** (1.0 - nu) / gamma(nu) * x ** nu * kv(nu, x)
    return np.where(x > 0, value, 1.0)


def _matern_slope(h: np.ndarray, nu: float) -> np.ndarray:
    """(dK/dh) / h, finite at h = 0 for nu > 1/2."""
    if nu == 0.5:
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(h > 0, -np.exp(-h) / h, 0.0)
    if nu == 1.5:
        return -3.0 * np.exp(-np.sqrt(3.0) * h)
    if nu == 2.5:
        a = np.sqrt(5.0) * h
        return -(5.0 / 3.0) * (1.0 + a) * np.exp(-a)
    c = 2.0 ** (1.0 - nu) / gamma(nu)
    a = np.sqrt(2.0 * nu)
    x = a * h
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        slope = -c * a * x ** nu * kv(nu - 1.0, x) / h
    return np.where(h > 0, slope, 0.0)


def correlation_matrix(kernel: str, beta: np.ndarray, X1: np.ndarray, X2: np.ndarray,
                       nu: float = 2.5) -> np.ndarray:
    """Kernel correlations between the rows of X1 and X2."""
    _, h2 = _scaled_distance(np.asarray(beta, dtype=float), np.atleast_2d(X1), np.atleast_2d(X2))
    if kernel == 'gaussian':
        return np.exp(-h2)
    if kernel == 'matern':
        return matern_correlation(np.sqrt(h2), nu)
    raise ConfigurationError(f"unknown kernel {kernel!r}", 'surrogate.kernel')


def correlation_gradient(kernel: str, beta: np.ndarray, x: np.ndarray, X: np.ndarray,
                         nu: float = 2.5) -> np.ndarray:
    """
    Gradient of r(x) = [K(x - X_l)]_l with respect to x.

    Returns:
        np.ndarray: (L, d) matrix Q' with rows dK(x - X_l)/dx
    """
    beta = np.asarray(beta, dtype=float)
    diff, h2 = _scaled_distance(beta, np.atleast_2d(x), np.atleast_2d(X))
    diff, h2 = diff[0], h2[0]
    if kernel == 'gaussian':
        return (np.exp(-h2)[:, None]) * (-2.0 * diff / beta)
    if kernel == 'matern':
        slope = _matern_slope(np.sqrt(h2), nu)
        return slope[:, None] * diff / beta
    raise ConfigurationError(f"unknown kernel {kernel!r}", 'surrogate.kernel')


def kernel_eval(kernel: str, beta, theta, theta_prime, nu: float = 2.5) -> float:
    """
    Correlation K_beta(theta - theta').

    Gaussian: exp(-sum_k (theta_k - theta'_k)^2 / beta_k). Matern(nu): the
    Matern correlation at h = sqrt(sum_k (theta_k - theta'_k)^2 / beta_k).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    x = np.atleast_1d(np.asarray(theta, dtype=float))[None, :]
    y = np.atleast_1d(np.asarray(theta_prime, dtype=float))[None, :]
    return float(correlation_matrix(kernel, beta, x, y, nu)[0, 0])


def merge_duplicates(points: np.ndarray, values: np.ndarray,
                     tol: float = DUPLICATE_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """Collapse points closer than tol (max norm), keeping the latest value."""
    kept_points: list = []
    kept_values: list = []
    for point, value in zip(points, values):
        for idx, existing in enumerate(kept_points):
            if np.max(np.abs(existing - point)) <= tol:
                kept_values[idx] = value
                break
        else:
            kept_points.append(point)
            kept_values.append(value)
    return np.array(kept_points), np.array(kept_values, dtype=float)


def _factorize(R: np.ndarray, nugget: float):
    """
    Cholesky of R + nugget I, escalating the nugget tenfold up to NUGGET_MAX.

    A zero nugget escalates to NUGGET_START.
    """
    eye = np.eye(R.shape[0])
    while nugget <= NUGGET_MAX * (1.0 + 1e-9):
        try:
            factor = cho_factor(R + nugget * eye, lower=True)
        except LinAlgError:
            nugget = nugget * 10.0 if nugget > 0.0 else NUGGET_START
            continue
        return factor, nugget
    raise IllConditionedSurrogateError(NUGGET_MAX)


class KrigingModel:
    """
    Fitted ordinary-kriging surrogate.

    Attributes:
        points: (L, d) evaluation sites
        values: L-vector of evaluated critical levels
        beta: Fitted length-scales
        mu_hat: GLS constant mean
        varsigma2_hat: Process variance
        nugget: Diagonal jitter the factorisation succeeded with
        kernel: ``gaussian`` or ``matern``
        nu: Matern smoothness index
    """

    def __init__(self, points: np.ndarray, values: np.ndarray, beta: np.ndarray,
                 kernel: str = 'gaussian', nu: float = 2.5, nugget: float = NUGGET_START):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.values = np.asarray(values, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.kernel = kernel
        self.nu = nu
        self.logger = logging.getLogger(__name__)

        R = correlation_matrix(kernel, self.beta, self.points, self.points, nu)
        self.R_factor, self.nugget = _factorize(R, nugget)
        if self.nugget > nugget:
            self.logger.debug("correlation matrix needed nugget %.0e (started at %.0e)",
                              self.nugget, nugget)
        ones = np.ones(len(self.values))
        self._Rinv_one = cho_solve(self.R_factor, ones)
        self._one_Rinv_one = float(ones @ self._Rinv_one)
        self.mu_hat = float(self._Rinv_one @ self.values / self._one_Rinv_one)
        resid = self.values - self.mu_hat
        self._Rinv_resid = cho_solve(self.R_factor, resid)
        self.varsigma2_hat = max(0.0, float(resid @ self._Rinv_resid) / len(self.values))

    @property
    def L(self) -> int:
        return len(self.values)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def log_likelihood(self) -> float:
        """Concentrated log-likelihood up to constants."""
        log_det = 2.0 * np.sum(np.log(np.diag(self.R_factor[0])))
        if self.varsigma2_hat <= 0.0:
            return np.inf
        return -0.5 * self.L * np.log(self.varsigma2_hat) - 0.5 * log_det

    def _unit_variance(self, r: np.ndarray) -> np.ndarray:
        """1 - r'R^{-1}r + (1 - 1'R^{-1}r)^2 / 1'R^{-1}1 for each column of r."""
        u = cho_solve(self.R_factor, r)
        quad = np.sum(r * u, axis=0)
        lead = 1.0 - np.sum(u, axis=0)
        unit = 1.0 - quad + lead * lead / self._one_Rinv_one
        if np.any(unit < -_NEGATIVE_VARIANCE_TOL):
            raise IllConditionedSurrogateError(self.nugget)
        return np.maximum(unit, 0.0)

    def predict(self, theta) -> Tuple[float, float, np.ndarray]:
        """
        Predictor, predictive variance and predictor gradient at theta.

        Returns:
            tuple: (c_L, s2, grad) with s2 = varsigma2 * s_L^2 >= 0
        """
        theta = np.asarray(theta, dtype=float)
        r = correlation_matrix(self.kernel, self.beta, theta[None, :], self.points, self.nu)[0]
        c_L = self.mu_hat + float(r @ self._Rinv_resid)
        s2 = self.varsigma2_hat * float(self._unit_variance(r[:, None])[0])
        Q = correlation_gradient(self.kernel, self.beta, theta, self.points, self.nu)
        grad = Q.T @ self._Rinv_resid
        return c_L, s2, grad

    def predict_many(self, thetas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorised predictor and predictive variance at the rows of thetas."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        r = correlation_matrix(self.kernel, self.beta, self.points, thetas, self.nu)
        c_L = self.mu_hat + r.T @ self._Rinv_resid
        s2 = self.varsigma2_hat * self._unit_variance(r)
        return c_L, s2

    def variance_gradient(self, theta) -> np.ndarray:
        """Gradient of the predictive variance s2 at theta."""
        theta = np.asarray(theta, dtype=float)
        r = correlation_matrix(self.kernel, self.beta, theta[None, :], self.points, self.nu)[0]
        Q = correlation_gradient(self.kernel, self.beta, theta, self.points, self.nu)
        u = cho_solve(self.R_factor, r)
        lead = 1.0 - float(np.sum(u))
        return self.varsigma2_hat * (
            -2.0 * Q.T @ u - 2.0 * lead * (Q.T @ self._Rinv_one) / self._one_Rinv_one
        )


def default_beta_bounds(width) -> np.ndarray:
    """Length-scale bounds [0.01 w_k, 10 w_k] from the box widths."""
    width = np.asarray(width, dtype=float)
    return np.column_stack([0.01 * width, 10.0 * width])


def fit(points, values, kernel: str = 'gaussian', beta_bounds=None, nugget: float = NUGGET_START,
        nu: float = 2.5, n_restarts: int = 8, max_evals: int = 200,
        seed: int = 0) -> KrigingModel:
    """
    Fit a kriging surrogate by concentrated maximum likelihood.

    Args:
        points: (L, d) evaluation sites; duplicates within 1e-12 keep the latest value
        values: Critical levels at the sites
        kernel: ``gaussian`` or ``matern``
        beta_bounds: (d, 2) bounds on the length-scales; default from the site spread
        nugget: Initial diagonal jitter
        nu: Matern smoothness index
        n_restarts: Multistart count for the likelihood search
        max_evals: Likelihood evaluations across all starts
        seed: Seed of the random starts

    Returns:
        KrigingModel: Fitted surrogate

    Raises:
        IllConditionedSurrogateError: If the correlation matrix cannot be
            factorised even at the largest nugget
    """
    if kernel not in KERNELS:
        raise ConfigurationError(f"unknown kernel {kernel!r}", 'surrogate.kernel')
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    points, values = merge_duplicates(points, values)
    if len(values) < 2:
        raise ConfigurationError("kriging needs at least two distinct sites", 'points')

    d = points.shape[1]
    if beta_bounds is None:
        spread = np.ptp(points, axis=0)
        beta_bounds = default_beta_bounds(np.where(spread > 0, spread, 1.0))
    beta_bounds = np.asarray(beta_bounds, dtype=float).reshape(d, 2)
    log_lo, log_hi = np.log(beta_bounds[:, 0]), np.log(beta_bounds[:, 1])
    middle = 0.5 * (log_lo + log_hi)

    if np.ptp(values) == 0.0:
        return KrigingModel(points, values, np.exp(middle), kernel, nu, nugget)

    def objective(log_beta: np.ndarray) -> float:
        try:
            model = KrigingModel(points, values, np.exp(log_beta), kernel, nu, nugget)
        except IllConditionedSurrogateError:
            return 1e300
        ll = model.log_likelihood()
        return -ll if np.isfinite(ll) else 1e300

    rng = np.random.default_rng(seed)
    starts = [middle] + [rng.uniform(log_lo, log_hi) for _ in range(max(0, n_restarts - 1))]
    per_start = max(1, max_evals // max(1, len(starts)))
    best_x, best_f = middle, objective(middle)
    for start in starts:
        result = minimize(objective, start, method='Powell',
                          bounds=list(zip(log_lo, log_hi)),
                          options={'maxfev': per_start, 'xtol': 1e-3, 'ftol': 1e-6})
        if result.fun < best_f:
            best_x, best_f = np.clip(result.x, log_lo, log_hi), result.fun

    model = KrigingModel(points, values, np.exp(best_x), kernel, nu, nugget)
    if model.nugget > nugget:
        logger.warning("kriging fit escalated the nugget to %.0e", model.nugget)
    logger.debug("kriging fit: L=%d beta=%s mu=%.4f varsigma2=%.3g nugget=%.0e",
                 model.L, np.array2string(model.beta, precision=3), model.mu_hat,
                 model.varsigma2_hat, model.nugget)
    return model
