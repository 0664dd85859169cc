"""
Moment (in)equality models and their sample analogs.

A model carries J1 inequality moments E[m_j(X, theta)] <= 0 and J2 equality
moments E[m_j(X, theta)] = 0. Every equality is split into two opposing
inequalities, so downstream code always iterates over J = J1 + 2 * J2 rows:
rows ``J1 + J2 .. J - 1`` hold the negated equality moments.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigurationError, DegenerateMomentError

logger = logging.getLogger(__name__)

MomentFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
GradientFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

GMS_KINDS = ('phi1_hard', 'phi2', 'phi3', 'phi4')
KAPPA_RULES = ('sqrt_ln_n', 'n_1_7', 'sqrt_ln_ln_n')

# relative threshold below which a moment's standard deviation counts as zero
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class MomentModel:
    """
    Declarative description of a moment (in)equality model.

    Attributes:
        d: Parameter dimension
        J1: Number of inequality moments
        J2: Number of equality moments
        theta_box: (d, 2) array of lower/upper bounds of the parameter box
        moment_fn: Maps (data, theta) to the (n, J1 + J2) matrix of moment
            contributions m_j(X_i, theta)
        gradient_fn: Optional map (theta, data) to the (J1 + J2, d) gradient
            of the theta-dependent part of the moment means
        pairing: Pairs (j, k) of inequality indices with m_k = -m_j - t_j
        name: Label used in logs and reports
    """

    d: int
    J1: int
    J2: int
    theta_box: np.ndarray
    moment_fn: MomentFn
    gradient_fn: Optional[GradientFn] = None
    pairing: Tuple[Tuple[int, int], ...] = ()
    name: str = 'model'

    def __post_init__(self):
        box = np.asarray(self.theta_box, dtype=float).reshape(-1, 2)
        object.__setattr__(self, 'theta_box', box)
        object.__setattr__(self, 'pairing', tuple((int(j), int(k)) for j, k in self.pairing))

        if box.shape[0] != self.d:
            raise ConfigurationError(f"expected {self.d} bounds, got {box.shape[0]}", 'theta_box')
        if np.any(box[:, 1] - box[:, 0] <= 0):
            raise ConfigurationError("every coordinate needs positive width", 'theta_box')
        if self.J1 < 0 or self.J2 < 0 or self.J1 + self.J2 < 1:
            raise ConfigurationError("need at least one moment", 'J1')

        used = [idx for pair in self.pairing for idx in pair]
        if len(set(used)) != len(used):
            raise ConfigurationError("pairs must be disjoint", 'pairing')
        if any(idx < 0 or idx >= self.J1 for idx in used):
            raise ConfigurationError("paired indices must be inequality moments", 'pairing')
        if 2 * len(self.pairing) > self.J1:
            raise ConfigurationError("at most J1/2 pairs", 'pairing')

    @property
    def J(self) -> int:
        """Effective constraint count, equalities counted twice."""
        return self.J1 + 2 * self.J2

    @property
    def n_moments(self) -> int:
        return self.J1 + self.J2

    @property
    def lower(self) -> np.ndarray:
        return self.theta_box[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.theta_box[:, 1]

    @property
    def width(self) -> np.ndarray:
        return self.theta_box[:, 1] - self.theta_box[:, 0]

    def evaluate(self, data: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """
        Moment contributions at theta.

        Args:
            data: Observation matrix with one row per observation
            theta: Parameter vector

        Returns:
            np.ndarray: (n, J1 + J2) matrix of m_j(X_i, theta)
        """
        values = np.asarray(self.moment_fn(data, np.asarray(theta, dtype=float)), dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[1] != self.n_moments:
            raise ConfigurationError(
                f"moment function returned {values.shape[1]} columns, expected {self.n_moments}",
                'moment_fn',
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("moment function returned non-finite values", 'moment_fn')
        return values


@dataclass(frozen=True)
class GmsConfig:
    """
    Generalized moment selection settings.

    Attributes:
        kind: One of ``GMS_KINDS``
        kappa: Thresholding sequence value kappa_n
    """

    kind: str = 'phi1_hard'
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in GMS_KINDS:
            raise ConfigurationError(f"unknown GMS function {self.kind!r}", 'gms')
        if not self.kappa > 0:
            raise ConfigurationError("kappa must be positive", 'kappa')

    @property
    def hard(self) -> bool:
        return self.kind == 'phi1_hard'

    @classmethod
    def from_rule(cls, kind: str, rule: str, n: int) -> 'GmsConfig':
        return cls(kind=kind, kappa=kappa_from_rule(rule, n))


def kappa_from_rule(rule: str, n: int) -> float:
    """
    Thresholding sequence for sample size n.

    Args:
        rule: ``sqrt_ln_n`` (default), ``n_1_7`` or ``sqrt_ln_ln_n``
        n: Sample size

    Returns:
        float: kappa_n
    """
    if rule == 'sqrt_ln_n':
        return float(np.sqrt(np.log(n)))
    if rule == 'n_1_7':
        return float(n ** (1.0 / 7.0))
    if rule == 'sqrt_ln_ln_n':
        return float(np.sqrt(np.log(np.log(n))))
    raise ConfigurationError(f"unknown kappa rule {rule!r}", 'kappa')


@dataclass(frozen=True)
class SampleMoments:
    """
    Studentized sample moments at one parameter value.

    All J-vectors carry the mirrored equality rows.

    Attributes:
        n: Sample size
        J1: Number of inequality moments
        J2: Number of equality moments
        theta: Parameter value the moments were computed at
        mbar: Sample means
        sigma_hat: Sample standard deviations (1/n normalisation)
        studentized: sqrt(n) * mbar / sigma_hat
        sigma_M: Paired standard deviations, one per declared pair
        D_hat: (J, d) gradient estimate
        contributions: (n, J1 + J2) moment contributions, kept for the bootstrap
        pairing: Pairs the paired estimator was computed for
    """

    n: int
    J1: int
    J2: int
    theta: np.ndarray
    mbar: np.ndarray
    sigma_hat: np.ndarray
    studentized: np.ndarray
    sigma_M: Optional[np.ndarray] = None
    D_hat: Optional[np.ndarray] = None
    contributions: Optional[np.ndarray] = field(default=None, repr=False)
    pairing: Tuple[Tuple[int, int], ...] = ()

    @property
    def J(self) -> int:
        return self.J1 + 2 * self.J2

    def constraint_sigma(self) -> np.ndarray:
        """Standard deviations used by the outer program; paired rows use sigma_M."""
        sigma = self.sigma_hat.copy()
        if self.sigma_M is not None:
            for (j, k), value in zip(self.pairing, self.sigma_M):
                sigma[j] = value
                sigma[k] = value
        return sigma

    def constraint_values(self) -> np.ndarray:
        """g_j(theta) = sqrt(n) mbar_j / sigma_j with the paired estimator applied."""
        return np.sqrt(self.n) * self.mbar / self.constraint_sigma()


def _mirror(values: np.ndarray, J1: int, J2: int, negate: bool = True) -> np.ndarray:
    """Append the (negated) equality rows."""
    tail = values[J1:J1 + J2]
    return np.concatenate([values, -tail if negate else tail], axis=0)


def sample_moment_values(model: MomentModel, data: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """(n, J1 + J2) moment contributions, shared by the moments and the bootstrap."""
    return model.evaluate(np.asarray(data, dtype=float), np.asarray(theta, dtype=float))


def studentized_moments(model: MomentModel, data: np.ndarray, theta: np.ndarray,
                        with_gradients: bool = True) -> SampleMoments:
    """
    Sample means, standard deviations and studentized moments at theta.

    Args:
        model: Moment model
        data: Observation matrix
        theta: Parameter vector
        with_gradients: Also estimate D_hat

    Returns:
        SampleMoments: Cached moment quantities

    Raises:
        DegenerateMomentError: If a moment has zero sample variance
    """
    theta = np.asarray(theta, dtype=float)
    contributions = sample_moment_values(model, data, theta)
    n = contributions.shape[0]
    if n < 2:
        raise ConfigurationError("need at least two observations", 'data')

    mbar = contributions.mean(axis=0)
    sigma = contributions.std(axis=0)
    degenerate = np.flatnonzero(sigma <= _DEGENERATE_TOL * (1.0 + np.abs(mbar)))
    if degenerate.size:
        raise DegenerateMomentError(int(degenerate[0]))

    mbar_full = _mirror(mbar, model.J1, model.J2)
    sigma_full = _mirror(sigma, model.J1, model.J2, negate=False)
    studentized = np.sqrt(n) * mbar_full / sigma_full

    sm = SampleMoments(
        n=n, J1=model.J1, J2=model.J2, theta=theta,
        mbar=mbar_full, sigma_hat=sigma_full, studentized=studentized,
        contributions=contributions, pairing=model.pairing,
    )
    if model.pairing:
        sm = replace(sm, sigma_M=sigma_paired(sm, model.pairing))
    if with_gradients:
        sm = replace(sm, D_hat=estimate_gradients(model, data, theta, sm))
    return sm


def xi_hat(sm: SampleMoments, gms: GmsConfig) -> np.ndarray:
    """
    Slackness measure kappa_n^{-1} sqrt(n) mbar_j / sigma_j; zero on equality rows.
    """
    xi = np.zeros(sm.J)
    xi[:sm.J1] = sm.studentized[:sm.J1] / gms.kappa
    return xi


def gms_apply(gms: GmsConfig, xi: np.ndarray) -> np.ndarray:
    """
    Apply the GMS function componentwise.

    Values are <= 0; -inf marks a row selected out of the bootstrap problem.
    Every kind maps 0 to 0, so the zero equality components pass through.
    """
    xi = np.asarray(xi, dtype=float)
    if gms.kind == 'phi1_hard':
        return np.where(xi >= -1.0, 0.0, -np.inf)
    if gms.kind == 'phi2':
        return np.minimum(0.0, gms.kappa * (xi + 1.0))
    if gms.kind == 'phi3':
        return np.minimum(0.0, xi)
    return np.minimum(0.0, gms.kappa * xi)


def gms_values(sm: SampleMoments, gms: GmsConfig) -> np.ndarray:
    """Shortcut for ``gms_apply(gms, xi_hat(sm, gms))``."""
    return gms_apply(gms, xi_hat(sm, gms))


def estimate_gradients(model: MomentModel, data: np.ndarray, theta: np.ndarray,
                       sm: Optional[SampleMoments] = None) -> np.ndarray:
    """
    Gradient estimate D_hat of the studentized moments.

    The analytic ``gradient_fn`` is used when the model supplies one;
    otherwise central finite differences of the moment means with step
    max(1e-6, 1e-7 |theta_k|), falling back to a one-sided difference when
    a step would leave the parameter box.

    Returns:
        np.ndarray: (J, d) matrix, equality rows mirrored
    """
    theta = np.asarray(theta, dtype=float)
    if sm is None:
        sm = studentized_moments(model, data, theta, with_gradients=False)
    sigma = sm.sigma_hat[:model.n_moments]

    if model.gradient_fn is not None:
        grad_mean = np.asarray(model.gradient_fn(theta, data), dtype=float)
    else:
        grad_mean = _finite_difference(model, data, theta)

    D = grad_mean / sigma[:, None]
    return _mirror(D, model.J1, model.J2)


def _finite_difference(model: MomentModel, data: np.ndarray, theta: np.ndarray) -> np.ndarray:
    slack = 1e-8 * model.width
    lower, upper = model.lower - slack, model.upper + slack
    grad = np.empty((model.n_moments, model.d))
    for k in range(model.d):
        h = max(1e-6, 1e-7 * abs(theta[k]))
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        if up[k] > upper[k]:
            up[k] = theta[k]
        if down[k] < lower[k]:
            down[k] = theta[k]
        step = up[k] - down[k]
        grad[:, k] = (model.evaluate(data, up).mean(axis=0)
                      - model.evaluate(data, down).mean(axis=0)) / step
    return grad


def paired_weights(sm: SampleMoments, pairing: Sequence[Tuple[int, int]]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weights (mu_j, mu_k) of each declared pair.

    mu_k = clip(s_j / (s_k + s_j), 0, 1) with s = mbar / sigma, mu_j = 1 - mu_k;
    a zero denominator is treated as a tie with mu_j = 1.
    """
    mu_j = np.empty(len(pairing))
    mu_k = np.empty(len(pairing))
    for idx, (j, k) in enumerate(pairing):
        s_j = sm.mbar[j] / sm.sigma_hat[j]
        s_k = sm.mbar[k] / sm.sigma_hat[k]
        denom = s_k + s_j
        if denom == 0.0:
            mu_k[idx] = 0.0
        else:
            mu_k[idx] = min(max(0.0, s_j / denom), 1.0)
        mu_j[idx] = 1.0 - mu_k[idx]
    return mu_j, mu_k


def sigma_paired(sm: SampleMoments, pairing: Sequence[Tuple[int, int]]) -> np.ndarray:
    """
    Paired standard deviation mu_j sigma_j + (1 - mu_j) sigma_k for each pair.
    """
    if not pairing:
        raise ConfigurationError("sigma_paired needs a non-empty pairing", 'pairing')
    mu_j, _ = paired_weights(sm, pairing)
    idx_j = np.array([j for j, _ in pairing])
    idx_k = np.array([k for _, k in pairing])
    return mu_j * sm.sigma_hat[idx_j] + (1.0 - mu_j) * sm.sigma_hat[idx_k]


# ---------------------------------------------------------------------------
# Built-in moment families
# ---------------------------------------------------------------------------

def mean_model(lower: float = -10.0, upper: float = 10.0, equality: bool = False,
               column: int = 0) -> MomentModel:
    """
    Scalar location model m(X, theta) = X - theta.

    As an inequality it says E[X] <= theta; as an equality it point
    identifies theta = E[X].
    """
    def moment_fn(data: np.ndarray, theta: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float).reshape(len(data), -1)
        return (data[:, column] - theta[0])[:, None]

    def gradient_fn(theta: np.ndarray, data: np.ndarray) -> np.ndarray:
        return np.array([[-1.0]])

    return MomentModel(
        d=1, J1=0 if equality else 1, J2=1 if equality else 0,
        theta_box=[[lower, upper]], moment_fn=moment_fn, gradient_fn=gradient_fn,
        name='mean',
    )


def linear_model(Z, theta_box, J2: int = 0) -> MomentModel:
    """
    Linear moments m_j(X, theta) = z_j' theta - X_j with fixed rows z_j.

    The last ``J2`` rows of Z are equalities. Data must have one column per row of Z.
    """
    Z = np.asarray(Z, dtype=float)
    n_rows, d = Z.shape

    def moment_fn(data: np.ndarray, theta: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float).reshape(len(data), -1)
        return (Z @ theta)[None, :] - data[:, :n_rows]

    def gradient_fn(theta: np.ndarray, data: np.ndarray) -> np.ndarray:
        return Z.copy()

    return MomentModel(
        d=d, J1=n_rows - J2, J2=J2, theta_box=theta_box,
        moment_fn=moment_fn, gradient_fn=gradient_fn, name='linear',
    )
