"""
Two-player entry game with multiple equilibria.

Player l enters when its payoff is nonnegative. With thresholds t_l (entry
as a monopolist) and s_l >= t_l (entry against a rival), pure-strategy Nash
play gives

    (0, 0)  u1 < t1 and u2 < t2
    (1, 1)  u1 >= s1 and u2 >= s2
    both (0, 1) and (1, 0) on [t1, s1) x [t2, s2), where (0, 1) is selected
    with probability mu
    (0, 1)  otherwise when u1 < s1 and u2 >= t2; (1, 0) in the rest.

Two variants are built in. ``set2`` has covariates z_l = (1, x_l) with
x_l in {-1, 1}, t_l = -z_l'zeta_l, s_l = -z_l'(zeta_l + Delta_l) and
bivariate normal shocks with correlation r; theta = (zeta_1, zeta_2,
Delta_1, Delta_2[, r]). ``set1`` has four market types k with zeta_0 = 0,
t_l = -zeta_k, s_l = delta_l - zeta_k and independent uniform shocks;
theta = (delta_1, delta_2, zeta_1, zeta_2, zeta_3).

Data matrices have columns (y1, y2, z) where z indexes the covariate
support point (set2) or the market type (set1).
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from .bvn import rectangle_gradient, rectangle_probability
from .exceptions import ConfigurationError
from .moment_model import MomentModel

logger = logging.getLogger(__name__)

VARIANTS = ('set1', 'set2')
OUTCOMES = ('00', '01', '10', '11')
N_SUPPORT = 4
# (x1, x2) for the four covariate support points of set2
X_SUPPORT = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
DATA_COLUMNS = ('y1', 'y2', 'z')

_SET2_BOX = [[0.0, 1.0], [-0.5, 0.5]] * 2 + [[-2.0, 0.0], [-1.5, 0.5]] * 2
_R_BOX = [0.0, 0.9]
_TOL = 1e-12


@dataclass(frozen=True)
class EntryGameSpec:
    """
    One data generating process of the entry game.

    Attributes:
        name: Registry name
        variant: ``set1`` or ``set2``
        theta_true: Parameter generating the data
        theta_box: (d, 2) parameter space
        mu: Probability of selecting (0, 1) in the multiplicity region
        r: Shock correlation when it is known
        estimate_r: Whether r is the last component of theta
        p_z: Probabilities of the four support points
        bounds: Projections of the identified set, by component name
    """

    name: str
    variant: str
    theta_true: np.ndarray
    theta_box: np.ndarray
    mu: float
    r: float = 0.0
    estimate_r: bool = False
    p_z: np.ndarray = field(default_factory=lambda: np.full(N_SUPPORT, 0.25))
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}", 'variant')
        object.__setattr__(self, 'theta_true', np.asarray(self.theta_true, dtype=float))
        object.__setattr__(self, 'theta_box', np.asarray(self.theta_box, dtype=float).reshape(-1, 2))
        object.__setattr__(self, 'p_z', np.asarray(self.p_z, dtype=float))
        if self.theta_true.shape[0] != self.d or self.theta_box.shape[0] != self.d:
            raise ConfigurationError(f"{self.name}: theta must have {self.d} components", 'theta')
        if self.p_z.shape != (N_SUPPORT,) or abs(self.p_z.sum() - 1.0) > 1e-12:
            raise ConfigurationError("p_z must hold four probabilities summing to 1", 'p_z')
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigurationError("mu must lie in [0, 1]", 'mu')
        if not 0.0 <= self.correlation(self.theta_true) < 1.0:
            raise ConfigurationError("shock correlation must lie in [0, 1)", 'r')
        if self.variant == 'set2':
            for ell in (0, 1):
                delta = self.theta_true[4 + 2 * ell:6 + 2 * ell]
                effects = delta[0] + X_SUPPORT[:, ell] * delta[1]
                if np.any(effects > _TOL):
                    raise ConfigurationError("interaction effects must be nonpositive", 'Delta')

    @property
    def d(self) -> int:
        if self.variant == 'set1':
            return 5
        return 9 if self.estimate_r else 8

    @property
    def component_names(self) -> Tuple[str, ...]:
        if self.variant == 'set1':
            return ('delta1', 'delta2', 'zeta1', 'zeta2', 'zeta3')
        names = ('zeta1_1', 'zeta1_2', 'zeta2_1', 'zeta2_2',
                 'Delta1_1', 'Delta1_2', 'Delta2_1', 'Delta2_2')
        return names + ('r',) if self.estimate_r else names

    def component_index(self, component) -> int:
        if isinstance(component, (int, np.integer)):
            if not 0 <= component < self.d:
                raise ConfigurationError(f"component {component} out of range", 'component')
            return int(component)
        try:
            return self.component_names.index(component)
        except ValueError:
            raise ConfigurationError(f"unknown component {component!r} for {self.name}",
                                     'component') from None

    def correlation(self, theta: np.ndarray) -> float:
        return float(theta[8]) if self.estimate_r else self.r


class Thresholds(NamedTuple):
    """Per-support-point thresholds and their (4, d) Jacobians."""

    t1: np.ndarray
    s1: np.ndarray
    t2: np.ndarray
    s2: np.ndarray
    dt1: np.ndarray
    ds1: np.ndarray
    dt2: np.ndarray
    ds2: np.ndarray


def thresholds(spec: EntryGameSpec, theta) -> Thresholds:
    """Entry thresholds at every support point."""
    theta = np.asarray(theta, dtype=float)
    d = spec.d
    jac = {key: np.zeros((N_SUPPORT, d)) for key in ('t1', 's1', 't2', 's2')}
    if spec.variant == 'set1':
        zeta = np.concatenate([[0.0], theta[2:5]])
        t = -zeta
        s1, s2 = theta[0] - zeta, theta[1] - zeta
        jac['s1'][:, 0] = 1.0
        jac['s2'][:, 1] = 1.0
        for k in range(1, N_SUPPORT):
            for key in ('t1', 't2', 's1', 's2'):
                jac[key][k, 1 + k] = -1.0
        return Thresholds(t, s1, t.copy(), s2, jac['t1'], jac['s1'], jac['t2'], jac['s2'])

    values = {}
    for ell, (tk, sk) in enumerate((('t1', 's1'), ('t2', 's2'))):
        zeta = theta[2 * ell:2 * ell + 2]
        delta = theta[4 + 2 * ell:6 + 2 * ell]
        Z = np.column_stack([np.ones(N_SUPPORT), X_SUPPORT[:, ell]])
        values[tk] = -Z @ zeta
        values[sk] = -Z @ (zeta + delta)
        jac[tk][:, 2 * ell:2 * ell + 2] = -Z
        jac[sk][:, 2 * ell:2 * ell + 2] = -Z
        jac[sk][:, 4 + 2 * ell:6 + 2 * ell] = -Z
    return Thresholds(values['t1'], values['s1'], values['t2'], values['s2'],
                      jac['t1'], jac['s1'], jac['t2'], jac['s2'])


def _uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def _uniform_density(x):
    return ((x > 0.0) & (x < 1.0)).astype(float)


def _rectangle(spec: EntryGameSpec, r: float, lo1, hi1, lo2, hi2) -> np.ndarray:
    if spec.variant == 'set2':
        return rectangle_probability(lo1, hi1, lo2, hi2, r)
    len1 = np.maximum(_uniform_cdf(hi1) - _uniform_cdf(lo1), 0.0)
    len2 = np.maximum(_uniform_cdf(hi2) - _uniform_cdf(lo2), 0.0)
    return len1 * len2


def _rectangle_jacobian(spec: EntryGameSpec, theta: np.ndarray, bounds, jacobians) -> np.ndarray:
    """(4, d) derivative of a rectangle probability through its bounds."""
    lo1, hi1, lo2, hi2 = bounds
    r = spec.correlation(theta)
    d_r = None
    if spec.variant == 'set2':
        grad = rectangle_gradient(lo1, hi1, lo2, hi2, r)
        partials = (grad.lo1, grad.hi1, grad.lo2, grad.hi2)
        d_r = grad.r
    else:
        open1 = hi1 > lo1
        open2 = hi2 > lo2
        len1 = np.where(open1, np.maximum(_uniform_cdf(hi1) - _uniform_cdf(lo1), 0.0), 0.0)
        len2 = np.where(open2, np.maximum(_uniform_cdf(hi2) - _uniform_cdf(lo2), 0.0), 0.0)
        partials = (-_uniform_density(lo1) * len2 * open1, _uniform_density(hi1) * len2 * open1,
                    -_uniform_density(lo2) * len1 * open2, _uniform_density(hi2) * len1 * open2)
    out = np.zeros((N_SUPPORT, spec.d))
    for partial, jac in zip(partials, jacobians):
        if jac is not None:
            out += partial[:, None] * jac
    if spec.estimate_r and d_r is not None:
        out[:, 8] += d_r
    return out


class RegionProbabilities(NamedTuple):
    """
    Model-implied masses per support point.

    ``both_out`` is (0, 0), ``both_in`` is (1, 1), ``upper01`` is the mass
    where (0, 1) is an equilibrium and ``multiple`` the multiplicity region.
    """

    both_out: np.ndarray
    both_in: np.ndarray
    upper01: np.ndarray
    multiple: np.ndarray


def region_probabilities(spec: EntryGameSpec, theta, with_gradient: bool = False):
    """
    Region masses at theta, optionally with their (4, d) Jacobians.

    Returns:
        RegionProbabilities, or a pair (probabilities, jacobians) when
        ``with_gradient`` is set
    """
    theta = np.asarray(theta, dtype=float)
    th = thresholds(spec, theta)
    r = spec.correlation(theta)
    inf = np.full(N_SUPPORT, np.inf)
    layouts = {
        'both_out': ((-inf, th.t1, -inf, th.t2), (None, th.dt1, None, th.dt2)),
        'both_in': ((th.s1, inf, th.s2, inf), (th.ds1, None, th.ds2, None)),
        'upper01': ((-inf, th.s1, th.t2, inf), (None, th.ds1, th.dt2, None)),
        'multiple': ((th.t1, th.s1, th.t2, th.s2), (th.dt1, th.ds1, th.dt2, th.ds2)),
    }
    probs = RegionProbabilities(**{
        key: _rectangle(spec, r, *bounds) for key, (bounds, _) in layouts.items()
    })
    if not with_gradient:
        return probs
    grads = RegionProbabilities(**{
        key: _rectangle_jacobian(spec, theta, bounds, jac) for key, (bounds, jac) in layouts.items()
    })
    return probs, grads


def outcome_probabilities(spec: EntryGameSpec, theta=None) -> np.ndarray:
    """
    (4, 4) probabilities of the outcomes ``OUTCOMES`` given each support point.

    The selection probability mu splits the multiplicity region; theta
    defaults to the true parameter.
    """
    theta = spec.theta_true if theta is None else np.asarray(theta, dtype=float)
    regions = region_probabilities(spec, theta)
    p01 = regions.upper01 - (1.0 - spec.mu) * regions.multiple
    p10 = 1.0 - regions.both_out - regions.both_in - p01
    return np.column_stack([regions.both_out, p01, p10, regions.both_in])


class EntryGameMoments:
    """
    Moment contributions and mean gradients for one DGP.

    Columns: upper (0, 1) inequalities per support point, lower (0, 1)
    inequalities per support point, then (0, 0) equalities (set2 only) and
    (1, 1) equalities per support point.
    """

    def __init__(self, spec: EntryGameSpec):
        self.spec = spec

    @property
    def J1(self) -> int:
        return 2 * N_SUPPORT

    @property
    def J2(self) -> int:
        return 2 * N_SUPPORT if self.spec.variant == 'set2' else N_SUPPORT

    def __call__(self, data: np.ndarray, theta: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        y1, y2 = data[:, 0], data[:, 1]
        cells = np.equal.outer(data[:, 2].astype(int), np.arange(N_SUPPORT)).astype(float)
        out01 = ((y1 == 0) & (y2 == 1)).astype(float)[:, None] * cells
        out00 = ((y1 == 0) & (y2 == 0)).astype(float)[:, None] * cells
        out11 = ((y1 == 1) & (y2 == 1)).astype(float)[:, None] * cells

        regions = region_probabilities(self.spec, theta)
        p = self.spec.p_z
        blocks = [
            out01 - regions.upper01 * p,
            -out01 + (regions.upper01 - regions.multiple) * p,
        ]
        if self.spec.variant == 'set2':
            blocks.append(out00 - regions.both_out * p)
        blocks.append(out11 - regions.both_in * p)
        return np.hstack(blocks)

    def gradient(self, theta: np.ndarray, data: Optional[np.ndarray] = None) -> np.ndarray:
        """(J1 + J2, d) gradient of the moment means in theta."""
        return analytic_gradients(self.spec, theta)


def analytic_gradients(spec: EntryGameSpec, theta) -> np.ndarray:
    """
    Closed-form (J1 + J2, d) gradient of the moment means.

    Only the model-implied probabilities depend on theta; studentization and
    the mirrored equality rows are applied by the moment model.
    """
    _, grads = region_probabilities(spec, np.asarray(theta, dtype=float), with_gradient=True)
    p = spec.p_z[:, None]
    blocks = [
        -grads.upper01 * p,
        (grads.upper01 - grads.multiple) * p,
    ]
    if spec.variant == 'set2':
        blocks.append(-grads.both_out * p)
    blocks.append(-grads.both_in * p)
    return np.vstack(blocks)


def moments(spec: EntryGameSpec) -> MomentModel:
    """
    Moment model of the DGP; each upper (0, 1) row is paired with its lower row.
    """
    fn = EntryGameMoments(spec)
    return MomentModel(
        d=spec.d, J1=fn.J1, J2=fn.J2, theta_box=spec.theta_box,
        moment_fn=fn, gradient_fn=fn.gradient,
        pairing=tuple((j, j + N_SUPPORT) for j in range(N_SUPPORT)),
        name=spec.name,
    )


def population_moments(spec: EntryGameSpec, theta) -> np.ndarray:
    """
    E[m_j(X, theta)] under the true DGP, one entry per moment (J1 + J2).
    """
    truth = outcome_probabilities(spec) * spec.p_z[:, None]
    regions = region_probabilities(spec, np.asarray(theta, dtype=float))
    p = spec.p_z
    blocks = [
        truth[:, 1] - regions.upper01 * p,
        -truth[:, 1] + (regions.upper01 - regions.multiple) * p,
    ]
    if spec.variant == 'set2':
        blocks.append(truth[:, 0] - regions.both_out * p)
    blocks.append(truth[:, 3] - regions.both_in * p)
    return np.concatenate(blocks)


def simulate(spec: EntryGameSpec, theta=None, n: int = 4000, seed: int = 0) -> np.ndarray:
    """
    Draw n markets from the game at theta (default: the true parameter).

    Returns:
        np.ndarray: (n, 3) matrix with columns ``DATA_COLUMNS``
    """
    theta = spec.theta_true if theta is None else np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    z = rng.choice(N_SUPPORT, size=n, p=spec.p_z)
    if spec.variant == 'set1':
        u = rng.uniform(size=(n, 2))
    else:
        r = spec.correlation(theta)
        e = rng.standard_normal((n, 2))
        u = np.column_stack([e[:, 0], r * e[:, 0] + np.sqrt(1.0 - r * r) * e[:, 1]])
    pick01 = rng.random(n) < spec.mu

    th = thresholds(spec, theta)
    t1, s1, t2, s2 = th.t1[z], th.s1[z], th.t2[z], th.s2[z]
    u1, u2 = u[:, 0], u[:, 1]
    both_out = (u1 < t1) & (u2 < t2)
    both_in = (u1 >= s1) & (u2 >= s2)
    multiple = (u1 >= t1) & (u1 < s1) & (u2 >= t2) & (u2 < s2)
    only2 = np.where(multiple, pick01, (u1 < s1) & (u2 >= t2))

    y1 = np.where(both_in, 1, np.where(both_out | only2, 0, 1))
    y2 = np.where(both_in | only2, 1, 0)
    return np.column_stack([y1, y2, z]).astype(float)


def identified_bounds(spec: EntryGameSpec, component, grid_size: int = 100001) -> Tuple[float, float]:
    """
    Projection of the identified set on one component.

    For set1 the equalities pin delta_2 and every zeta_k once delta_1 is
    fixed, so the set is traced by a one-dimensional scan over delta_1 with
    bisection at the edges. Other variants return the stored bounds.
    """
    index = spec.component_index(component)
    name = spec.component_names[index]
    if spec.variant != 'set1':
        if name in spec.bounds:
            return spec.bounds[name]
        raise ConfigurationError(f"no identified-set bounds stored for {name} in {spec.name}",
                                 'component')

    truth = outcome_probabilities(spec)
    p11, p01 = truth[:, 3], truth[:, 1]

    def trace(delta1):
        delta1 = np.atleast_1d(np.asarray(delta1, dtype=float))
        A = 1.0 - delta1
        with np.errstate(divide='ignore', invalid='ignore'):
            delta2 = 1.0 - p11[0] / A
            B = 1.0 - delta2
            zetas = [(-(A + B) + np.sqrt((A - B) ** 2 + 4.0 * p11[k])) / 2.0
                     for k in range(1, N_SUPPORT)]
        theta = np.column_stack([delta1, delta2] + zetas)
        ok = np.all(np.isfinite(theta), axis=1) & (delta2 >= 0.0) & (delta2 <= 1.0)
        zeta_all = np.column_stack([np.zeros_like(delta1)] + zetas)
        ok &= np.all(zeta_all >= -_TOL, axis=1)
        ok &= np.all(zeta_all <= np.minimum(delta1, delta2)[:, None] + _TOL, axis=1)
        a1 = delta1[:, None] - zeta_all
        a2 = delta2[:, None] - zeta_all
        ok &= np.all(a1 * (1.0 - a2) <= p01 + _TOL, axis=1)
        ok &= np.all(p01 <= a1 + _TOL, axis=1)
        return theta, ok

    grid = np.linspace(0.0, 1.0, grid_size, endpoint=False)[1:]
    thetas, ok = trace(grid)
    if not ok.any():
        raise ConfigurationError(f"identified set of {spec.name} not found on the scan grid",
                                 'grid_size')

    def refine(inside: float, outside: float) -> float:
        for _ in range(60):
            mid = 0.5 * (inside + outside)
            if trace(mid)[1][0]:
                inside = mid
            else:
                outside = mid
        return inside

    first, last = np.flatnonzero(ok)[[0, -1]]
    edges = [grid[first], grid[last]]
    if first > 0:
        edges[0] = refine(grid[first], grid[first - 1])
    if last < len(grid) - 1:
        edges[1] = refine(grid[last], grid[last + 1])
    edge_thetas, _ = trace(np.array(edges))
    values = np.concatenate([thetas[ok, index], edge_thetas[:, index]])
    return float(values.min()), float(values.max())


def _set2(name: str, delta: Tuple[float, float], estimate_r: bool = False, r: float = 0.0,
          bounds: Optional[Dict[str, Tuple[float, float]]] = None) -> EntryGameSpec:
    zeta = [0.5, 0.25]
    theta = zeta + zeta + list(delta) + list(delta)
    box = list(_SET2_BOX)
    if estimate_r:
        theta.append(r)
        box.append(_R_BOX)
    return EntryGameSpec(
        name=name, variant='set2', theta_true=theta, theta_box=box, mu=0.5,
        r=0.0 if estimate_r else r, estimate_r=estimate_r,
        p_z=[0.1, 0.2, 0.3, 0.4], bounds=bounds or {},
    )


def _point_bounds(theta, names) -> Dict[str, Tuple[float, float]]:
    return {name: (float(v), float(v)) for name, v in zip(names, theta)}


def _build_registry() -> Dict[str, EntryGameSpec]:
    set1 = EntryGameSpec(
        name='set1', variant='set1', theta_true=[0.4, 0.6, 0.1, 0.2, 0.3],
        theta_box=[[0.0, 1.0]] * 5, mu=0.6,
        bounds={
            'delta1': (0.3872, 0.4239), 'delta2': (0.5834, 0.6084),
            'zeta1': (0.0996, 0.1006), 'zeta2': (0.1994, 0.2010), 'zeta3': (0.2992, 0.3014),
        },
    )
    dgp1 = _set2('set2-dgp1', (-1.0, -1.0))
    dgp1 = replace(dgp1, bounds=_point_bounds(dgp1.theta_true, dgp1.component_names))
    dgp2 = _set2('set2-dgp2', (-1.0, -0.75), bounds={
        'zeta1_1': (0.405, 0.589), 'zeta1_2': (0.236, 0.266),
        'Delta1_1': (-1.158, -0.832), 'Delta1_2': (-0.790, -0.716),
    })
    dgp3 = _set2('set2-dgp3', (-1.0, -0.75), estimate_r=True, r=0.5)
    return {spec.name: spec for spec in (set1, dgp1, dgp2, dgp3)}


DGPS: Dict[str, EntryGameSpec] = _build_registry()


def get_dgp(name: str) -> EntryGameSpec:
    """Registered DGP by name."""
    try:
        return DGPS[name]
    except KeyError:
        raise ConfigurationError(f"unknown DGP {name!r}; choose from {sorted(DGPS)}",
                                 'dgp') from None
