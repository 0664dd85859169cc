"""
Bootstrap calibration of the projection critical level.

For a candidate theta, the critical level c_n(theta) is the smallest c >= 0
such that, in at least a fraction 1 - alpha of bootstrap replicates, the
linearised and GMS-relaxed constraint set

    Lambda_b(c) = {lambda in box : G_b + D lambda + phi <= c, p'lambda = 0}

is nonempty. Feasibility of each Lambda_b(c) is one small LP; the level is
found by Brent-Dekker root finding on the (monotone, step-shaped) coverage
function, reusing earlier verdicts per replicate.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import comb
from scipy.stats import norm

from .exceptions import ConfigurationError
from .linprog import INFEASIBLE, UNBOUNDED, LinearSystem, feasible, maximize
from .moment_model import (GmsConfig, MomentModel, SampleMoments, gms_values,
                           paired_weights, studentized_moments)

logger = logging.getLogger(__name__)

BOOTSTRAP_MODES = ('multiplier', 'resample')
DEFAULT_TOL = 1e-4
LIBERAL_ETA = 1e-16

# replicates drawn per block in resample mode
_RESAMPLE_BLOCK = 256


@dataclass(frozen=True)
class BootstrapEnsemble:
    """
    Bootstrapped studentized empirical process at one theta.

    Attributes:
        G: (B, J) replicate matrix; equality mirror rows negated
        mode: ``multiplier`` or ``resample``
        seed: Seed the draws were made with
    """

    G: np.ndarray
    mode: str
    seed: int

    @property
    def B(self) -> int:
        return self.G.shape[0]


@dataclass(frozen=True)
class CriticalLevel:
    """
    Calibrated critical level at one theta.

    Attributes:
        value: c_n(theta)
        bracket: Final (c_L, c_U)
        iterations: Coverage evaluations spent in the root finder
        h_at_value: Bootstrap feasibility fraction at ``value``
        bracket_failed: True if coverage stayed below 1 - alpha at the
            Bonferroni bound, which is then returned
    """

    value: float
    bracket: Tuple[float, float]
    iterations: int
    h_at_value: float
    bracket_failed: bool = False

    def to_dict(self) -> dict:
        return {
            'value': float(self.value),
            'bracket': [float(b) for b in self.bracket],
            'iterations': int(self.iterations),
            'h_at_value': float(self.h_at_value),
            'bracket_failed': bool(self.bracket_failed),
        }


def bootstrap_ensemble(model: MomentModel, data: np.ndarray, theta: np.ndarray, B: int,
                       mode: str = 'multiplier', seed: int = 0,
                       sm: Optional[SampleMoments] = None) -> BootstrapEnsemble:
    """
    Draw B replicates of the studentized empirical process at theta.

    Args:
        model: Moment model
        data: Observation matrix
        theta: Parameter vector
        B: Number of replicates
        mode: ``multiplier`` (standard normal weights) or ``resample``
        seed: Seed of the draws
        sm: Precomputed sample moments at theta

    Returns:
        BootstrapEnsemble: Replicates, deterministic in (seed, mode)
    """
    if B < 1:
        raise ConfigurationError("need at least one replicate", 'B')
    if mode not in BOOTSTRAP_MODES:
        raise ConfigurationError(f"unknown bootstrap mode {mode!r}", 'bootstrap')
    if sm is None or sm.contributions is None:
        sm = studentized_moments(model, data, theta, with_gradients=False)

    J1, J2 = sm.J1, sm.J2
    n = sm.n
    base = J1 + J2
    scaled = (sm.contributions - sm.mbar[:base]) / sm.sigma_hat[:base]
    rng = np.random.default_rng(seed)

    if mode == 'multiplier':
        weights = rng.standard_normal((B, n))
        G = weights @ scaled / np.sqrt(n)
    else:
        G = np.empty((B, base))
        probs = np.full(n, 1.0 / n)
        for start in range(0, B, _RESAMPLE_BLOCK):
            stop = min(B, start + _RESAMPLE_BLOCK)
            counts = rng.multinomial(n, probs, size=stop - start)
            G[start:stop] = counts @ scaled / np.sqrt(n)

    G = np.hstack([G, -G[:, J1:J1 + J2]])
    return BootstrapEnsemble(G=G, mode=mode, seed=seed)


def local_box(model: MomentModel, theta: np.ndarray, n: int, rho: float = math.inf) -> np.ndarray:
    """
    Box for the localisation vector: sqrt(n)(Theta - theta) intersected with rho[-1, 1]^d.
    """
    theta = np.asarray(theta, dtype=float)
    root_n = np.sqrt(n)
    box = np.column_stack([root_n * (model.lower - theta), root_n * (model.upper - theta)])
    if np.isfinite(rho):
        box[:, 0] = np.maximum(box[:, 0], -rho)
        box[:, 1] = np.minimum(box[:, 1], rho)
    return box


def _as_directions(directions) -> Optional[np.ndarray]:
    if directions is None:
        return None
    P = np.atleast_2d(np.asarray(directions, dtype=float))
    return P


@dataclass
class CalibrationProblem:
    """
    Linear template shared by every replicate at one theta.

    Each LP row reads W_i (g + D lambda) + phi_i <= c * cmask_i, so that only
    the right-hand side changes with the replicate and with c.

    Attributes:
        A: (r, d) row matrix W D plus direction rows
        W: (r, J) replicate weights of each row
        offset: r-vector of GMS terms (zero on direction rows)
        cmask: 1 on moment rows, 0 on direction rows
        box: (d, 2) localisation box
        G: (B, J) replicate matrix
    """

    A: np.ndarray
    W: np.ndarray
    offset: np.ndarray
    cmask: np.ndarray
    box: np.ndarray
    G: np.ndarray
    _known_feasible: np.ndarray = field(init=False, repr=False)
    _known_infeasible: np.ndarray = field(init=False, repr=False)
    solves: int = field(default=0, init=False)

    def __post_init__(self):
        self._rhs_base = -(self.G @ self.W.T) - self.offset
        self._known_feasible = np.full(self.B, np.inf)
        self._known_infeasible = np.full(self.B, -np.inf)

    @property
    def B(self) -> int:
        return self.G.shape[0]

    def system(self, b: int, c: float) -> LinearSystem:
        """Lambda_b(c) as a linear system."""
        return LinearSystem(self.A, self._rhs_base[b] + c * self.cmask, self.box)

    def replicate_feasible(self, b: int, c: float) -> bool:
        """psi_b(c), answered from cached verdicts when monotonicity allows."""
        if c >= self._known_feasible[b]:
            return True
        if c <= self._known_infeasible[b]:
            return False
        self.solves += 1
        verdict = feasible(self.system(b, c))
        if verdict:
            self._known_feasible[b] = c
        else:
            self._known_infeasible[b] = c
        return verdict

    def feasible_fraction(self, c: float) -> float:
        return float(np.mean([self.replicate_feasible(b, c) for b in range(self.B)]))

    def thresholds(self) -> np.ndarray:
        """
        Smallest c making each replicate feasible, one LP in (lambda, c) each.

        Returns -inf for replicates feasible at every c and +inf for those
        feasible at none.
        """
        d = self.A.shape[1]
        A_aug = np.hstack([self.A, -self.cmask[:, None]])
        box_aug = np.vstack([self.box, [-np.inf, np.inf]])
        objective = np.zeros(d + 1)
        objective[-1] = -1.0
        out = np.empty(self.B)
        for b in range(self.B):
            result = maximize(objective, LinearSystem(A_aug, self._rhs_base[b], box_aug))
            if result.status == UNBOUNDED:
                out[b] = -np.inf
            elif result.status == INFEASIBLE:
                out[b] = np.inf
            else:
                out[b] = -result.value
        return out


def build_problem(G: np.ndarray, D: np.ndarray, phi: np.ndarray, box: np.ndarray,
                  directions=None, halfspace=None,
                  pairing: Sequence[Tuple[int, int]] = (), hard: bool = True,
                  weights: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> CalibrationProblem:
    """
    Assemble the replicate-independent template of Lambda_b(c).

    Args:
        G: (B, J) replicate matrix
        D: (J, d) gradient estimate
        phi: J-vector of GMS values (-inf drops a row)
        box: (d, 2) localisation box
        directions: p, or a (k, d) matrix of hyperplanes p_l' lambda = 0
        halfspace: q for the one-sided condition q' lambda >= 0
        pairing: Declared paired inequalities
        hard: Hard-threshold GMS (pick-one rule) versus smooth weighted rows
        weights: (mu_j, mu_k) per pair, required for smooth pairing

    Returns:
        CalibrationProblem: Shared template
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    phi = np.asarray(phi, dtype=float)
    J, d = D.shape

    rows = {}
    for j in range(J):
        if np.isfinite(phi[j]):
            w = np.zeros(J)
            w[j] = 1.0
            rows[j] = (w, phi[j])

    for idx, (j, k) in enumerate(pairing):
        if hard:
            if phi[j] == 0.0 and phi[k] == 0.0:
                w = np.zeros(J)
                w[j] = -1.0
                rows[k] = (w, 0.0)
        else:
            if weights is None:
                raise ConfigurationError("smooth pairing needs weights", 'pairing')
            mu_j, mu_k = weights[0][idx], weights[1][idx]
            w = np.zeros(J)
            w[j], w[k] = mu_j, -mu_k
            if np.isfinite(phi[j]):
                rows[j] = (w, phi[j])
            if np.isfinite(phi[k]):
                rows[k] = (-w, phi[k])

    order = sorted(rows)
    W = np.array([rows[j][0] for j in order]).reshape(len(order), J)
    offset = np.array([rows[j][1] for j in order], dtype=float)
    A = W @ D
    cmask = np.ones(len(order))

    extra = []
    P = _as_directions(directions)
    if P is not None:
        extra.extend([P, -P])
    if halfspace is not None:
        extra.append(-np.atleast_2d(np.asarray(halfspace, dtype=float)))
    if extra:
        E = np.vstack(extra)
        A = np.vstack([A, E])
        W = np.vstack([W, np.zeros((E.shape[0], J))])
        offset = np.concatenate([offset, np.zeros(E.shape[0])])
        cmask = np.concatenate([cmask, np.zeros(E.shape[0])])

    return CalibrationProblem(A=A, W=W, offset=offset, cmask=cmask,
                              box=np.asarray(box, dtype=float), G=G)


def lambda_system(g: np.ndarray, D: np.ndarray, phi: np.ndarray, c: float, box: np.ndarray,
                  directions=None, halfspace=None, pairing: Sequence[Tuple[int, int]] = (),
                  hard: bool = True, weights=None) -> LinearSystem:
    """
    Lambda(c) for a single replicate row g as a ``LinearSystem``.
    """
    problem = build_problem(np.atleast_2d(g), D, phi, box, directions, halfspace,
                            pairing, hard, weights)
    return problem.system(0, c)


def h_alpha(problem: CalibrationProblem, c: float, alpha: float) -> float:
    """Bootstrap feasibility fraction at c minus 1 - alpha."""
    return problem.feasible_fraction(c) - (1.0 - alpha)


def bonferroni_bound(alpha: float, J: int) -> float:
    return float(norm.ppf(1.0 - alpha / J))


def _opposite(fa: float, fb: float) -> bool:
    return (fa < 0.0) != (fb < 0.0)


def _brent_dekker(f: Callable[[float], float], lo: float, hi: float, f_lo: float, f_hi: float,
                  tol: float, max_iter: int = 100) -> Tuple[float, float, float, int]:
    """
    Brent-Dekker search for the sign change of a nondecreasing f on [lo, hi].

    Requires f(lo) < 0 <= f(hi). Stops once f(c_U) <= tol or the bracket is
    narrower than tol.

    Returns:
        tuple: (c_L, c_U, f(c_U), evaluations)
    """
    c_lo, c_hi, fc_hi = lo, hi, f_hi
    xpre, xcur, fpre, fcur = lo, hi, f_lo, f_hi
    xblk, fblk, spre, scur = lo, f_lo, hi - lo, hi - lo
    evaluations = 0

    for _ in range(max_iter):
        if fc_hi <= tol or c_hi - c_lo <= tol:
            break
        if _opposite(fpre, fcur):
            xblk, fblk = xpre, fpre
            spre = scur = xcur - xpre
        if abs(fblk) < abs(fcur):
            xpre, xcur, xblk = xcur, xblk, xcur
            fpre, fcur, fblk = fcur, fblk, fcur

        sbis = (xblk - xcur) / 2.0
        stry = None
        if abs(spre) > tol and abs(fcur) < abs(fpre):
            if xpre == xblk and fcur != fpre:
                stry = -fcur * (xcur - xpre) / (fcur - fpre)
            elif xpre != xblk and xpre != xcur and xblk != xcur:
                dpre = (fpre - fcur) / (xpre - xcur)
                dblk = (fblk - fcur) / (xblk - xcur)
                denom = dblk * dpre * (fblk - fpre)
                if denom != 0.0:
                    stry = -fcur * (fblk * dblk - fpre * dpre) / denom
        if stry is not None and 2.0 * abs(stry) < min(abs(spre), 3.0 * abs(sbis) - tol):
            spre, scur = scur, stry
        else:
            spre = scur = sbis

        xpre, fpre = xcur, fcur
        if abs(scur) > tol:
            xcur = xcur + scur
        else:
            xcur = xcur + (tol if sbis > 0 else -tol)
        if not c_lo < xcur < c_hi:
            xcur = 0.5 * (c_lo + c_hi)

        fcur = f(xcur)
        evaluations += 1
        if fcur >= 0.0:
            if xcur < c_hi:
                c_hi, fc_hi = xcur, fcur
        elif xcur > c_lo:
            c_lo = xcur
    return c_lo, c_hi, fc_hi, evaluations


def calibrate(problem: CalibrationProblem, alpha: float, J: int, tol: float = DEFAULT_TOL,
              hint: Optional[float] = None) -> CriticalLevel:
    """
    Root-find the smallest c with bootstrap feasibility fraction >= 1 - alpha.

    Args:
        problem: Replicate template at theta
        alpha: Nominal level
        J: Constraint count for the Bonferroni upper end
        tol: Stopping tolerance on h and on the bracket width
        hint: Optional extra evaluation point used to shrink the initial bracket

    Returns:
        CriticalLevel: The upper end c_U of the final bracket
    """
    if not 0.0 < alpha < 0.5:
        raise ConfigurationError("alpha must lie in (0, 0.5)", 'alpha')

    def h(c: float) -> float:
        return h_alpha(problem, c, alpha)

    h0 = h(0.0)
    if h0 >= 0.0:
        return CriticalLevel(0.0, (0.0, 0.0), 1, h0 + 1.0 - alpha)

    c_bar = bonferroni_bound(alpha, J)
    lo, f_lo = 0.0, h0
    hi, f_hi = c_bar, None
    evaluations = 1
    if hint is not None and 0.0 < hint < c_bar:
        f_hint = h(hint)
        evaluations += 1
        if f_hint >= 0.0:
            hi, f_hi = hint, f_hint
        else:
            lo, f_lo = hint, f_hint
    if f_hi is None:
        f_hi = h(c_bar)
        evaluations += 1
        if f_hi < 0.0:
            logger.warning(
                "coverage %.4f below %.4f at the Bonferroni bound %.4f; returning the bound",
                f_hi + 1.0 - alpha, 1.0 - alpha, c_bar,
            )
            return CriticalLevel(c_bar, (lo, c_bar), evaluations, f_hi + 1.0 - alpha, True)

    c_lo, c_hi, f_c_hi, used = _brent_dekker(h, lo, hi, f_lo, f_hi, tol)
    return CriticalLevel(c_hi, (c_lo, c_hi), evaluations + used, f_c_hi + 1.0 - alpha)


def _prepare(model: MomentModel, data: np.ndarray, theta: np.ndarray, gms: GmsConfig, B: int,
             seed: int, mode: str, sm: Optional[SampleMoments],
             ensemble: Optional[BootstrapEnsemble]):
    theta = np.asarray(theta, dtype=float)
    if sm is None or sm.D_hat is None:
        sm = studentized_moments(model, data, theta)
    if ensemble is None:
        ensemble = bootstrap_ensemble(model, data, theta, B, mode, seed, sm=sm)
    return theta, sm, ensemble, gms_values(sm, gms)


def as_projection_quantile(G: np.ndarray, phi: np.ndarray, alpha: float) -> float:
    """(1 - alpha) order statistic of max_j {G_bj + phi_j}, floored at 0."""
    finite = np.isfinite(phi)
    if not finite.any():
        return 0.0
    stats = np.max(G[:, finite] + phi[finite], axis=1)
    order = int(math.ceil((1.0 - alpha) * len(stats))) - 1
    return max(0.0, float(np.sort(stats)[max(order, 0)]))


def critical_level(model: MomentModel, data: np.ndarray, theta: np.ndarray, alpha: float,
                   rho: float, gms: GmsConfig, B: int, seed: int = 0, tol: float = DEFAULT_TOL,
                   p=None, directions=None, mode: str = 'multiplier',
                   sm: Optional[SampleMoments] = None,
                   ensemble: Optional[BootstrapEnsemble] = None) -> CriticalLevel:
    """
    Calibrated critical level c_n(theta) for the projection p'theta.

    Args:
        model: Moment model
        data: Observation matrix
        theta: Parameter value
        alpha: Nominal level
        rho: rho-box radius (``math.inf`` for none)
        gms: GMS settings
        B: Bootstrap replicates
        seed: Bootstrap seed
        tol: Root-finder tolerance
        p: Unit direction of the projection
        directions: (k, d) matrix for joint coverage of k projections; overrides p
        mode: Bootstrap mode
        sm: Precomputed sample moments (with D_hat)
        ensemble: Precomputed ensemble, shared across variants

    Returns:
        CriticalLevel: Calibrated level and root-finder diagnostics
    """
    theta, sm, ensemble, phi = _prepare(model, data, theta, gms, B, seed, mode, sm, ensemble)
    if directions is None:
        if p is None:
            raise ConfigurationError("a direction p is required", 'p')
        directions = np.asarray(p, dtype=float)[None, :]
    problem = _problem_at(model, sm, ensemble, phi, gms, rho, directions=directions)
    hint = as_projection_quantile(ensemble.G, phi, alpha)
    result = calibrate(problem, alpha, sm.J, tol, hint=hint)
    logger.debug("critical level %.4f at theta=%s (%d LPs)", result.value,
                 np.array2string(theta, precision=4), problem.solves)
    return result


def _problem_at(model: MomentModel, sm: SampleMoments, ensemble: BootstrapEnsemble,
                phi: np.ndarray, gms: GmsConfig, rho: float, directions=None,
                halfspace=None) -> CalibrationProblem:
    weights = None
    if model.pairing and not gms.hard:
        weights = paired_weights(sm, model.pairing)
    box = local_box(model, sm.theta, sm.n, rho)
    return build_problem(ensemble.G, sm.D_hat, phi, box, directions=directions,
                         halfspace=halfspace, pairing=model.pairing, hard=gms.hard,
                         weights=weights)


def as_projection_critical(model: MomentModel, data: np.ndarray, theta: np.ndarray, alpha: float,
                           gms: GmsConfig, B: int, seed: int = 0, mode: str = 'multiplier',
                           sm: Optional[SampleMoments] = None,
                           ensemble: Optional[BootstrapEnsemble] = None) -> float:
    """
    Uncalibrated critical level from projecting a confidence set for theta.

    The (1 - alpha) quantile of max_j {G_bj + phi_j} over replicates, floored at 0.
    """
    theta, sm, ensemble, phi = _prepare(model, data, theta, gms, B, seed, mode, sm, ensemble)
    return as_projection_quantile(ensemble.G, phi, alpha)


def one_sided_critical(model: MomentModel, data: np.ndarray, theta: np.ndarray, alpha: float,
                       rho: float, gms: GmsConfig, B: int, q, seed: int = 0,
                       tol: float = DEFAULT_TOL, mode: str = 'multiplier',
                       sm: Optional[SampleMoments] = None,
                       ensemble: Optional[BootstrapEnsemble] = None) -> CriticalLevel:
    """
    Critical level with the halfspace {q'lambda >= 0} in place of the hyperplane.

    Use q = p for the upper endpoint and q = -p for the lower one.
    """
    theta, sm, ensemble, phi = _prepare(model, data, theta, gms, B, seed, mode, sm, ensemble)
    problem = _problem_at(model, sm, ensemble, phi, gms, rho, halfspace=q)
    hint = as_projection_quantile(ensemble.G, phi, alpha)
    return calibrate(problem, alpha, sm.J, tol, hint=hint)


def replicate_thresholds(model: MomentModel, data: np.ndarray, theta: np.ndarray, gms: GmsConfig,
                         B: int, p=None, rho: float = math.inf, seed: int = 0,
                         mode: str = 'multiplier', directions=None,
                         sm: Optional[SampleMoments] = None,
                         ensemble: Optional[BootstrapEnsemble] = None) -> np.ndarray:
    """
    Per-replicate minimal c at which Lambda_b(c) is nonempty.

    One LP in (lambda, c) per replicate; ``critical_from_thresholds`` turns
    the result into the exact calibrated level.
    """
    theta, sm, ensemble, phi = _prepare(model, data, theta, gms, B, seed, mode, sm, ensemble)
    if directions is None and p is not None:
        directions = np.asarray(p, dtype=float)[None, :]
    problem = _problem_at(model, sm, ensemble, phi, gms, rho, directions=directions)
    return problem.thresholds()


def _linear_constraints(model: MomentModel, data: np.ndarray, c: float) -> LinearSystem:
    """
    {theta : g(theta) <= c} for moments linear in theta, g linearised at the box center.

    Exact when the moments are linear and their variances do not depend on theta.
    """
    center = model.theta_box.mean(axis=1)
    sm = studentized_moments(model, data, center)
    scale = sm.sigma_hat / sm.constraint_sigma()
    A = np.sqrt(sm.n) * sm.D_hat * scale[:, None]
    b = c - sm.constraint_values() + A @ center
    return LinearSystem(A, b, model.theta_box)


def two_lp_interval(model: MomentModel, data: np.ndarray, p, c: float
                    ) -> Tuple[Optional[float], Optional[float]]:
    """
    [min p'theta, max p'theta] over {theta in box : g(theta) <= c} for linear moments.

    Returns (None, None) when the constraint set is empty.
    """
    p = np.asarray(p, dtype=float)
    system = _linear_constraints(model, data, c)
    upper = maximize(p, system)
    lower = maximize(-p, system)
    if not (upper.optimal and lower.optimal):
        return None, None
    return -lower.value, upper.value


def frozen_one_sided_interval(model: MomentModel, data: np.ndarray, p, alpha: float,
                              rho: float, gms: GmsConfig, B: int, seed: int = 0,
                              tol: float = DEFAULT_TOL, mode: str = 'multiplier'
                              ) -> Tuple[Optional[float], Optional[float]]:
    """
    Interval with the one-sided level frozen at the sample support point.

    For each side q in {-p, p} the level c_q is computed once at the
    maximizer of q'theta over the sample constraint set {g <= 0} (the box
    center when that set is empty) and the endpoint then solves one LP.
    Linear moments only.
    """
    p = np.asarray(p, dtype=float)
    q_unit = p / np.linalg.norm(p)
    endpoints = []
    for sign in (-1.0, 1.0):
        support = maximize(sign * p, _linear_constraints(model, data, 0.0))
        theta_q = support.x if support.optimal else model.theta_box.mean(axis=1)
        c_q = one_sided_critical(model, data, theta_q, alpha, rho, gms, B, sign * q_unit,
                                 seed, tol, mode).value
        result = maximize(sign * p, _linear_constraints(model, data, c_q))
        logger.debug("frozen one-sided level %.4f for side %+d", c_q, int(sign))
        endpoints.append(sign * result.value if result.optimal else None)
    return endpoints[0], endpoints[1]


def critical_from_thresholds(thresholds: np.ndarray, alpha: float) -> float:
    """
    Exact critical level from per-replicate feasibility thresholds.

    Smallest c >= 0 at which at least a fraction 1 - alpha of replicates is feasible.
    """
    ordered = np.sort(np.asarray(thresholds, dtype=float))
    order = int(math.ceil((1.0 - alpha) * len(ordered))) - 1
    return max(0.0, float(ordered[max(order, 0)]))


def rho_from_eta(eta, J: int, d: int) -> float:
    """
    rho-box radius giving conservative bias eta.

    Solves 1 - [1 - 2 Phi(-rho)]^{d C(J, d)} = eta by bisection to 1e-10.

    Args:
        eta: Target bias in (0, 1), or ``'liberal'`` for machine precision
        J: Number of distinct moments J1 + J2
        d: Parameter dimension

    Returns:
        float: rho
    """
    if eta == 'liberal':
        eta = LIBERAL_ETA
    eta = float(eta)
    if not 0.0 < eta < 1.0:
        raise ConfigurationError("eta must lie in (0, 1)", 'eta')
    if not J >= d >= 1:
        raise ConfigurationError("need J1 + J2 >= d >= 1", 'J')

    exponent = d * float(comb(J, d, exact=True))
    target = math.log1p(-eta)

    def gap(rho: float) -> float:
        return exponent * math.log1p(-2.0 * norm.sf(rho)) - target

    return float(bisect(gap, 1e-8, 40.0, xtol=1e-10))
