"""
Evaluation-Approximation-Maximization (E-A-M) driver.

Solves max_theta f(theta) s.t. g_j(theta) <= c(theta) for all j, theta in a
box, where g and its gradient are cheap and c is expensive (a bootstrap
critical level). Each iteration evaluates c at one new point, refits a
kriging surrogate of c over everything evaluated so far, and proposes the
next point by maximizing feasibility-weighted expected improvement.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize
from scipy.stats import norm

from .critical_level import (DEFAULT_TOL, as_projection_critical, critical_level,
                             one_sided_critical)
from .exceptions import ConfigurationError
from .moment_model import GmsConfig, MomentModel, SampleMoments, studentized_moments
from .surrogate import NUGGET_START, KrigingModel, default_beta_bounds, fit

logger = logging.getLogger(__name__)

METHODS = ('calibrated', 'onesided', 'as-proj')
# constraint-value cache entries kept per problem
_CACHE_LIMIT = 4096
# slack allowed when checking g_j <= c at an evaluated point
FEASIBILITY_TOL = 1e-9


@dataclass
class EamOptions:
    """
    Tuning of the E-A-M loop.

    Attributes:
        k: Initial evaluation points (None means 10 d + 1)
        epsilon: Probability of a uniform exploration draw in the M-step
        max_iter: Iteration cap after initialization
        conv_tol: Convergence threshold on EI and on the proposal step
        min_stall: Consecutive passing iterations required to stop
        seed: Seed of initialization and exploration draws
        n_starts: Local-search starts in the M-step
        n_candidates: Uniform candidates screened for the best-EI start
        kernel: Surrogate kernel
        nu: Matern smoothness index
        nugget: Initial diagonal jitter of the surrogate
        n_restarts: Likelihood multistarts per surrogate fit
        max_evals: Likelihood evaluations per surrogate fit
        n_jobs: Workers for the initial evaluations
    """

    k: Optional[int] = None
    epsilon: float = 0.05
    max_iter: int = 100
    conv_tol: float = 0.005
    min_stall: int = 3
    seed: int = 0
    n_starts: int = 30
    n_candidates: int = 1000
    kernel: str = 'gaussian'
    nu: float = 2.5
    nugget: float = NUGGET_START
    n_restarts: int = 8
    max_evals: int = 200
    n_jobs: int = 1

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in [0, 1)", 'eam.epsilon')
        if not self.conv_tol > 0:
            raise ConfigurationError("conv_tol must be positive", 'eam.conv_tol')
        if self.min_stall < 1:
            raise ConfigurationError("min_stall must be at least 1", 'eam.min_stall')

    def initial_points(self, d: int) -> int:
        return self.k if self.k is not None else 10 * d + 1


@dataclass
class EamState:
    """
    Evaluations made so far.

    Attributes:
        points: (L, d) evaluated parameters
        cvals: Critical levels at the points
        gmax: max_j g_j at the points
        objective: Objective value at the points
        theta_star: Best feasible point, None while none is feasible
        incumbent: Objective at theta_star, or the stand-in lower bound
        history: One record per iteration
    """

    points: np.ndarray
    cvals: np.ndarray
    gmax: np.ndarray
    objective: np.ndarray
    incumbent: float
    theta_star: Optional[np.ndarray] = None
    history: List[dict] = field(default_factory=list)

    @property
    def L(self) -> int:
        return len(self.cvals)

    @property
    def feasible_set(self) -> np.ndarray:
        return np.flatnonzero(self.gmax <= self.cvals + FEASIBILITY_TOL)

    def add(self, theta: np.ndarray, c: float, gmax: float, value: float) -> bool:
        """Record an evaluation; returns True if it improved the incumbent."""
        self.points = np.vstack([self.points, theta])
        self.cvals = np.append(self.cvals, c)
        self.gmax = np.append(self.gmax, gmax)
        self.objective = np.append(self.objective, value)
        if gmax <= c + FEASIBILITY_TOL and (self.theta_star is None or value > self.incumbent):
            self.theta_star = np.array(theta, dtype=float)
            self.incumbent = float(value)
            return True
        return False


@dataclass
class EamResult:
    """
    Outcome of one direction.

    Attributes:
        endpoint: Best feasible objective value, None if nothing was feasible
        theta_star: Its maximizer
        converged: Whether the stopping rule fired before max_iter
        empty: No evaluated point was feasible
        evaluations: Critical-level evaluations
        iterations: E-A-M iterations after initialization
        ei_trace: Maximal EI per iteration
        history: Per-iteration records
        elapsed: Wall time in seconds
    """

    endpoint: Optional[float]
    theta_star: Optional[np.ndarray]
    converged: bool
    empty: bool
    evaluations: int
    iterations: int
    ei_trace: List[float]
    history: List[dict]
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            'endpoint': None if self.endpoint is None else float(self.endpoint),
            'theta_star': None if self.theta_star is None else self.theta_star.tolist(),
            'converged': bool(self.converged),
            'empty': bool(self.empty),
            'evaluations': int(self.evaluations),
            'iterations': self.iterations,
            'ei_trace': [float(v) for v in self.ei_trace],
            'elapsed': float(self.elapsed),
        }


class EamProblem:
    """
    Constrained problem max sign * f(theta) s.t. g(theta) <= c(theta), theta in box.

    Attributes:
        box: (d, 2) parameter bounds
        p: Linear objective direction (when f is None)
        sign: +1 to maximize the objective, -1 to minimize it
    """

    def __init__(self, box, constraint_fn: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
                 critical_fn: Callable[[np.ndarray, int], float], p=None,
                 f: Optional[Callable[[np.ndarray], float]] = None,
                 f_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None, sign: int = 1):
        self.box = np.asarray(box, dtype=float).reshape(-1, 2)
        self.constraint_fn = constraint_fn
        self.critical_fn = critical_fn
        self.p = None if p is None else np.asarray(p, dtype=float)
        self.f = f
        self.f_grad = f_grad
        self.sign = sign
        if self.p is None and (f is None or f_grad is None):
            raise ConfigurationError("need a direction p or a function f with its gradient", 'p')
        self._cache: Dict[bytes, Tuple[np.ndarray, np.ndarray]] = {}

    @property
    def d(self) -> int:
        return self.box.shape[0]

    def flipped(self) -> 'EamProblem':
        """Same problem with the objective negated."""
        other = EamProblem(self.box, self.constraint_fn, self.critical_fn, self.p, self.f,
                           self.f_grad, -self.sign)
        other._cache = self._cache
        return other

    def objective(self, theta: np.ndarray) -> float:
        if self.f is not None:
            return self.sign * float(self.f(theta))
        return self.sign * float(self.p @ theta)

    def objective_grad(self, theta: np.ndarray) -> np.ndarray:
        if self.f is not None:
            return self.sign * np.asarray(self.f_grad(theta), dtype=float)
        return self.sign * self.p

    def objective_floor(self) -> float:
        """Lower bound of a linear objective over the box."""
        q = self.sign * self.p
        return float(np.sum(np.where(q > 0, q * self.box[:, 0], q * self.box[:, 1])))

    def constraints(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Constraint values g(theta) and their (J, d) Jacobian."""
        key = np.asarray(theta, dtype=float).tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = self.constraint_fn(np.asarray(theta, dtype=float))
            if len(self._cache) >= _CACHE_LIMIT:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def critical_value(self, theta: np.ndarray) -> float:
        return float(self.critical_fn(np.asarray(theta, dtype=float), self.sign))

    def evaluate(self, theta: np.ndarray) -> Tuple[float, float]:
        """(c(theta), max_j g_j(theta)) by direct computation."""
        g, _ = self.constraints(theta)
        return self.critical_value(theta), float(np.max(g))


def initialize(box, k: int, seed: int) -> np.ndarray:
    """
    k uniform draws over the box, deterministic per seed.
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    d = box.shape[0]
    if k < d + 1:
        raise ConfigurationError(f"need at least d + 1 = {d + 1} initial points", 'eam.k')
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(k, d))


def _feasibility_probability(gbar, c_L, s2):
    s = np.sqrt(np.maximum(s2, 0.0))
    with np.errstate(divide='ignore', invalid='ignore'):
        z = (gbar - c_L) / s
    return np.where(s > 0, norm.sf(z), np.asarray(gbar <= c_L + FEASIBILITY_TOL).astype(float))


def expected_improvement(theta, model: KrigingModel, state: EamState, gbar: float, p) -> float:
    """
    (p'theta - p'theta*)_+ times the surrogate probability that theta is feasible.

    With zero predictive variance the probability is the indicator
    {gbar <= c_L(theta)}.
    """
    theta = np.asarray(theta, dtype=float)
    gain = float(np.asarray(p, dtype=float) @ theta) - state.incumbent
    if gain <= 0.0:
        return 0.0
    c_L, s2, _ = model.predict(theta)
    return gain * float(_feasibility_probability(gbar, c_L, s2))


def _ei_at(problem: EamProblem, model: KrigingModel, state: EamState, theta: np.ndarray) -> float:
    gain = problem.objective(theta) - state.incumbent
    if gain <= 0.0:
        return 0.0
    g, _ = problem.constraints(theta)
    c_L, s2, _ = model.predict(theta)
    return gain * float(_feasibility_probability(float(np.max(g)), c_L, s2))


def _maximin_search(problem: EamProblem, model: KrigingModel, state: EamState,
                    start: np.ndarray) -> np.ndarray:
    """
    Local EI maximization in (theta, v): max v s.t. EI_j(theta) >= v for all j,
    EI_j using constraint j alone.
    """
    d = problem.d
    lower, upper = problem.box[:, 0], problem.box[:, 1]
    s_floor = 1e-10

    def terms(x):
        theta = np.clip(x[:d], lower, upper)
        g, jac = problem.constraints(theta)
        c_L, s2, grad_c = model.predict(theta)
        s = max(math.sqrt(max(s2, 0.0)), s_floor)
        grad_s = model.variance_gradient(theta) / (2.0 * s)
        gain = problem.objective(theta) - state.incumbent
        grad_gain = problem.objective_grad(theta)
        z = (g - c_L) / s
        surv = norm.sf(z)
        dens = norm.pdf(z)
        grad_z = (jac - grad_c) / s - np.outer(z, grad_s) / s
        values = gain * surv
        grads = np.outer(surv, grad_gain) - gain * dens[:, None] * grad_z
        return values, grads

    def cons(x):
        values, _ = terms(x)
        return values - x[d]

    def cons_jac(x):
        _, grads = terms(x)
        out = np.zeros((grads.shape[0], d + 1))
        out[:, :d] = grads
        out[:, d] = -1.0
        return out

    values, _ = terms(np.append(start, 0.0))
    x0 = np.append(start, float(np.min(values)))
    bounds = list(zip(lower, upper)) + [(None, None)]
    result = minimize(
        lambda x: -x[d], x0, jac=lambda x: np.append(np.zeros(d), -1.0),
        method='SLSQP', bounds=bounds,
        constraints=[{'type': 'ineq', 'fun': cons, 'jac': cons_jac}],
        options={'maxiter': 50, 'ftol': 1e-9},
    )
    candidate = result.x[:d] if np.all(np.isfinite(result.x)) else start
    return np.clip(candidate, lower, upper)


def _mean_constrained_search(problem: EamProblem, model: KrigingModel,
                             start: np.ndarray) -> np.ndarray:
    """
    Local maximization of the objective over {theta : g_j(theta) <= c_L(theta) for all j}.

    Smooth where the EI terms are steep (small predictive variance), so it
    reaches vertices of the surrogate-feasible set the maximin search stalls short of.
    """
    lower, upper = problem.box[:, 0], problem.box[:, 1]

    def cons(x):
        theta = np.clip(x, lower, upper)
        g, _ = problem.constraints(theta)
        c_L, _, _ = model.predict(theta)
        return c_L - g

    def cons_jac(x):
        theta = np.clip(x, lower, upper)
        _, jac = problem.constraints(theta)
        _, _, grad_c = model.predict(theta)
        return grad_c[None, :] - jac

    result = minimize(
        lambda x: -problem.objective(np.clip(x, lower, upper)), start,
        jac=lambda x: -problem.objective_grad(np.clip(x, lower, upper)),
        method='SLSQP', bounds=list(zip(lower, upper)),
        constraints=[{'type': 'ineq', 'fun': cons, 'jac': cons_jac}],
        options={'maxiter': 50, 'ftol': 1e-10},
    )
    candidate = result.x if np.all(np.isfinite(result.x)) else start
    return np.clip(candidate, lower, upper)


def _starts(problem: EamProblem, model: KrigingModel, state: EamState, options: EamOptions,
            rng: np.random.Generator) -> List[np.ndarray]:
    """Data-dependent starting points for the EI search."""
    lower, upper = problem.box[:, 0], problem.box[:, 1]
    width = upper - lower
    starts: List[np.ndarray] = []
    if state.theta_star is not None:
        starts.append(state.theta_star.copy())

    candidates = rng.uniform(lower, upper, size=(options.n_candidates, problem.d))
    if options.n_candidates:
        gains = np.array([problem.objective(x) for x in candidates]) - state.incumbent
        gmax = np.array([np.max(problem.constraints(x)[0]) if gain > 0 else np.inf
                         for x, gain in zip(candidates, gains)])
        c_L, s2 = model.predict_many(candidates)
        ei = np.maximum(gains, 0.0) * _feasibility_probability(gmax, c_L, s2)
        starts.append(candidates[int(np.argmax(ei))])

    feasible = state.feasible_set
    pool = state.points[feasible] if feasible.size else state.points
    while len(starts) < options.n_starts:
        base = pool[rng.integers(len(pool))]
        jitter = rng.normal(scale=0.05 * width)
        starts.append(np.clip(base + jitter, lower, upper))
    return starts[:max(1, options.n_starts)]


def m_step(model: KrigingModel, state: EamState, problem: EamProblem, options: EamOptions,
           rng: np.random.Generator) -> Tuple[np.ndarray, float, Optional[np.ndarray]]:
    """
    Propose the next evaluation point.

    With probability epsilon the proposal is a uniform draw over the box;
    otherwise it is the best EI maximizer over the multistart local searches,
    falling back to the uniform draw when EI vanishes at every candidate.

    Returns:
        tuple: (proposal, max EI, EI maximizer or None on an exploration draw)
    """
    lower, upper = problem.box[:, 0], problem.box[:, 1]
    explore = rng.random() < options.epsilon
    uniform_draw = rng.uniform(lower, upper)
    if explore:
        return uniform_draw, 0.0, None

    best_theta, best_ei = uniform_draw, 0.0
    for start in _starts(problem, model, state, options, rng):
        for candidate in (start, _maximin_search(problem, model, state, start),
                          _mean_constrained_search(problem, model, start)):
            ei = _ei_at(problem, model, state, candidate)
            if ei > best_ei:
                best_theta, best_ei = candidate, ei
    best_theta = np.clip(best_theta, lower, upper)
    if best_ei == 0.0 and state.theta_star is not None:
        # nothing beats the incumbent: report it as the EI maximizer
        return best_theta, 0.0, state.theta_star
    return best_theta, best_ei, best_theta


def _evaluate_point(problem: EamProblem, theta: np.ndarray) -> Tuple[float, float]:
    return problem.evaluate(theta)


def run_direction(problem: EamProblem, options: EamOptions) -> EamResult:
    """
    Maximize the problem's objective with the E-A-M loop.

    Stops once, for ``min_stall`` consecutive iterations, the maximal EI is
    at most conv_tol (1 + |incumbent|) and the EI maximizer moves the
    objective by at most conv_tol; or when ``max_iter`` is reached.

    Returns:
        EamResult: Endpoint and diagnostics; ``empty`` when no evaluated
        point satisfied the constraints
    """
    started = time.perf_counter()
    d = problem.d
    k = options.initial_points(d)
    points = initialize(problem.box, k, options.seed)

    if options.n_jobs == 1:
        evaluated = [_evaluate_point(problem, x) for x in points]
    else:
        evaluated = Parallel(n_jobs=options.n_jobs)(
            delayed(_evaluate_point)(problem, x) for x in points
        )
    cvals = np.array([c for c, _ in evaluated])
    gmax = np.array([g for _, g in evaluated])
    values = np.array([problem.objective(x) for x in points])

    floor = problem.objective_floor() if problem.f is None else float(values.min())
    state = EamState(points=points, cvals=cvals, gmax=gmax, objective=values, incumbent=floor)
    feasible = state.feasible_set
    if feasible.size:
        best = feasible[int(np.argmax(values[feasible]))]
        state.theta_star = points[best].copy()
        state.incumbent = float(values[best])
    logger.debug("E-A-M start: %d initial points, %d feasible", k, feasible.size)

    rng = np.random.default_rng([options.seed, 1])
    beta_bounds = default_beta_bounds(problem.box[:, 1] - problem.box[:, 0])
    stall = 0
    converged = False
    ei_trace: List[float] = []
    iteration = 0
    for iteration in range(1, options.max_iter + 1):
        surrogate = fit(state.points, state.cvals, kernel=options.kernel, nu=options.nu,
                        beta_bounds=beta_bounds, nugget=options.nugget,
                        n_restarts=options.n_restarts, max_evals=options.max_evals,
                        seed=options.seed + iteration)
        proposal, ei_max, ei_theta = m_step(surrogate, state, problem, options, rng)
        previous = state.incumbent
        c_new, g_new = problem.evaluate(proposal)
        improved = state.add(proposal, c_new, g_new, problem.objective(proposal))

        if ei_theta is not None:
            # exploration draws leave the stall count unchanged
            step = abs(problem.objective(ei_theta) - previous)
            passing = (
                state.theta_star is not None
                and ei_max <= options.conv_tol * (1.0 + abs(state.incumbent))
                and step <= options.conv_tol
            )
            stall = stall + 1 if passing else 0
        ei_trace.append(ei_max)
        state.history.append({
            'iteration': iteration, 'L': state.L, 'incumbent': state.incumbent,
            'ei_max': ei_max, 'proposal': proposal.tolist(), 'improved': improved,
        })
        logger.debug("E-A-M iter %d: incumbent=%.5f ei=%.3g c=%.4f g=%.4f",
                     iteration, state.incumbent, ei_max, c_new, g_new)
        if stall >= options.min_stall:
            converged = True
            break

    if not converged:
        logger.warning("E-A-M reached max_iter=%d without meeting the stopping rule",
                       options.max_iter)
    empty = state.theta_star is None
    if empty:
        logger.warning("no evaluated point satisfied the constraints; interval is empty")
    return EamResult(
        endpoint=None if empty else state.incumbent,
        theta_star=state.theta_star,
        converged=converged,
        empty=empty,
        evaluations=state.L,
        iterations=iteration,
        ei_trace=ei_trace,
        history=state.history,
        elapsed=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Calibrated projection on top of E-A-M
# ---------------------------------------------------------------------------

@dataclass
class InferenceSettings:
    """
    Critical-level settings shared by every evaluated point.

    Attributes:
        alpha: Nominal level
        rho: rho-box radius (``math.inf`` disables the box)
        gms: GMS function kind
        kappa_rule: Thresholding sequence rule
        B: Bootstrap replicates
        seed: Bootstrap seed, common to all evaluated points
        tol: Root-finder tolerance
        bootstrap: ``multiplier`` or ``resample``
        method: ``calibrated``, ``onesided`` or ``as-proj``
    """

    alpha: float = 0.05
    rho: float = math.inf
    gms: str = 'phi1_hard'
    kappa_rule: str = 'sqrt_ln_n'
    B: int = 301
    seed: int = 0
    tol: float = DEFAULT_TOL
    bootstrap: str = 'multiplier'
    method: str = 'calibrated'

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ConfigurationError("alpha must lie in (0, 0.5)", 'inference.alpha')
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}", 'inference.method')

    def gms_config(self, n: int) -> GmsConfig:
        return GmsConfig.from_rule(self.gms, self.kappa_rule, n)


class ProjectionProblem(EamProblem):
    """
    The outer program of calibrated projection as an ``EamProblem``.

    Constraints are g_j(theta) = sqrt(n) mbar_j / sigma_j with the paired
    standard deviation on paired rows; the critical value is the chosen
    bootstrap critical level at theta.
    """

    def __init__(self, model: MomentModel, data: np.ndarray, settings: InferenceSettings,
                 p=None, f=None, f_grad=None, directions=None, sign: int = 1):
        self.model = model
        self.data = np.asarray(data, dtype=float)
        self.settings = settings
        self.directions = None if directions is None else np.atleast_2d(directions)
        self.n = len(self.data)
        self.gms = settings.gms_config(self.n)
        self._moments: Dict[bytes, SampleMoments] = {}
        super().__init__(model.theta_box, self._constraint_values, self._critical, p=p,
                         f=f, f_grad=f_grad, sign=sign)

    def flipped(self) -> 'ProjectionProblem':
        other = ProjectionProblem(self.model, self.data, self.settings, self.p, self.f,
                                  self.f_grad, self.directions, -self.sign)
        other._moments = self._moments
        other._cache = self._cache
        return other

    def sample_moments(self, theta: np.ndarray) -> SampleMoments:
        key = theta.tobytes()
        sm = self._moments.get(key)
        if sm is None:
            sm = studentized_moments(self.model, self.data, theta)
            if len(self._moments) >= _CACHE_LIMIT:
                self._moments.clear()
            self._moments[key] = sm
        return sm

    def _constraint_values(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        sm = self.sample_moments(theta)
        scale = sm.sigma_hat / sm.constraint_sigma()
        jac = np.sqrt(sm.n) * sm.D_hat * scale[:, None]
        return sm.constraint_values(), jac

    def critical_direction(self, theta: np.ndarray) -> np.ndarray:
        """Unit direction entering the bootstrap hyperplane at theta."""
        if self.f is not None:
            grad = np.asarray(self.f_grad(theta), dtype=float)
            norm_ = np.linalg.norm(grad)
            return grad / norm_ if norm_ > 0 else grad
        return self.p / np.linalg.norm(self.p)

    def _critical(self, theta: np.ndarray, sign: int) -> float:
        s = self.settings
        sm = self.sample_moments(theta)
        if s.method == 'as-proj':
            return as_projection_critical(self.model, self.data, theta, s.alpha, self.gms, s.B,
                                          s.seed, s.bootstrap, sm=sm)
        direction = self.critical_direction(theta)
        if s.method == 'onesided':
            return one_sided_critical(self.model, self.data, theta, s.alpha, s.rho, self.gms,
                                      s.B, sign * direction, s.seed, s.tol, s.bootstrap,
                                      sm=sm).value
        return critical_level(self.model, self.data, theta, s.alpha, s.rho, self.gms, s.B,
                              s.seed, s.tol, p=direction, directions=self.directions,
                              mode=s.bootstrap, sm=sm).value


@dataclass
class ConfidenceInterval:
    """
    Two-sided interval from the E-A-M runs in directions -p and p.

    Attributes:
        lower: Lower endpoint, None if empty
        upper: Upper endpoint, None if empty
        method: Critical-level method
        lower_run: Diagnostics of the lower run
        upper_run: Diagnostics of the upper run
    """

    lower: Optional[float]
    upper: Optional[float]
    method: str
    lower_run: EamResult
    upper_run: EamResult

    @property
    def empty(self) -> bool:
        return self.lower_run.empty or self.upper_run.empty

    def to_dict(self) -> dict:
        return {
            'lower': None if self.lower is None else float(self.lower),
            'upper': None if self.upper is None else float(self.upper),
            'method': self.method,
            'empty': bool(self.empty),
            'lower_run': self.lower_run.to_dict(),
            'upper_run': self.upper_run.to_dict(),
        }


def interval_from_problem(problem: EamProblem, options: EamOptions, method: str = 'calibrated',
                          n_jobs: int = 1) -> ConfidenceInterval:
    """
    Run both directions of a problem and assemble the interval.

    The two directions use independent exploration seeds and may run in parallel.
    """
    jobs = [
        (problem.flipped(), replace(options, seed=options.seed)),
        (problem, replace(options, seed=options.seed + 1)),
    ]
    if n_jobs == 1:
        runs = [run_direction(prob, opts) for prob, opts in jobs]
    else:
        runs = Parallel(n_jobs=min(2, n_jobs))(
            delayed(run_direction)(prob, opts) for prob, opts in jobs
        )
    low_run, up_run = runs
    lower = None if low_run.empty else -low_run.endpoint
    upper = None if up_run.empty else up_run.endpoint
    return ConfidenceInterval(lower, upper, method, low_run, up_run)


def confidence_interval(model: MomentModel, data: np.ndarray, p, settings: InferenceSettings,
                        options: Optional[EamOptions] = None, f=None, f_grad=None,
                        directions=None, n_jobs: int = 1) -> ConfidenceInterval:
    """
    Calibrated-projection confidence interval for p'theta or for f(theta).

    Args:
        model: Moment model
        data: Observation matrix
        p: Projection direction (ignored for the objective when f is given)
        settings: Critical-level settings; ``method`` picks calibrated,
            one-sided or uncalibrated projection
        options: E-A-M tuning
        f: Smooth function of theta whose interval is wanted
        f_grad: Gradient of f
        directions: (k, d) hyperplanes for joint coverage of k projections
        n_jobs: Run the two directions in parallel when > 1

    Returns:
        ConfidenceInterval: Endpoints and per-direction diagnostics
    """
    options = options or EamOptions()
    problem = ProjectionProblem(model, data, settings, p=p, f=f, f_grad=f_grad,
                                directions=directions)
    result = interval_from_problem(problem, options, settings.method, n_jobs)
    logger.info("%s interval [%s, %s] (%d + %d evaluations)", settings.method,
                _fmt(result.lower), _fmt(result.upper),
                result.lower_run.evaluations, result.upper_run.evaluations)
    return result


def _fmt(value: Optional[float]) -> str:
    return 'empty' if value is None else f"{value:.4f}"
