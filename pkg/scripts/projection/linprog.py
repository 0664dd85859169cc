"""
Small dense linear programs.

Two-phase tableau simplex with Bland's anti-cycling rule for systems
A lambda <= b with box bounds on lambda. Problems here are tiny (tens of
rows and columns), so everything is a dense numpy tableau.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import SimplexStallError

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10

OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
UNBOUNDED = 'unbounded'


@dataclass(frozen=True)
class LinearSystem:
    """
    Constraint set {lambda : A lambda <= b, lower <= lambda <= upper}.

    Rows with b = +inf are treated as absent. Bounds may be infinite.

    Attributes:
        A: (m, d) constraint matrix
        b: m-vector of right-hand sides
        box: (d, 2) array of lower/upper bounds
    """

    A: np.ndarray
    b: np.ndarray
    box: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        box = np.asarray(self.box, dtype=float).reshape(-1, 2)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if A.shape[1] != box.shape[0]:
            raise ValueError(f"A has {A.shape[1]} columns but box has {box.shape[0]} rows")
        if not np.all(np.isfinite(A)):
            raise ValueError("constraint matrix must be finite")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'box', box)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class LpResult:
    """
    Outcome of ``maximize``.

    Attributes:
        status: ``optimal``, ``infeasible`` or ``unbounded``
        value: Optimal objective value (None unless optimal)
        x: Maximizer (None unless optimal)
        iterations: Pivots spent over both phases
    """

    status: str
    value: Optional[float] = None
    x: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Infeasible(Exception):
    pass


class _Unbounded(Exception):
    pass


def _standard_form(system: LinearSystem) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Rewrite the system over nonnegative variables x with lambda = offset + M x.

    Returns:
        tuple: (A', b', M, offset) with A' x <= b', x >= 0
    """
    keep = np.isfinite(system.b) | (system.b < 0)
    A, b = system.A[keep], system.b[keep]
    if np.any(b == -np.inf):
        raise _Infeasible()

    # empty rows either hold trivially or make the system infeasible
    norms = np.max(np.abs(A), axis=1) if A.size else np.zeros(0)
    empty = norms <= 0.0
    if np.any(b[empty] < -FEASIBILITY_TOL):
        raise _Infeasible()
    A, b, norms = A[~empty], b[~empty], norms[~empty]
    A = A / norms[:, None]
    b = b / norms

    d = system.d
    lower, upper = system.box[:, 0], system.box[:, 1]
    if np.any(lower > upper):
        raise _Infeasible()

    columns = []
    offset = np.zeros(d)
    bound_rows = []
    for k in range(d):
        lo, hi = lower[k], upper[k]
        if np.isfinite(lo):
            offset[k] = lo
            columns.append((k, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[k] = hi
            columns.append((k, -1.0))
        else:
            columns.append((k, 1.0))
            columns.append((k, -1.0))

    M = np.zeros((d, len(columns)))
    for col, (k, sign) in enumerate(columns):
        M[k, col] = sign

    A_std = A @ M
    b_std = b - A @ offset
    if bound_rows:
        extra = np.zeros((len(bound_rows), len(columns)))
        for row, (col, width) in enumerate(bound_rows):
            extra[row, col] = 1.0
        A_std = np.vstack([A_std, extra])
        b_std = np.concatenate([b_std, [w for _, w in bound_rows]])
    return A_std, b_std, M, offset


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    basis[row] = col


def _run(T: np.ndarray, basis: np.ndarray, budget: int, n_cols: int) -> int:
    """Pivot to optimality on the first ``n_cols`` columns; returns pivots used."""
    used = 0
    while True:
        costs = T[-1, :n_cols]
        entering = np.flatnonzero(costs < -_COST_TOL)
        if entering.size == 0:
            return used
        if used >= budget:
            raise SimplexStallError(used)
        col = entering[0]
        column = T[:-1, col]
        positive = np.flatnonzero(column > _PIVOT_TOL)
        if positive.size == 0:
            raise _Unbounded()
        ratios = T[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = ties[np.argmin(basis[ties])]
        _pivot(T, basis, row, col)
        T[:-1, -1] = np.where(np.abs(T[:-1, -1]) < 1e-13, 0.0, T[:-1, -1])
        used += 1


def _solve(A: np.ndarray, b: np.ndarray, c: np.ndarray, budget: int) -> Tuple[np.ndarray, int]:
    """Maximize c'x s.t. Ax <= b, x >= 0. Raises _Infeasible or _Unbounded."""
    m, n = A.shape
    negative = np.flatnonzero(b < 0)
    n_art = negative.size
    width = n + m + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[negative, :] *= -1.0
    basis = np.arange(n, n + m)
    for a, row in enumerate(negative):
        T[row, n + m + a] = 1.0
        basis[row] = n + m + a

    used = 0
    if n_art:
        T[-1, n + m:width] = 1.0
        T[-1] -= T[negative].sum(axis=0)
        used += _run(T, basis, budget, width)
        scale = max(1.0, float(np.max(np.abs(b))))
        if -T[-1, -1] > FEASIBILITY_TOL * scale:
            raise _Infeasible()

        # drive zero-level artificials out of the basis, dropping redundant rows
        keep_rows = []
        for row in range(m):
            if basis[row] >= n + m:
                candidates = np.flatnonzero(np.abs(T[row, :n + m]) > 1e-9)
                if candidates.size == 0:
                    continue
                _pivot(T, basis, row, candidates[0])
            keep_rows.append(row)
        cols = list(range(n + m)) + [width]
        T = T[keep_rows + [m]][:, cols]
        basis = basis[keep_rows]

    costs = np.zeros(T.shape[1])
    costs[:n] = -c
    T[-1] = costs
    for row, var in enumerate(basis):
        if T[-1, var] != 0.0:
            T[-1] -= T[-1, var] * T[row]
    used += _run(T, basis, budget - used, n + m)

    x = np.zeros(n)
    for row, var in enumerate(basis):
        if var < n:
            x[var] = T[row, -1]
    return x, used


def maximize(c, system: LinearSystem) -> LpResult:
    """
    Solve max c'lambda over the system.

    Args:
        c: Objective vector of length d
        system: Constraint system

    Returns:
        LpResult: Status, optimal value and maximizer

    Raises:
        SimplexStallError: If the pivot cap 10 (m + d)^2 is exceeded
    """
    c = np.asarray(c, dtype=float).ravel()
    if c.shape[0] != system.d:
        raise ValueError(f"objective has length {c.shape[0]}, expected {system.d}")
    budget = 10 * (system.m + system.d) ** 2
    try:
        A_std, b_std, M, offset = _standard_form(system)
        c_std = M.T @ c
        if A_std.shape[0] == 0:
            # only sign constraints on x: optimum at x = 0 unless some cost is positive
            if np.any(c_std > _COST_TOL):
                return LpResult(UNBOUNDED)
            return LpResult(OPTIMAL, float(c @ offset), offset.copy())
        x, used = _solve(A_std, b_std, c_std, budget)
    except _Infeasible:
        return LpResult(INFEASIBLE)
    except _Unbounded:
        return LpResult(UNBOUNDED)
    lam = offset + M @ x
    return LpResult(OPTIMAL, float(c @ lam), lam, used)


def feasible(system: LinearSystem) -> bool:
    """
    Whether {lambda : A lambda <= b, lambda in box} is nonempty.

    Decided by phase 1 with a 1e-9 tolerance on normalised residuals.
    """
    return maximize(np.zeros(system.d), system).status != INFEASIBLE
