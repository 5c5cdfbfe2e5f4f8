"""Local and non-signaling polytopes: vertex enumeration and L1 projections by linear programming."""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from .behavior import BehaviorTable, Dims, l1_distance
from .exceptions import LpFailure, TooLarge

logger = logging.getLogger(__name__)

#: Feasibility tolerance handed to the LP solver.
LP_TOL = 1e-9

#: Slack on the L1 optimum when selecting the least-squares point among L1 minimizers.
TIE_BREAK_SLACK = 1e-9

MAX_VERTICES = 10**6

# entries of the QP solution closer than this to a bound are treated as active
_ACTIVE_SET_THRESHOLDS = (1e-7, 1e-6, 1e-5, 1e-8)

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True, eq=False)
class LocalVertexSet:
    dims: Dims
    strategies: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    vertices: tuple[BehaviorTable, ...] = field(repr=False)

    def __len__(self):
        return len(self.vertices)

    @property
    def matrix(self) -> np.ndarray:
        """Vertices as columns, rows in ``(x, y, a, b)`` ravel order."""
        return _vertex_matrix(self.dims)


@dataclass(frozen=True, eq=False)
class PolytopeResult:
    distance: float
    nearest: BehaviorTable
    weights: np.ndarray | None = field(default=None, repr=False)


def _strategy_pairs(dims: Dims):
    fs = itertools.product(range(dims.na), repeat=dims.nx)
    gs = list(itertools.product(range(dims.nb), repeat=dims.ny))
    return [(f, g) for f in fs for g in gs]


def _check_size(dims: Dims) -> None:
    count = dims.na**dims.nx * dims.nb**dims.ny
    if count > MAX_VERTICES:
        raise TooLarge(f"{count} local vertices exceeds the limit of {MAX_VERTICES}")


@lru_cache(maxsize=32)
def _vertex_matrix(dims: Dims) -> np.ndarray:
    _check_size(dims)
    pairs = _strategy_pairs(dims)
    M = np.zeros((dims.size, len(pairs)))
    xs, ys = np.meshgrid(np.arange(dims.nx), np.arange(dims.ny), indexing="ij")
    for k, (f, g) in enumerate(pairs):
        col = np.zeros(dims.shape)
        col[xs, ys, np.asarray(f)[xs], np.asarray(g)[ys]] = 1.0
        M[:, k] = col.ravel()
    M.setflags(write=False)
    return M


def enumerate_local_vertices(dims: Dims) -> LocalVertexSet:
    """All local deterministic strategies ``a = f(x)``, ``b = g(y)``, in lexicographic (f, g) order."""
    _check_size(dims)
    pairs = _strategy_pairs(dims)
    M = _vertex_matrix(dims)
    vertices = tuple(BehaviorTable(dims, M[:, k].reshape(dims.shape)) for k in range(len(pairs)))
    return LocalVertexSet(dims, tuple(pairs), vertices)


def _solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None)):
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
        method="highs", options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        raise LpFailure(f"LP solver failed: {res.message}")
    return res


def distance_to_local_polytope(p: BehaviorTable) -> PolytopeResult:
    """L1 distance from ``p`` to the convex hull of local deterministic strategies.

    Solves ``min sum(t)`` over convex weights ``w`` and slacks ``t >= |p - M w|``.
    """
    M = _vertex_matrix(p.dims)
    n, k = M.shape
    target = p.ravel()
    eye = np.eye(n)
    c = np.r_[np.zeros(k), np.ones(n)]
    A_ub = np.block([[M, -eye], [-M, -eye]])
    b_ub = np.r_[target, -target]
    A_eq = np.r_[np.ones(k), np.zeros(n)][None, :]
    res = _solve_lp(c, A_ub, b_ub, A_eq, [1.0])
    w = np.clip(res.x[:k], 0.0, None)
    w /= w.sum()
    nearest = BehaviorTable.from_array((M @ w).reshape(p.dims.shape), renormalize=True)
    return PolytopeResult(l1_distance(p, nearest), nearest, w)


def is_local(p: BehaviorTable, tol: float = LP_TOL) -> bool:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return distance_to_local_polytope(p).distance <= tol


@lru_cache(maxsize=32)
def nonsignaling_constraints(dims: Dims) -> tuple[np.ndarray, np.ndarray]:
    """Equality system ``A q = b`` for normalization plus both no-signaling conditions.

    Rows may be linearly dependent; callers must tolerate that.
    """
    nx, ny, na, nb = dims.shape
    idx = np.arange(dims.size).reshape(dims.shape)
    rows, rhs = [], []

    def row(plus, minus=np.array([], dtype=int)):
        r = np.zeros(dims.size)
        r[np.ravel(plus)] += 1.0
        r[np.ravel(minus)] -= 1.0
        return r

    for x, y in itertools.product(range(nx), range(ny)):
        rows.append(row(idx[x, y]))
        rhs.append(1.0)
    for x, a, y in itertools.product(range(nx), range(na), range(1, ny)):
        rows.append(row(idx[x, y, a, :], idx[x, 0, a, :]))
        rhs.append(0.0)
    for y, b, x in itertools.product(range(ny), range(nb), range(1, nx)):
        rows.append(row(idx[x, y, :, b], idx[0, y, :, b]))
        rhs.append(0.0)
    A, b = np.array(rows), np.array(rhs)
    A.setflags(write=False)
    b.setflags(write=False)
    return A, b


def nonsignaling_residual(q: np.ndarray, dims: Dims) -> float:
    A, b = nonsignaling_constraints(dims)
    return float(np.abs(A @ np.ravel(q) - b).max())


def _l1_to_nonsignaling(target: np.ndarray, A: np.ndarray, b: np.ndarray) -> float:
    n = target.size
    eye = np.eye(n)
    c = np.r_[np.zeros(n), np.ones(n)]
    A_ub = np.block([[eye, -eye], [-eye, -eye]])
    b_ub = np.r_[target, -target]
    A_eq = np.c_[A, np.zeros_like(A)]
    res = _solve_lp(c, A_ub, b_ub, A_eq, b)
    return float(res.fun)


def _least_squares_among_minimizers(target, A, b, budget):
    q = cp.Variable(target.size, nonneg=True)
    problem = cp.Problem(
        cp.Minimize(cp.sum_squares(q - target)),
        [A @ q == b, cp.norm1(q - target) <= budget],
    )
    with warnings.catch_warnings():
        # accuracy is re-established by _polish
        warnings.simplefilter("ignore", UserWarning)
        problem.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    if q.value is None:
        raise LpFailure(f"tie-break QP failed with status {problem.status}")
    return np.asarray(q.value)


def _polish(approx, target, A, b, l1_opt, eps=1e-7):
    """Re-solve the tie-break QP exactly on the active set guessed from ``approx``.

    Returns ``None`` when the guessed active set is inconsistent.
    """
    n = target.size
    zero = approx <= eps
    fixed = ~zero & (np.abs(approx - target) <= eps)
    free = ~zero & ~fixed
    sign = np.sign(approx - target) * free
    rows = [A]
    rhs = [b]
    for mask, values in ((zero, np.zeros(n)), (fixed, target)):
        sel = np.flatnonzero(mask)
        E = np.zeros((sel.size, n))
        E[np.arange(sel.size), sel] = 1.0
        rows.append(E)
        rhs.append(values[sel])
    # every L1 minimizer has norm exactly l1_opt
    rows.append(sign[None, :])
    rhs.append([l1_opt - target[zero].sum() + sign @ target])
    C = np.vstack(rows)
    d = np.concatenate([np.ravel(r) for r in rhs])
    m = C.shape[0]
    kkt = np.block([[2.0 * np.eye(n), C.T], [C, np.zeros((m, m))]])
    sol = np.linalg.lstsq(kkt, np.r_[2.0 * target, d], rcond=None)[0]
    q = sol[:n]
    ok = (
        q.min() >= -1e-13
        and np.all(sign * (q - target) >= -1e-13)
        and np.abs(q - target).sum() <= l1_opt + TIE_BREAK_SLACK
        and np.abs(A @ q - b).max() <= 1e-12
        and np.sum((q - target) ** 2) <= np.sum((approx - target) ** 2) + 1e-9
    )
    if not ok:
        return None
    return np.clip(q, 0.0, None)


def project_nonsignaling(p: BehaviorTable) -> PolytopeResult:
    """Closest non-signaling behavior in L1.

    L1 projections are not unique; among all L1-optimal points the one with
    the smallest squared deviation from ``p`` is returned.
    """
    A, b = nonsignaling_constraints(p.dims)
    target = p.ravel()
    if np.abs(A @ target - b).max() <= 1e-12:
        return PolytopeResult(0.0, p)
    l1_opt = _l1_to_nonsignaling(target, A, b)
    approx = _least_squares_among_minimizers(target, A, b, l1_opt + TIE_BREAK_SLACK)
    q = None
    for eps in _ACTIVE_SET_THRESHOLDS:
        q = _polish(approx, target, A, b, l1_opt, eps)
        if q is not None:
            break
    if q is None:
        logger.warning("active-set polish rejected; falling back to the QP solution")
        q = np.clip(approx, 0.0, None)
        q = q - np.linalg.lstsq(A, A @ q - b, rcond=None)[0]
        q = np.clip(q, 0.0, None)
    nearest = BehaviorTable.from_array(q.reshape(p.dims.shape), renormalize=True)
    return PolytopeResult(l1_distance(p, nearest), nearest)
