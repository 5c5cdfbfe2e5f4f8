"""Asymptotic non-local capacity: min over the extension set V of the capacity of x -> (b_1..b_M).

An extension ``rho(a, b_1..b_M | x)`` lies in V when each of its ``(a, b_m)``
marginals equals ``P(a b | x, y=m)``. The minimized functional is the
capacity of the channel ``rho(b_1..b_M | x)``, in bits.

Two minimizers are available. ``method="conic"`` (default) solves the
equivalent jointly convex program ``min_{W in V, r} max_x D(W_x || r)`` with an
exponential-cone solver. ``method="frank-wolfe"`` runs Frank-Wolfe over V.
Either way the returned certificate is recomputed from scratch: the upper
bound comes from Blahut-Arimoto on the returned channel, the lower bound
from the linearization of the mutual information minimized over V. When
that linear bound is loose (near-zero channel entries make the gradient
unreliable) a dual bound is tried as well: for a fixed input law ``pi`` and
multipliers ``nu`` on the equalities of V, ``b . nu`` bounds the optimum from
below whenever ``sum_x pi_x exp(c_xk / pi_x) <= 1`` for every output ``k``,
with ``c_xk = max_a (A^T nu)_{x,a,k}``. Feasibility of ``nu`` is checked (and
repaired) in numpy, so the solver that proposes ``nu`` is never trusted.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Literal

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog, minimize_scalar
from scipy.special import logsumexp

from .behavior import BehaviorTable, Dims, signaling_deficit
from .exceptions import InfeasibleV, InvalidParameter, LpFailure, NonConvergence, SignalingInput
from .polytope import project_nonsignaling

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)

#: Floor applied to probabilities inside logarithms of the gradient.
LOG_FLOOR = 1e-12

#: Inputs whose signaling deficit exceeds this are rejected.
SIGNALING_LIMIT = 1e-6

#: Inputs signaling by more than this (but within the limit) are cleaned by L1 projection.
SIGNALING_CLEANUP = 1e-12

BA_MAX_ITER = 200_000

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Linear description ``A_eq rho = b_eq, rho >= 0`` of the extension set.

    Variables are ``rho[x, a, k]`` raveled in C order, where ``k`` enumerates
    the outcome strings ``b_1..b_M`` lexicographically (see ``strings``).
    """

    dims: Dims
    A_eq: np.ndarray = field(repr=False)
    b_eq: np.ndarray = field(repr=False)
    strings: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def n_strings(self) -> int:
        return len(self.strings)

    @property
    def n_vars(self) -> int:
        return self.dims.nx * self.dims.na * self.n_strings

    @property
    def var_shape(self) -> tuple[int, int, int]:
        return (self.dims.nx, self.dims.na, self.n_strings)

    def channel(self, rho: np.ndarray) -> np.ndarray:
        """Marginal channel ``W[x, k] = sum_a rho[x, a, k]``."""
        return np.reshape(rho, self.var_shape).sum(axis=1)

    def residual(self, rho: np.ndarray) -> float:
        return float(np.abs(self.A_eq @ np.ravel(rho) - self.b_eq).max())


@dataclass(frozen=True, eq=False)
class ExtendedDistribution:
    """``rho[x, a, b_1, ..., b_M]``, a distribution over ``(a, b_1..b_M)`` for each ``x``."""

    dims: Dims
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        shape = (self.dims.nx, self.dims.na) + (self.dims.nb,) * self.dims.ny
        if rho.shape != shape:
            rho = rho.reshape(shape)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def flat(self) -> np.ndarray:
        return self.rho.ravel()

    def channel(self) -> np.ndarray:
        """Channel ``x -> (b_1..b_M)`` as a ``(nx, nb**ny)`` row-stochastic matrix."""
        return self.rho.sum(axis=1).reshape(self.dims.nx, -1)

    def marginal(self, m: int) -> np.ndarray:
        """The ``(a, b_m)`` marginal as an array ``[x, a, b]``."""
        axes = tuple(2 + j for j in range(self.dims.ny) if j != m)
        return self.rho.sum(axis=axes)


@dataclass(frozen=True, eq=False)
class CapacityCertificate:
    value: float
    rho: ExtendedDistribution = field(repr=False)
    input_dist: np.ndarray
    gap: float
    lower: float
    upper: float
    method: str = "conic"
    iterations: int = 0
    converged: bool = True


def _strings(dims: Dims) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product(range(dims.nb), repeat=dims.ny))


def _v_equalities(p: BehaviorTable, strings) -> tuple[np.ndarray, np.ndarray]:
    nx, ny, na, nb = p.dims.shape
    K = len(strings)
    strings_arr = np.array(strings)
    A = np.zeros((nx, ny, na, nb, nx, na, K))
    for x, m, a, b in itertools.product(range(nx), range(ny), range(na), range(nb)):
        A[x, m, a, b, x, a, strings_arr[:, m] == b] = 1.0
    return A.reshape(p.dims.size, nx * na * K), p.ravel().copy()


def _clean_input(p: BehaviorTable) -> BehaviorTable:
    deficit = signaling_deficit(p)
    if deficit > SIGNALING_LIMIT:
        raise SignalingInput(
            f"signaling deficit {deficit:.3g} exceeds {SIGNALING_LIMIT:g}; project onto the "
            "non-signaling polytope first"
        )
    if deficit > SIGNALING_CLEANUP:
        return project_nonsignaling(p).nearest
    return p


def _lp(c, A_eq, b_eq):
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise LpFailure(f"LP over V failed: {res.message}")
    return res


def build_v_polytope(p: BehaviorTable, check_feasible: bool = True) -> VPolytope:
    """Equality constraints describing V for a non-signaling behavior ``p``."""
    p = _clean_input(p)
    strings = _strings(p.dims)
    A, b = _v_equalities(p, strings)
    V = VPolytope(p.dims, A, b, strings)
    if check_feasible:
        res = linprog(
            np.zeros(V.n_vars), A_eq=A, b_eq=b, bounds=(0, None),
            method="highs", options=_HIGHS_OPTIONS,
        )
        if res.status == 2:
            raise InfeasibleV("no extension reproduces every (a, b_m) marginal")
        if res.status != 0:
            raise LpFailure(f"feasibility LP failed: {res.message}")
    return V


def product_extension(p: BehaviorTable) -> ExtendedDistribution:
    """``rho = P(a|x) * prod_m P(b_m|y=m)``; lies in V only when ``p`` is a product behavior."""
    pa = p.alice_marginals()[:, 0, :]  # [x, a]
    pb = p.bob_marginals()[0]  # [y, b]
    rho = pa
    for m in range(p.dims.ny):
        rho = rho[..., None] * pb[m].reshape((1,) * rho.ndim + (-1,))
    return ExtendedDistribution(p.dims, rho)


def is_product(p: BehaviorTable, tol: float = 1e-12) -> bool:
    outer = p.alice_marginals()[:, :, :, None] * p.bob_marginals()[:, :, None, :]
    return signaling_deficit(p) <= tol and float(np.abs(outer - p.p).max()) <= tol


# Blahut-Arimoto ---------------------------------------------------------------------


def _divergences(W: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``D(W_x || q)`` in nats for every row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(W > 0, W * np.log(W / q), 0.0)
    return terms.sum(axis=1)


def _blahut_arimoto(W: np.ndarray, tol_bits: float, max_iter: int = BA_MAX_ITER):
    """Returns ``(lower, upper, input_dist, iterations)`` with bounds in bits."""
    nx = W.shape[0]
    pi = np.full(nx, 1.0 / nx)
    tol = tol_bits * LN2
    lower = upper = 0.0
    for it in range(1, max_iter + 1):
        q = pi @ W
        div = _divergences(W, q)
        lower = float(pi @ div)
        upper = float(div.max())
        if upper - lower <= tol:
            return max(lower, 0.0) / LN2, upper / LN2, pi, it
        pi = pi * np.exp(div - upper)
        pi /= pi.sum()
    raise NonConvergence(
        f"Blahut-Arimoto did not close to {tol_bits:g} bits in {max_iter} iterations",
        lower=lower / LN2, upper=upper / LN2, result=pi,
    )


def channel_capacity(channel, tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Capacity in bits of the channel ``channel[x, y] = q(y|x)`` and an optimal input law.

    The returned value is the mutual information of the returned input
    distribution and lies within ``tol`` of the capacity.
    """
    W = np.asarray(channel, dtype=float)
    if W.ndim != 2:
        raise InvalidParameter("channel must be a 2-d (input, output) matrix")
    if tol <= 0:
        raise InvalidParameter("tol must be > 0")
    if W.min() < 0 or np.abs(W.sum(axis=1) - 1.0).max() > 1e-9:
        raise InvalidParameter("channel rows must be probability distributions")
    lower, _, pi, _ = _blahut_arimoto(W, tol)
    return lower, pi


def mutual_information(input_dist: np.ndarray, W: np.ndarray) -> float:
    """``I(X; Y)`` in bits."""
    q = input_dist @ W
    return float(input_dist @ _divergences(W, q)) / LN2


# certificate --------------------------------------------------------------------------


def _gradient(W: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Gradient in bits of ``I(pi, W)`` with respect to ``W`` (up to per-row constants)."""
    q = pi @ W
    ratio = np.maximum(W, LOG_FLOOR) / np.maximum(q, LOG_FLOOR)
    return pi[:, None] * np.log2(ratio)


def _linear_oracle(V: VPolytope, grad_W: np.ndarray) -> np.ndarray:
    c = np.broadcast_to(grad_W[:, None, :], V.var_shape).ravel()
    return _lp(c, V.A_eq, V.b_eq).x


def _normalization_rows(V: VPolytope) -> np.ndarray:
    """``u`` with ``A^T u = 1``: the constraints of the first Bob setting sum to normalization."""
    u = np.zeros((V.dims.nx, V.dims.ny, V.dims.na, V.dims.nb))
    u[:, 0] = 1.0
    return u.ravel()


def dual_bound(V: VPolytope, pi: np.ndarray, nu: np.ndarray) -> float:
    """Certified lower bound (bits) on the capacity minimum from multipliers ``nu``.

    Infeasible ``nu`` is shifted along the normalization rows until the
    exponential constraints hold, which lowers the bound accordingly.
    """
    pi = np.maximum(np.asarray(pi, dtype=float), 1e-300)
    c = np.reshape(V.A_eq.T @ nu, V.var_shape).max(axis=1)  # [x, k]
    log_s = logsumexp(np.log(pi)[:, None] + c / pi[:, None], axis=0)
    # exp((c - d) / pi) <= exp(c / pi) exp(-d) for d >= 0 and pi <= 1
    shift = max(float(log_s.max()), 0.0)
    value = float(V.b_eq @ nu) - shift * float(V.b_eq @ _normalization_rows(V))
    return value / LN2


def _dual_multipliers(V: VPolytope, pi: np.ndarray) -> np.ndarray | None:
    nx, na, K = V.var_shape
    nu = cp.Variable(V.A_eq.shape[0])
    c = cp.Variable((nx, K))
    AT = [V.A_eq.T[np.arange(V.n_vars).reshape(V.var_shape)[:, a, :].ravel()] for a in range(na)]
    inv = 1.0 / np.maximum(pi, 1e-12)
    constraints = [AT[a] @ nu <= cp.vec(c, order="C") for a in range(na)]
    constraints.append(pi @ cp.exp(cp.multiply(inv[:, None], c)) <= 1.0)
    problem = cp.Problem(cp.Maximize(V.b_eq @ nu), constraints)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            problem.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
        except cp.SolverError:
            return None
    return None if nu.value is None else np.asarray(nu.value)


def _certify(V: VPolytope, rho: np.ndarray, inner_tol: float, tol: float | None = None):
    """Bounds on the optimum from a feasible ``rho``; also returns the oracle vertex.

    With ``tol`` given, a gap above it triggers the dual bound.
    """
    W = V.channel(rho)
    ba_lower, ba_upper, pi, _ = _blahut_arimoto(W, inner_tol)
    grad = _gradient(W, pi)
    vertex = _linear_oracle(V, grad)
    slope = float(np.sum(grad * (V.channel(vertex) - W)))
    lower = max(ba_lower + min(slope, 0.0), 0.0)
    if tol is not None and ba_upper - lower > tol:
        nu = _dual_multipliers(V, pi)
        if nu is not None:
            lower = max(lower, dual_bound(V, pi, nu))
    return {
        "value": ba_lower,
        "upper": ba_upper,
        "lower": lower,
        "gap": max(ba_upper - lower, 0.0),
        "input_dist": pi,
        "vertex": vertex,
    }


def _repair(V: VPolytope, rho: np.ndarray) -> np.ndarray:
    """Nearest point of V in L1 to an approximately feasible ``rho``."""
    n = V.n_vars
    eye = np.eye(n)
    c = np.r_[np.zeros(n), np.ones(n)]
    A_ub = np.block([[eye, -eye], [-eye, -eye]])
    b_ub = np.r_[rho, -rho]
    A_eq = np.c_[V.A_eq, np.zeros_like(V.A_eq)]
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=V.b_eq, bounds=(0, None),
        method="highs", options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        raise LpFailure(f"repair LP failed: {res.message}")
    return np.clip(res.x[:n], 0.0, None)


# minimizers ---------------------------------------------------------------------------


def _solve_conic(V: VPolytope) -> np.ndarray:
    nx, na, K = V.var_shape
    rho = cp.Variable(V.n_vars, nonneg=True)
    r = cp.Variable(K, nonneg=True)
    s = cp.Variable()
    grid = np.arange(V.n_vars).reshape(V.var_shape)
    constraints = [V.A_eq @ rho == V.b_eq, cp.sum(r) == 1]
    for x in range(nx):
        S = np.zeros((K, V.n_vars))
        for a in range(na):
            S[np.arange(K), grid[x, a]] = 1.0
        constraints.append(cp.sum(cp.rel_entr(S @ rho, r)) <= s)
    problem = cp.Problem(cp.Minimize(s), constraints)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        problem.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    if rho.value is None:
        raise LpFailure(f"conic solver failed with status {problem.status}")
    return np.clip(np.asarray(rho.value), 0.0, None)


def central_extension(V: VPolytope) -> np.ndarray:
    """Point of V closest in Euclidean norm to the uniform extension."""
    rho = cp.Variable(V.n_vars, nonneg=True)
    uniform = np.full(V.n_vars, 1.0 / (V.dims.na * V.n_strings))
    problem = cp.Problem(cp.Minimize(cp.sum_squares(rho - uniform)), [V.A_eq @ rho == V.b_eq])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        problem.solve(solver=cp.CLARABEL)
    if rho.value is None:
        raise LpFailure(f"centering QP failed with status {problem.status}")
    return _repair(V, np.clip(np.asarray(rho.value), 0.0, None))


def _capacity_along(V: VPolytope, rho: np.ndarray, direction: np.ndarray, inner_tol: float):
    def objective(t):
        W = V.channel(rho + t * direction)
        return _blahut_arimoto(np.clip(W, 0.0, None), inner_tol)[0]

    res = minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
    # the bounded search never probes the endpoints
    candidates = [(res.fun, res.x), (objective(0.0), 0.0), (objective(1.0), 1.0)]
    return min(candidates)[1]


def _frank_wolfe(V: VPolytope, rho: np.ndarray, tol: float, inner_tol: float, max_iter: int):
    cert = _certify(V, rho, inner_tol, tol)
    it = 0
    while cert["gap"] > tol and it < max_iter:
        it += 1
        direction = cert["vertex"] - rho
        step = _capacity_along(V, rho, direction, inner_tol)
        if step == 0.0:
            break
        rho = np.clip(rho + step * direction, 0.0, None)
        cert = _certify(V, rho, inner_tol, tol)
    return rho, cert, it


def nonlocal_capacity_asym(
    p: BehaviorTable,
    tol: float = 1e-6,
    method: Literal["conic", "frank-wolfe"] = "conic",
    max_iter: int = 500,
    strict: bool = True,
) -> CapacityCertificate:
    """Asymptotic non-local capacity of a non-signaling behavior, in bits.

    The certificate's ``[lower, upper]`` brackets the optimum and ``gap`` is
    their difference. When ``gap`` cannot be brought below ``tol`` a
    :class:`NonConvergence` carrying the certificate is raised, or, with
    ``strict=False``, the certificate is returned with ``converged=False``.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be > 0")
    V = build_v_polytope(p)
    inner_tol = tol / 10.0
    if method == "conic":
        rho = _repair(V, _solve_conic(V))
    elif method == "frank-wolfe":
        rho = product_extension(p).flat() if is_product(p) else central_extension(V)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    rho, cert, iterations = _frank_wolfe(V, rho, tol, inner_tol, max_iter)
    certificate = CapacityCertificate(
        value=cert["value"],
        rho=ExtendedDistribution(p.dims, rho.reshape(V.var_shape)),
        input_dist=cert["input_dist"],
        gap=cert["gap"],
        lower=cert["lower"],
        upper=cert["upper"],
        method=method,
        iterations=iterations,
        converged=cert["gap"] <= tol,
    )
    if not certificate.converged:
        msg = f"capacity gap {certificate.gap:.3g} above tol {tol:g} after {iterations} iterations"
        if strict:
            raise NonConvergence(msg, certificate.lower, certificate.upper, certificate)
        logger.warning(msg)
    return certificate


def zero_communication_feasible(p: BehaviorTable) -> bool:
    """Whether some extension in V has a channel independent of ``x``.

    Such an extension is a shared-randomness simulation, so this holds
    exactly for local behaviors and is the exact zero set of the capacity.
    """
    V = build_v_polytope(p, check_feasible=False)
    nx, na, K = V.var_shape
    grid = np.arange(V.n_vars).reshape(V.var_shape)
    rows = []
    for x, k in itertools.product(range(1, nx), range(K)):
        r = np.zeros(V.n_vars)
        r[grid[x, :, k]] = 1.0
        r[grid[0, :, k]] -= 1.0
        rows.append(r)
    A = np.vstack([V.A_eq] + rows) if rows else V.A_eq
    b = np.r_[V.b_eq, np.zeros(len(rows))]
    res = linprog(
        np.zeros(V.n_vars), A_eq=A, b_eq=b, bounds=(0, None), method="highs", options=_HIGHS_OPTIONS
    )
    if res.status not in (0, 2):
        raise LpFailure(f"feasibility LP failed: {res.message}")
    return res.status == 0
