"""Exact weighted least-absolute-deviation regression.

minimize_b  sum_t c_t |y_t - x_t'b|,  c_t >= 0.

p = 1 reduces to a weighted median of y_t/x_t with weights c_t|x_t|, which is
also vectorised over many weight vectors for the bootstrap. For p >= 2 the
solver walks vertices of the LP (bases of p interpolated rows): at each vertex
it prices the 2p edge directions, takes the steepest descending one and runs
an exact piecewise-linear line search along it, so the objective strictly
decreases and the walk terminates. Optimality is confirmed by a subgradient
certificate; degenerate vertices that fail it are re-solved with HiGHS.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    DEGENERATE = "degenerate"
    UNBOUNDED = "unbounded"


@dataclass
class WladResult:
    beta: np.ndarray
    objective: float
    status: Status
    basis: tuple | None = None  # interpolated row indices (original numbering)
    iterations: int = 0


@dataclass(frozen=True)
class WladProblem:
    design: np.ndarray
    response: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.design, dtype=float))
        if X.shape[0] == 1 and np.ndim(self.design) == 1:
            X = X.T
        y = np.asarray(self.response, dtype=float).ravel()
        c = np.asarray(self.weights, dtype=float).ravel()
        if not (len(X) == len(y) == len(c)) or len(y) < 1:
            raise ValueError("design, response and weights must have the same nonzero length")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(c))):
            raise ValueError("WLAD problem contains NaN or Inf")
        if np.any(c < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "weights", c)

    def objective(self, beta) -> float:
        return wlad_objective(self.design, self.response, self.weights, beta)


def wlad_objective(X, y, c, beta) -> float:
    r = np.asarray(y) - np.asarray(X) @ np.asarray(beta, dtype=float)
    return float(np.dot(c, np.abs(r)))


# p = 1 ---------------------------------------------------------------------


def weighted_median_many(values: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower weighted median of ``values`` for each row of ``W``.

    Returns (medians, tie) where ``tie`` marks rows whose cumulative weight hits
    exactly one half, i.e. the minimiser is an interval.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum = np.cumsum(W[:, order], axis=1)
    half = 0.5 * cum[:, -1]
    k = np.argmax(cum >= half[:, None], axis=1)
    rows = np.arange(len(W))
    tie = np.abs(cum[rows, k] - half) <= 1e-12 * np.maximum(half, 1e-300)
    tie &= k + 1 < len(v)
    return v[k], tie


def _solve_p1_many(x: np.ndarray, y: np.ndarray, C: np.ndarray):
    nz = x != 0
    ratio = y[nz] / x[nz]
    W = C[:, nz] * np.abs(x[nz])
    med, tie = weighted_median_many(ratio, W)
    return med, tie


# p >= 2 --------------------------------------------------------------------


def _initial_basis(X, y, c) -> list[int]:
    sw = np.sqrt(c)
    b0, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    order = np.argsort(np.abs(y - X @ b0), kind="stable")
    p = X.shape[1]
    chosen: list[int] = []
    Q = np.zeros((0, p))
    for i in order:
        v = X[i] - Q.T @ (Q @ X[i])
        nv = np.linalg.norm(v)
        if nv > 1e-8 * max(np.linalg.norm(X[i]), 1e-300):
            chosen.append(int(i))
            Q = np.vstack([Q, v / nv])
            if len(chosen) == p:
                break
    return chosen


def _certificate_ok(X, c, r, zero_mask, tol) -> bool:
    """Is there u in [-1,1]^{zero rows} with sum_{r!=0} c s x + sum_{r=0} c u x = 0?"""
    g = (c[~zero_mask] * np.sign(r[~zero_mask])) @ X[~zero_mask]
    Z = (c[zero_mask][:, None] * X[zero_mask]).T
    k = Z.shape[1]
    if k == 0:
        return bool(np.all(np.abs(g) <= tol))
    res = optimize.linprog(np.zeros(k), A_eq=Z, b_eq=-g, bounds=[(-1.0, 1.0)] * k,
                           method="highs")
    return res.status == 0


def _solve_lp(X, y, c) -> np.ndarray:
    n, p = X.shape
    cost = np.concatenate([np.zeros(p), c, c])
    A = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = optimize.linprog(cost, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP fallback failed: {res.message}")
    return res.x[:p]


def _vertex_walk(X, y, c, basis, max_iter):
    n, p = X.shape
    B = list(basis)
    scale_r = 1e-12 * (np.max(np.abs(y)) + np.max(np.abs(X)) + 1.0)
    it = 0
    while True:
        XB = X[B]
        beta = np.linalg.solve(XB, y[B])
        Binv = np.linalg.inv(XB)
        r = y - X @ beta
        r[B] = 0.0
        A = X @ Binv  # A[t, j] = x_t . d_j, with X_B d_j = e_j
        nonbasic = np.ones(n, dtype=bool)
        nonbasic[B] = False
        zero = nonbasic & (np.abs(r) <= scale_r)
        live = nonbasic & ~zero
        G = (c[live] * np.sign(r[live])) @ A[live]
        Z = c[zero] @ np.abs(A[zero]) if zero.any() else np.zeros(p)
        cB = c[B]
        slopes = np.concatenate([cB - G + Z, cB + G + Z])
        size = cB + c[nonbasic] @ np.abs(A[nonbasic])
        tol = 1e-11 * np.concatenate([size, size])
        k = int(np.argmin(slopes))
        if slopes[k] >= -tol[k] or it >= max_iter:
            return beta, B, r, zero, slopes, tol, it
        j = k % p
        sigma = 1.0 if k < p else -1.0
        a = sigma * A[:, j]
        cand = live & (a != 0)
        tau = r[cand] / a[cand]
        pos = tau > 0
        idx = np.flatnonzero(cand)[pos]
        tau = tau[pos]
        order = np.argsort(tau, kind="stable")
        slope = slopes[k] + 2.0 * np.cumsum(c[idx[order]] * np.abs(a[idx[order]]))
        hit = np.flatnonzero(slope >= 0)
        if hit.size == 0:
            raise ArithmeticError("objective unbounded below along an edge")
        B[j] = int(idx[order[hit[0]]])
        it += 1


def solve_wlad(design, response=None, weights=None, basis=None, max_iter: int | None = None
               ) -> WladResult:
    """Minimise sum_t c_t |y_t - x_t'b| exactly.

    Accepts a ``WladProblem`` or the three arrays. ``basis`` optionally warm
    starts the vertex walk with p row indices (for example from a previous
    solve on the same rows with different weights).
    """
    prob = design if isinstance(design, WladProblem) else WladProblem(design, response, weights)
    X, y, c = prob.design, prob.response, prob.weights
    p = X.shape[1]
    keep = np.flatnonzero(c > 0)
    if keep.size == 0:
        return WladResult(np.zeros(p), 0.0, Status.DEGENERATE)
    Xk, yk, ck = X[keep], y[keep], c[keep]

    rank = np.linalg.matrix_rank(Xk)
    if rank < p:
        if rank == 0:
            return WladResult(np.zeros(p), float(np.dot(ck, np.abs(yk))), Status.DEGENERATE)
        _, _, Vt = np.linalg.svd(Xk, full_matrices=False)
        V = Vt[:rank].T
        sub = solve_wlad(Xk @ V, yk, ck)
        beta = V @ sub.beta
        return WladResult(beta, wlad_objective(Xk, yk, ck, beta), Status.DEGENERATE)

    if p == 1:
        med, tie = _solve_p1_many(Xk[:, 0], yk, ck[None, :])
        beta = np.array([med[0]])
        status = Status.DEGENERATE if tie[0] else Status.OPTIMAL
        return WladResult(beta, wlad_objective(Xk, yk, ck, beta), status)

    start = None
    if basis is not None:
        pos = np.searchsorted(keep, basis)
        if np.all(pos < keep.size) and np.all(keep[np.minimum(pos, keep.size - 1)] == basis):
            cand = [int(i) for i in pos]
            if len(set(cand)) == p and np.linalg.matrix_rank(Xk[cand]) == p:
                start = cand
    if start is None:
        start = _initial_basis(Xk, yk, ck)
    if max_iter is None:
        max_iter = 50 * len(yk) + 100
    beta, B, r, zero, slopes, tol, it = _vertex_walk(Xk, yk, ck, start, max_iter)

    converged = it < max_iter and bool(np.all(slopes >= -tol))
    if converged and zero.any():
        zmask = zero.copy()
        zmask[B] = True
        converged = _certificate_ok(Xk, ck, r, zmask, 1e-9 * ck.sum())
    if not converged:
        beta = _solve_lp(Xk, yk, ck)
        return WladResult(beta, wlad_objective(Xk, yk, ck, beta), Status.DEGENERATE, None, it)
    status = Status.DEGENERATE if np.any(slopes <= tol) else Status.OPTIMAL
    return WladResult(beta, wlad_objective(Xk, yk, ck, beta), status,
                      tuple(int(keep[i]) for i in B), it)


def solve_wlad_many(design, response, weight_rows, basis=None) -> tuple[np.ndarray, np.ndarray]:
    """Solve one design/response against many weight vectors.

    Returns (betas of shape (M, p), status array). Rows of ``weight_rows`` may
    contain zeros; p = 1 is fully vectorised.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(response, dtype=float)
    C = np.atleast_2d(np.asarray(weight_rows, dtype=float))
    M, p = len(C), X.shape[1]
    if p == 1 and np.all(C.sum(axis=1) > 0) and np.any(X[:, 0] != 0):
        x = X[:, 0]
        if np.count_nonzero(x[None, :] * (C > 0), axis=1).min() > 0:
            med, tie = _solve_p1_many(x, y, C)
            status = np.where(tie, Status.DEGENERATE.value, Status.OPTIMAL.value)
            return med[:, None], status
    betas = np.empty((M, p))
    status = np.empty(M, dtype=object)
    for m in range(M):
        res = solve_wlad(X, y, C[m], basis=basis)
        betas[m] = res.beta
        status[m] = res.status.value
    return betas, status.astype(str)


def solve_wls(design, response=None, weights=None) -> np.ndarray:
    """Weighted least squares via the normal equations; least-norm if singular."""
    prob = design if isinstance(design, WladProblem) else WladProblem(design, response, weights)
    X, y, c = prob.design, prob.response, prob.weights
    G = X.T @ (c[:, None] * X)
    rhs = X.T @ (c * y)
    if np.linalg.matrix_rank(G) < X.shape[1]:
        warnings.warn("singular weighted Gram matrix: returning least-norm solution", stacklevel=2)
        sw = np.sqrt(c)
        beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
        return beta
    return np.linalg.solve(G, rhs)


def subgradient_gap(X, y, c, beta, zero_tol: float = 1e-9) -> float:
    """Largest coordinate violation of the LAD optimality condition (<= 0 when certified).

    For each j: |sum_{r!=0} c sign(r) x_j| - sum_{r=0} c |x_j|.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = np.asarray(y) - X @ beta
    zero = np.abs(r) <= zero_tol * (1.0 + np.abs(np.asarray(y)))
    lhs = np.abs((c[~zero] * np.sign(r[~zero])) @ X[~zero])
    rhs = c[zero] @ np.abs(X[zero]) if zero.any() else np.zeros(X.shape[1])
    return float(np.max(lhs - rhs))
