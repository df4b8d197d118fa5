"""l1 / lp regression: batched IRLS solver, an exact enumeration oracle for
tiny instances, and multi-response wrappers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError
from .linalg import numerical_rank, svd

DELTA_FLOOR = 1e-10
ANNEAL_TOL = 1e-4


@dataclass
class RegressionResult:
    solution: np.ndarray
    cost: float
    iterations: int
    converged: bool


def _cost(R: np.ndarray, p: float) -> np.ndarray:
    """Column-wise ``sum |r|^p`` (the p-th power of the lp norm)."""
    a = np.abs(R)
    return a.sum(axis=0) if p == 1.0 else (a**p).sum(axis=0)


def _orthonormal_range(X: np.ndarray):
    """Orthonormal basis ``Q`` of range(X) and the map ``z -> x`` with
    ``X x = Q z``."""
    res = svd(X)
    r = numerical_rank(res.singular_values, X.shape)
    Q = res.left_vectors[:, :r]
    back = res.right_vectors[:, :r] / res.singular_values[:r]
    return Q, back


def _polish_basic(Q: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Snap each l1 solution to the basic solution interpolating its
    ``r`` smallest residuals when that lowers the cost."""
    r = Q.shape[1]
    out = Z.copy()
    R = Q @ Z - Y
    for j in range(Y.shape[1]):
        rows = np.argsort(np.abs(R[:, j]), kind="stable")[:r]
        sub = Q[rows]
        if np.linalg.matrix_rank(sub) < r:
            continue
        z = np.linalg.solve(sub, Y[rows, j])
        if np.abs(Q @ z - Y[:, j]).sum() < np.abs(R[:, j]).sum():
            out[:, j] = z
    return out


def irls_batch(X, Y, p: float = 1.0, tol: float = 1e-9, max_iters: int = 500):
    """Solve ``min_x ||X x - y||_p`` for every column ``y`` of ``Y``.

    Weights ``max(|r|, delta)^(p-2)``; ``delta`` starts at
    ``1e-2 * ||y||_1 / n`` and halves whenever the relative cost change
    stalls below ``ANNEAL_TOL``, down to 1e-10; at the floor the iteration
    stops once the change drops below ``tol``. Each column runs the
    identical iteration it would run alone. Returns ``(solutions, costs, iterations,
    converged)`` with costs in the lp norm.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if Y.shape[0] != n:
        raise ShapeError(f"X is {X.shape} but Y has {Y.shape[0]} rows")
    if not 1.0 <= p <= 2.0:
        raise InvalidInputError(f"p must lie in [1, 2], got {p}")
    c = Y.shape[1]
    sol = np.zeros((d, c))
    iters = np.zeros(c, dtype=int)
    done = np.zeros(c, dtype=bool)
    if c == 0 or n == 0:
        return sol, np.zeros(c), iters, np.ones(c, dtype=bool)
    Q, back = _orthonormal_range(X)
    r = Q.shape[1]
    zero_rhs = ~np.any(Y != 0, axis=0)
    done |= zero_rhs
    if r == 0 or p == 2.0:
        Z = Q.T @ Y
        Z[:, zero_rhs] = 0.0
        sol = back @ Z
        R = X @ sol - Y
        return sol, _cost(R, p) ** (1.0 / p), iters, np.ones(c, dtype=bool)

    Z = Q.T @ Y
    Z[:, zero_rhs] = 0.0
    delta = np.maximum(1e-2 * np.abs(Y).sum(axis=0) / n, DELTA_FLOOR)
    cost = _cost(Q @ Z - Y, p)
    exact_level = 1e-15 * _cost(Y, p)
    best_Z, best_cost = Z.copy(), cost.copy()
    for it in range(1, max_iters + 1):
        live = np.flatnonzero(~done)
        if live.size == 0:
            break
        Rl = Q @ Z[:, live] - Y[:, live]
        W = np.maximum(np.abs(Rl), delta[live]) ** (p - 2.0)
        QW = W.T[:, :, None] * Q  # (c, n, r)
        G = QW.transpose(0, 2, 1) @ Q
        rhs = (Q.T @ (W * Y[:, live])).T
        Znew = np.linalg.solve(G, rhs[..., None])[..., 0].T
        new_cost = _cost(Q @ Znew - Y[:, live], p)
        Z[:, live] = Znew
        iters[live] = it
        improved = new_cost < best_cost[live]
        best_Z[:, live[improved]] = Znew[:, improved]
        best_cost[live[improved]] = new_cost[improved]
        scale = np.maximum(cost[live], np.finfo(float).tiny)
        change = np.abs(cost[live] - new_cost)
        cost[live] = new_cost
        at_floor = delta[live] <= DELTA_FLOOR
        done[live[(change <= tol * scale) & at_floor]] = True
        shrink = live[(change <= ANNEAL_TOL * scale) & ~at_floor]
        delta[shrink] = np.maximum(delta[shrink] / 2.0, DELTA_FLOOR)
        # exact fit: nothing left to reweight
        done[live[new_cost <= exact_level[live]]] = True

    if p == 1.0:
        best_Z = _polish_basic(Q, Y, best_Z)
        best_cost = _cost(Q @ best_Z - Y, p)
    sol = back @ best_Z
    costs = _cost(X @ sol - Y, p) ** (1.0 / p)
    return sol, costs, iters, done


def l1_regress(A, b, p: float = 1.0, tol: float = 1e-9, max_iters: int = 500) -> RegressionResult:
    """``argmin_x ||A x - b||_p`` by IRLS."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError("A must be a non-empty 2-d array")
    sol, costs, iters, done = irls_batch(A, b[:, None], p, tol, max_iters)
    return RegressionResult(sol[:, 0], float(costs[0]), int(iters[0]), bool(done[0]))


def l1_regress_oracle(A, b) -> RegressionResult:
    """Exact l1 regression by enumerating basic solutions.

    Some optimum interpolates ``d`` rows of a full-column-rank ``A``, so the
    minimum over all ``d``-row subsets is the global minimum.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    n, d = A.shape
    if n > 16 or d > 4:
        raise InvalidInputError(f"oracle limited to n <= 16, d <= 4 (got {n}x{d})")
    best_x, best_cost, count = None, np.inf, 0
    for rows in itertools.combinations(range(n), d):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12 * max(1.0, np.abs(sub).max() ** d):
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        cost = np.abs(A @ x - b).sum()
        count += 1
        if cost < best_cost:
            best_x, best_cost = x, cost
    if best_x is None:
        best_x = np.linalg.lstsq(A, b, rcond=None)[0]
        best_cost = np.abs(A @ best_x - b).sum()
    return RegressionResult(best_x, float(best_cost), count, True)


def multi_response_regress(U, A, mode: str = "l1", p: float = 1.0, tol: float = 1e-9,
                           max_iters: int = 500) -> np.ndarray:
    """``V`` (k x d) fitting every column of ``A`` on the columns of ``U``.

    ``mode="l2"`` returns ``U^+ A``; ``mode="l1"`` solves one lp regression
    per column of ``A`` (``p`` selects the norm).
    """
    U = np.asarray(U, dtype=float)
    A = np.asarray(A, dtype=float)
    if U.shape[0] != A.shape[0]:
        raise ShapeError(f"U is {U.shape}, A is {A.shape}")
    if mode == "l2":
        return np.linalg.lstsq(U, A, rcond=None)[0]
    if mode != "l1":
        raise InvalidInputError(f"unknown regression mode {mode!r}")
    sol, _, _, _ = irls_batch(U, A, p, tol, max_iters)
    return sol


def row_fits(A, V, p: float = 1.0, **kw) -> np.ndarray:
    """``U`` whose row ``i`` minimizes ``||U^i V - A^i||_p``."""
    return multi_response_regress(np.asarray(V).T, np.asarray(A).T, "l1", p, **kw).T
