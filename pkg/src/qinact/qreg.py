"""Exact weighted quantile regression (weighted check-loss minimization).

``solve`` finds a global minimizer of ``sum_i w_i * rho(y_i - x_i' beta)``
where ``rho`` is the asymmetric absolute (check) loss at a given quantile
level. The solution is a vertex interpolating p + 1 observations, found by
deterministic simplex-style pivoting; optimality is certified by the
subgradient condition (see :func:`optimality_gap`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _simplex
from .errors import IterationLimit, RankDeficient, Unbounded


def check_loss(u, lam):
    """Check loss ``u * (lam - I(u < 0))``: ``lam*u`` for ``u >= 0``, ``(lam-1)*u`` below."""
    u = np.asarray(u, dtype=np.float64)
    out = u * (lam - (u < 0))
    return float(out) if out.ndim == 0 else out


def psi(u, lam):
    """First derivative of the check loss, ``lam - I(u < 0)``; equals ``lam`` at 0."""
    u = np.asarray(u, dtype=np.float64)
    out = lam - (u < 0).astype(np.float64)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QRProblem:
    """A weighted quantile-regression instance.

    ``design`` is ``(n, p+1)`` with an all-ones first column; rows with zero
    weight are inert. The positive-weight rows must have full column rank.
    """

    design: np.ndarray
    response: np.ndarray
    weights: np.ndarray
    quantile: float

    def __post_init__(self):
        X = np.ascontiguousarray(self.design, dtype=np.float64)
        y = np.ascontiguousarray(self.response, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("design must be a 2-d array")
        n, k = X.shape
        if y.shape != (n,) or w.shape != (n,):
            raise ValueError("response and weights must match the design rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
            raise ValueError("design, response, and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("first design column must be the intercept (all ones)")
        if not (0.0 < self.quantile < 1.0):
            raise ValueError(f"quantile must be in (0, 1), got {self.quantile}")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def n_params(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class QRSolution:
    """A certified minimizer: coefficients, loss, interpolated rows, pivot count."""

    beta: np.ndarray
    objective: float
    active_set: np.ndarray
    iterations: int


def _solve_arrays(X, y, w, lam, start_basis=None, max_iter=None):
    """Solver core on raw arrays; rows with zero weight are dropped first.

    ``start_basis`` (row indices into ``X``) warm-starts the pivot search;
    indices must point at positive-weight rows. Returns
    ``(beta, active_rows, iterations)`` with ``active_rows`` in ``X``'s
    indexing, unsorted.
    """
    n, k = X.shape
    pos = np.flatnonzero(w > 0)
    if pos.size < k + 1:
        raise RankDeficient(
            f"need at least {k + 1} positive-weight rows, got {pos.size}"
        )
    if pos.size == n:
        Xc, yc, wc = X, y, w
        rows = None
    else:
        Xc = np.ascontiguousarray(X[pos])
        yc = np.ascontiguousarray(y[pos])
        wc = np.ascontiguousarray(w[pos])
        rows = pos
    if max_iter is None:
        max_iter = 50 * (Xc.shape[0] + k)

    basis0 = None
    if start_basis is not None:
        start = np.asarray(start_basis, dtype=np.int64)
        if rows is not None:
            inv = np.full(n, -1, dtype=np.int64)
            inv[pos] = np.arange(pos.size)
            start = inv[start]
            if np.any(start < 0):
                raise ValueError("start basis includes a zero-weight row")
        if start.shape != (k,):
            raise ValueError("start basis must list p+1 row indices")
        basis0 = start

    if basis0 is None:
        basis0, found = _simplex.initial_basis(Xc)
        if found < k:
            raise RankDeficient()

    try:
        beta, basis, iters, status = _simplex.solve_kernel(
            Xc, yc, wc, lam, basis0, max_iter
        )
    except np.linalg.LinAlgError:
        if start_basis is None:
            raise RankDeficient("basis became numerically singular") from None
        return _solve_arrays(X, y, w, lam, start_basis=None, max_iter=max_iter)

    if status == _simplex.STATUS_ITERATION_LIMIT:
        raise IterationLimit(max_iter)
    if status == _simplex.STATUS_UNBOUNDED:
        raise Unbounded()
    # recompute beta from the sorted basis so the result depends only on the
    # interpolated row set, not on internal slot order (bitwise contract)
    basis = np.sort(basis)
    beta = np.linalg.solve(Xc[basis], yc[basis])
    active = basis if rows is None else rows[basis]
    return beta, active, iters


def solve(problem: QRProblem, start_basis=None) -> QRSolution:
    """Globally minimize the weighted check loss of ``problem``.

    Deterministic: identical input bits produce identical output bits. The
    returned active set lists the interpolated rows (zero residual), sorted.
    """
    X, y, w = problem.design, problem.response, problem.weights
    beta, active, iters = _solve_arrays(X, y, w, problem.quantile,
                                        start_basis=start_basis)
    r = y - X @ beta
    r[active] = 0.0
    objective = float(np.sum(w * check_loss(r, problem.quantile)))
    return QRSolution(
        beta=beta,
        objective=objective,
        active_set=np.sort(active),
        iterations=iters,
    )


def optimality_gap(problem: QRProblem, solution: QRSolution) -> float:
    """Worst violation of the subgradient certificate; <= 0 means certified.

    For each coordinate the weighted score ``sum_i w_i x_ik psi(r_i)`` must
    not exceed ``sum_{active} w_i |x_ik|`` in absolute value (residuals of
    active rows are exactly zero by construction).
    """
    X, y, w = problem.design, problem.response, problem.weights
    r = y - X @ solution.beta
    r[solution.active_set] = 0.0
    score = X.T @ (w * psi(r, problem.quantile))
    bound = np.abs(X[solution.active_set]).T @ w[solution.active_set]
    return float(np.max(np.abs(score) - bound))
