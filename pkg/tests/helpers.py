"""Shared test utilities: independent oracles and dataset generators."""

import itertools

import numpy as np

from qinact import Dataset, check_loss


def brute_force_qr(X, y, w, lam):
    """Exhaustive vertex search: best interpolating basis of positive-weight rows.

    Independent of the pivot solver; only shares the check-loss definition.
    Returns (beta, objective) of the best vertex.
    """
    n, k = X.shape
    rows = np.flatnonzero(w > 0)
    best_obj = np.inf
    best_beta = None
    for combo in itertools.combinations(rows.tolist(), k):
        A = X[list(combo)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        beta = np.linalg.solve(A, y[list(combo)])
        r = y - X @ beta
        r[list(combo)] = 0.0
        obj = float(np.sum(w * check_loss(r, lam)))
        if obj < best_obj:
            best_obj = obj
            best_beta = beta
    return best_beta, best_obj


def random_qr_problem(rng, n=None, p=None, zero_weights=False):
    """A random full-rank weighted quantile-regression instance."""
    if p is None:
        p = int(rng.integers(0, 3))
    if n is None:
        n = int(rng.integers(p + 3, 9))
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
    y = rng.normal(scale=2.0, size=n)
    w = rng.uniform(0.2, 3.0, size=n)
    if zero_weights and n > p + 3:
        w[rng.integers(0, n)] = 0.0
    lam = float(rng.uniform(0.1, 0.9))
    return X, y, w, lam


def random_survival_dataset(rng, n=60, p=1, censoring=0.3, scale=5.0):
    """Weibull-ish event times with uniform censoring and normal covariates."""
    z = rng.normal(size=(n, p))
    shift = z @ rng.uniform(-0.3, 0.3, size=p) if p else np.zeros(n)
    t = scale * rng.weibull(1.5, n) * np.exp(shift)
    if censoring > 0:
        horizon = np.quantile(t, 1.0 - censoring) * rng.uniform(1.0, 1.5)
        c = rng.uniform(0, 3.0 * horizon, n)
        y = np.minimum(t, c)
        status = (t <= c).astype(np.int8)
    else:
        y = t
        status = np.ones(n, dtype=np.int8)
    names = tuple(f"z{j + 1}" for j in range(p))
    return Dataset.from_arrays(y, status, z, names)
