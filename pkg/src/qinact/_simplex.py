"""Compiled pivot kernel for exact weighted quantile regression.

The minimizer of a weighted check loss with a full-rank design is attained
at a vertex interpolating k = p + 1 observations. The kernel descends from
vertex to vertex: at the current basis it evaluates the one-sided
directional derivatives along the 2k edge directions; if none is negative
the vertex is optimal, otherwise it moves along the steepest edge, passing
as many residual sign-change breakpoints as keep the derivative negative
(a long step), and swaps the last breakpoint crossed into the basis.

All tie-breaks are deterministic: lowest basis slot first, the "+" edge
before the "-", breakpoint ties by ascending row index (stable sort).
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_ITERATION_LIMIT = 1
STATUS_UNBOUNDED = 2

# residual magnitudes below _ZERO_RTOL * scale count as interpolated (kinks);
# directional derivatives above -_OPT_RTOL * scale certify optimality
_ZERO_RTOL = 1e-12
_OPT_RTOL = 1e-11


@njit(cache=True)
def initial_basis(X):
    """First rows forming a nonsingular basis, scanned in order.

    Modified Gram-Schmidt with a relative independence test; returns the
    basis row indices and how many were found (fewer than k means the
    design is rank deficient).
    """
    n, k = X.shape
    basis = np.full(k, -1, dtype=np.int64)
    Q = np.zeros((k, k))
    m = 0
    for i in range(n):
        v = X[i].copy()
        nrm0 = 0.0
        for c in range(k):
            nrm0 += v[c] * v[c]
        nrm0 = np.sqrt(nrm0)
        if nrm0 == 0.0:
            continue
        for j in range(m):
            proj = 0.0
            for c in range(k):
                proj += v[c] * Q[j, c]
            for c in range(k):
                v[c] -= proj * Q[j, c]
        nrm = 0.0
        for c in range(k):
            nrm += v[c] * v[c]
        nrm = np.sqrt(nrm)
        if nrm > 1e-9 * nrm0:
            for c in range(k):
                Q[m, c] = v[c] / nrm
            basis[m] = i
            m += 1
            if m == k:
                break
    return basis, m


@njit(cache=True)
def solve_kernel(X, y, w, lam, basis_init, max_iter):
    """Pivot to an optimal vertex of the weighted check loss.

    Preconditions (enforced by the caller): all weights strictly positive,
    ``basis_init`` indexes k independent rows. Returns
    ``(beta, basis, iterations, status)``.
    """
    n, k = X.shape
    basis = basis_init.copy()
    inbasis = np.zeros(n, dtype=np.uint8)
    A = np.empty((k, k))
    for j in range(k):
        inbasis[basis[j]] = 1
        A[j, :] = X[basis[j]]
    beta = np.zeros(k)
    yb = np.empty(k)
    ts = np.empty(n)
    bp_rows = np.empty(n, dtype=np.int64)
    iters = 0
    status = STATUS_ITERATION_LIMIT

    while iters < max_iter:
        iters += 1
        Binv = np.linalg.inv(A)
        for j in range(k):
            yb[j] = y[basis[j]]
        beta = Binv @ yb
        r = y - X @ beta
        for j in range(k):
            r[basis[j]] = 0.0
        S = X @ Binv  # column j is the response of each row to edge direction j

        best_val = 0.0
        best_j = -1
        best_sig = 1.0
        for j in range(k):
            dplus = 0.0
            dminus = 0.0
            scale = 0.0
            for i in range(n):
                if inbasis[i] == 1:
                    continue
                s = S[i, j]
                ws = w[i] * s
                scale += abs(ws)
                ri = r[i]
                ztol = _ZERO_RTOL * (1.0 + abs(y[i]) + abs(y[i] - ri))
                if ri > ztol:
                    dplus -= lam * ws
                    dminus += lam * ws
                elif ri < -ztol:
                    dplus += (1.0 - lam) * ws
                    dminus -= (1.0 - lam) * ws
                elif s > 0.0:
                    dplus += (1.0 - lam) * ws
                    dminus += lam * ws
                elif s < 0.0:
                    dplus -= lam * ws
                    dminus -= (1.0 - lam) * ws
            wj = w[basis[j]]
            dplus += (1.0 - lam) * wj
            dminus += lam * wj
            thr = _OPT_RTOL * (1.0 + scale + wj)
            if dplus < -thr and dplus < best_val:
                best_val = dplus
                best_j = j
                best_sig = 1.0
            if dminus < -thr and dminus < best_val:
                best_val = dminus
                best_j = j
                best_sig = -1.0

        if best_j < 0:
            status = STATUS_OK
            break

        # walk along the chosen edge through residual breakpoints
        m = 0
        for i in range(n):
            if inbasis[i] == 1:
                continue
            se = best_sig * S[i, best_j]
            ri = r[i]
            ztol = _ZERO_RTOL * (1.0 + abs(y[i]) + abs(y[i] - ri))
            if (ri > ztol and se > 0.0) or (ri < -ztol and se < 0.0):
                ts[m] = ri / se
                bp_rows[m] = i
                m += 1
        if m == 0:
            status = STATUS_UNBOUNDED
            break
        perm = np.argsort(ts[:m], kind="mergesort")
        v = best_val
        enter = -1
        for q in range(m):
            i = bp_rows[perm[q]]
            v += w[i] * abs(S[i, best_j])
            if v >= 0.0:
                enter = i
                break
        if enter < 0:
            # derivative stayed negative through every breakpoint by rounding
            # noise only; the last breakpoint is the stable choice
            enter = bp_rows[perm[m - 1]]
        inbasis[basis[best_j]] = 0
        inbasis[enter] = 1
        basis[best_j] = enter
        A[best_j, :] = X[enter]

    return beta, basis, iters, status
