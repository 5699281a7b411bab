"""Dense two-phase simplex for small inequality-form LPs.

Solves ``min c @ z  s.t.  A @ z <= b`` with ``z`` free. Free variables are
split as ``z = p - q`` and slacks are added, so the tableau works on
``[p, q, s, a] >= 0`` where ``a`` are the phase-one artificials. Bland's rule
is used for both entering and leaving choices, so the method cannot cycle and
the returned basic solution is a deterministic function of the input.
"""

import numpy as np

from .errors import Infeasible, Unbounded

PIVOT_TOL = 1e-11
COST_TOL = 1e-11


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _run(T, basis, ncols, max_iter):
    """Iterate on tableau ``T`` whose last row holds the reduced costs.

    Only the first ``ncols`` columns are eligible to enter.
    """
    m = T.shape[0] - 1
    for _ in range(max_iter):
        cost = T[-1, :ncols]
        candidates = np.flatnonzero(cost < -COST_TOL)
        if candidates.size == 0:
            return
        col = candidates[0]
        column = T[:m, col]
        positive = np.flatnonzero(column > PIVOT_TOL)
        if positive.size == 0:
            raise Unbounded("LP is unbounded in the objective direction")
        ratios = T[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = ties[np.argmin(basis[ties])]
        _pivot(T, basis, row, col)
    raise RuntimeError("simplex iteration limit reached")


def simplex(c, A, b, feas_tol=1e-9):
    """Minimize ``c @ z`` subject to ``A @ z <= b``.

    Returns ``(z, value)``. Raises :class:`Infeasible` or :class:`Unbounded`.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    neg = b < 0
    n_art = int(neg.sum())
    nstruct = 2 * n + m
    ncols = nstruct + n_art

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = A
    T[:m, n:2 * n] = -A
    T[:m, 2 * n:nstruct] = np.eye(m)
    T[:m, -1] = b
    T[:m][neg] *= -1.0

    basis = np.empty(m, dtype=int)
    basis[~neg] = 2 * n + np.flatnonzero(~neg)
    art_rows = np.flatnonzero(neg)
    basis[art_rows] = nstruct + np.arange(n_art)
    T[art_rows, nstruct + np.arange(n_art)] = 1.0

    max_iter = 50 * (m + ncols) + 100
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))

    if n_art:
        # phase one: minimize the sum of artificials
        T[-1, :] = -T[art_rows].sum(axis=0)
        T[-1, nstruct:ncols] = 0.0
        _run(T, basis, ncols, max_iter)
        if -T[-1, -1] > feas_tol * scale:
            raise Infeasible("LP has no feasible point")
        # drive zero-level artificials out of the basis, dropping dependent rows
        keep = np.ones(m + 1, dtype=bool)
        for i in range(m):
            if basis[i] >= nstruct:
                nz = np.flatnonzero(np.abs(T[i, :nstruct]) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, basis, i, nz[0])
                else:
                    keep[i] = False
        T = T[keep][:, list(range(nstruct)) + [ncols]]
        basis = basis[keep[:m]]
        m = T.shape[0] - 1

    cost = np.concatenate([c, -c, np.zeros(nstruct - 2 * n)])
    T[-1, :] = 0.0
    T[-1, :nstruct] = cost
    cb = cost[basis]
    T[-1, :] -= cb @ T[:m, :]
    _run(T, basis, nstruct, max_iter)

    x = np.zeros(nstruct)
    x[basis] = T[:m, -1]
    z = x[:n] - x[n:2 * n]
    return z, float(c @ z)
