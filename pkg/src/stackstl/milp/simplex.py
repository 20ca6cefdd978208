"""Dense two-phase tableau simplex for small LPs.

The LP is given in range form ``min c.x  s.t.  rl <= A x <= ru, lo <= x <= hi``.
Variables are shifted/split to nonnegative columns, finite upper bounds become
rows, and the usual phase-1 artificial basis is used.  Pricing is Dantzig's
rule; after a run of degenerate pivots it falls back to Bland's rule, which
cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
DEGENERATE_SWITCH = 30


@dataclass
class LPOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iter_limit"
    x: np.ndarray | None
    objective: float
    iterations: int


def _pivot(T: np.ndarray, r: int, c: int):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, c] = 0.0
    T[r, c] = 1.0


def _run(T: np.ndarray, basis: list[int], ncols: int, max_iter: int, it0: int = 0):
    """Optimize the tableau in place over the first ``ncols`` columns."""
    it = it0
    degenerate = 0
    m = T.shape[0] - 1
    while True:
        rc = T[-1, :ncols]
        if degenerate >= DEGENERATE_SWITCH:
            cand = np.nonzero(rc < -COST_TOL)[0]
            if cand.size == 0:
                return "optimal", it
            j = int(cand[0])
        else:
            j = int(np.argmin(rc))
            if rc[j] >= -COST_TOL:
                return "optimal", it
        if it >= max_iter:
            return "iter_limit", it
        colj = T[:m, j]
        rows = np.nonzero(colj > PIVOT_TOL)[0]
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / colj[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        degenerate = degenerate + 1 if T[r, -1] <= 1e-12 else 0
        _pivot(T, r, j)
        basis[r] = j
        it += 1


def solve_lp_arrays(c, A, rl, ru, lo, hi, max_iter: int | None = None) -> LPOutcome:
    c = np.asarray(c, dtype=float)
    rl = np.asarray(rl, dtype=float)
    A = np.asarray(A, dtype=float).reshape(rl.size, c.size)
    rl = np.asarray(rl, dtype=float)
    ru = np.asarray(ru, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = c.size
    if np.any(lo > hi) or np.any(rl > ru):
        return LPOutcome("infeasible", None, np.nan, 0)

    # x = offset + Tmap @ y, y >= 0
    offset = np.zeros(n)
    cols = []  # (var index, sign)
    ub_rows = []  # (column index, bound)
    for j in range(n):
        l, h = lo[j], hi[j]
        if np.isfinite(l) and np.isfinite(h) and l == h:
            offset[j] = l
        elif np.isfinite(l):
            offset[j] = l
            cols.append((j, 1.0))
            if np.isfinite(h):
                ub_rows.append((len(cols) - 1, h - l))
        elif np.isfinite(h):
            offset[j] = h
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    Tmap = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        Tmap[j, k] = s

    Ay = A @ Tmap
    shift = A @ offset
    rows, rhs, kinds = [], [], []
    for i in range(A.shape[0]):
        lo_i, hi_i = rl[i] - shift[i], ru[i] - shift[i]
        if np.isfinite(lo_i) and np.isfinite(hi_i) and lo_i == hi_i:
            rows.append(Ay[i]); rhs.append(lo_i); kinds.append("=")
            continue
        if np.isfinite(hi_i):
            rows.append(Ay[i]); rhs.append(hi_i); kinds.append("<=")
        if np.isfinite(lo_i):
            rows.append(Ay[i]); rhs.append(lo_i); kinds.append(">=")
    for k, bound in ub_rows:
        e = np.zeros(ny)
        e[k] = 1.0
        rows.append(e); rhs.append(bound); kinds.append("<=")

    cy = c @ Tmap
    obj0 = float(c @ offset)
    m = len(rows)
    if m == 0:
        if np.any(cy < -COST_TOL):
            return LPOutcome("unbounded", None, -np.inf, 0)
        x = offset.copy()
        return LPOutcome("optimal", x, obj0, 0)

    R = np.array(rows, dtype=float).reshape(m, ny)
    b = np.array(rhs, dtype=float)
    kinds = list(kinds)
    # make rhs nonnegative
    for i in range(m):
        if b[i] < 0:
            R[i] = -R[i]
            b[i] = -b[i]
            kinds[i] = {"<=": ">=", ">=": "<=", "=": "="}[kinds[i]]

    n_slack = sum(k != "=" for k in kinds)
    n_art = sum(k != "<=" for k in kinds)
    ncols = ny + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :ny] = R
    T[:m, -1] = b
    basis = [0] * m
    s = ny
    a = ny + n_slack
    art_cols = []
    for i, k in enumerate(kinds):
        if k == "<=":
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        elif k == ">=":
            T[i, s] = -1.0
            s += 1
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1
        else:
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000

    it = 0
    if art_cols:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        for i in range(m):
            if basis[i] >= ny + n_slack:
                T[-1, :] -= T[i, :]
        for j in art_cols:
            T[-1, j] = 0.0
        status, it = _run(T, basis, ncols, max_iter)
        if status == "iter_limit":
            return LPOutcome("iter_limit", None, np.nan, it)
        infeas = -T[-1, -1]
        if infeas > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            return LPOutcome("infeasible", None, np.nan, it)
        # drive artificials out of the basis
        keep = []
        first_art = ny + n_slack
        for i in range(m):
            if basis[i] >= first_art:
                row = T[i, :first_art]
                nz = np.nonzero(np.abs(row) > 1e-9)[0]
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                    keep.append(i)
                # otherwise the row is redundant and dropped
            else:
                keep.append(i)
        T = np.vstack([T[keep][:, list(range(first_art)) + [ncols]], np.zeros((1, first_art + 1))])
        basis = [basis[i] for i in keep]
        ncols = first_art
        m = len(keep)
    else:
        T = T.copy()

    # phase 2
    cost = np.zeros(ncols)
    cost[:ny] = cy
    T[-1, :] = 0.0
    T[-1, :ncols] = cost
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            T[-1, :] -= cb * T[i, :]
    status, it = _run(T, basis, ncols, max_iter, it)
    if status != "optimal":
        return LPOutcome(status, None, -np.inf if status == "unbounded" else np.nan, it)
    y = np.zeros(ncols)
    for i in range(m):
        y[basis[i]] = T[i, -1]
    x = offset + Tmap @ y[:ny]
    return LPOutcome("optimal", x, float(c @ x), it)
