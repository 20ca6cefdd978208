"""Embedded LP/MILP solver: bound propagation, simplex relaxations, best-bound B&B."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import MilpModel, ObjSense, SolveResult, Status
from .simplex import solve_lp_arrays

FEAS_TOL = 1e-7
INT_TOL = 1e-6


@dataclass(frozen=True)
class SolveLimits:
    node_limit: int | None = None
    time_limit: float | None = None
    mip_gap_abs: float = 1e-6
    mip_gap_rel: float = 1e-6


def propagate(A, rl, ru, lo, hi, isb, max_pass: int = 20):
    """Activity-based bound tightening.  Returns (lo, hi) or None if infeasible."""
    lo = lo.copy()
    hi = hi.copy()
    if A.shape[0] == 0:
        return lo, hi
    pos = A > 0
    neg = A < 0
    Apos = np.where(pos, A, 0.0)
    Aneg = np.where(neg, A, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        for _ in range(max_pass):
            lo_inf = ~np.isfinite(lo)
            hi_inf = ~np.isfinite(hi)
            lo_f = np.where(lo_inf, 0.0, lo)
            hi_f = np.where(hi_inf, 0.0, hi)
            # per-entry contributions to the row's min / max activity
            cmin = Apos * lo_f + Aneg * hi_f
            cmax = Apos * hi_f + Aneg * lo_f
            imin = (pos & lo_inf) | (neg & hi_inf)
            imax = (pos & hi_inf) | (neg & lo_inf)
            smin = cmin.sum(axis=1)
            smax = cmax.sum(axis=1)
            nmin = imin.sum(axis=1)
            nmax = imax.sum(axis=1)
            if np.any((nmin == 0) & (smin > ru + 1e-6 * np.maximum(1.0, np.abs(ru)))) or \
                    np.any((nmax == 0) & (smax < rl - 1e-6 * np.maximum(1.0, np.abs(rl)))):
                return None
            # residual min activity excluding the entry itself
            rmin_ok = (nmin[:, None] - imin) == 0
            rmax_ok = (nmax[:, None] - imax) == 0
            rmin = smin[:, None] - cmin
            rmax = smax[:, None] - cmax
            nz = pos | neg
            up_room = np.where(rmin_ok & np.isfinite(ru)[:, None] & nz, (ru[:, None] - rmin) / np.where(nz, A, 1.0), np.nan)
            dn_room = np.where(rmax_ok & np.isfinite(rl)[:, None] & nz, (rl[:, None] - rmax) / np.where(nz, A, 1.0), np.nan)
            # a x <= room*a: pos -> x <= up_room; neg -> x >= up_room
            new_hi = np.fmin(np.nanmin(np.where(pos, up_room, np.nan), axis=0, initial=np.inf),
                             np.nanmin(np.where(neg, dn_room, np.nan), axis=0, initial=np.inf))
            new_lo = np.fmax(np.nanmax(np.where(neg, up_room, np.nan), axis=0, initial=-np.inf),
                             np.nanmax(np.where(pos, dn_room, np.nan), axis=0, initial=-np.inf))
            new_hi[isb] = np.floor(new_hi[isb] + INT_TOL)
            new_lo[isb] = np.ceil(new_lo[isb] - INT_TOL)
            tol = 1e-7 * np.maximum(1.0, np.abs(hi_f) + np.abs(lo_f))
            tighter_hi = new_hi < hi - tol
            tighter_lo = new_lo > lo + tol
            if not (tighter_hi.any() or tighter_lo.any()):
                break
            hi = np.where(tighter_hi, new_hi, hi)
            lo = np.where(tighter_lo, new_lo, lo)
            if np.any(lo > hi + 1e-6 * np.maximum(1.0, np.abs(lo))):
                return None
            # clean up tiny crossings produced by rounding
            cross = lo > hi
            mid = 0.5 * (lo + hi)
            lo = np.where(cross, mid, lo)
            hi = np.where(cross, mid, hi)
    return lo, hi


def _prepared(model: MilpModel):
    c, c0, A, rl, ru, lo, hi, isb = model.arrays()
    if model.obj_sense is ObjSense.MAX:
        c, c0 = -c, -c0
    return c, c0, A.toarray(), rl, ru, lo, hi, isb


def _sign(model):
    return -1.0 if model.obj_sense is ObjSense.MAX else 1.0


def solve_lp(model: MilpModel, relax: bool = True) -> SolveResult:
    """Solve the LP relaxation (binaries relaxed to [0, 1])."""
    t0 = time.perf_counter()
    c, c0, A, rl, ru, lo, hi, isb = _prepared(model)
    out = solve_lp_arrays(c, A, rl, ru, lo, hi)
    stats = {"nodes": 0, "simplex_iterations": out.iterations, "wall_time": time.perf_counter() - t0}
    sgn = _sign(model)
    if out.status == "optimal":
        obj = sgn * (out.objective + c0)
        res = SolveResult(Status.OPTIMAL, out.x, obj, obj, stats)
        if model.violations(out.x, FEAS_TOL, math.inf):
            res.status = Status.NUMERICAL
        return res
    status = {"infeasible": Status.INFEASIBLE, "unbounded": Status.UNBOUNDED,
              "iter_limit": Status.ITER_LIMIT}[out.status]
    return SolveResult(status, None, math.nan, math.nan, stats)


def solve_milp(model: MilpModel, limits: SolveLimits | None = None, **kw) -> SolveResult:
    """Best-bound branch and bound with most-fractional branching."""
    limits = limits or SolveLimits(**kw)
    t0 = time.perf_counter()
    c, c0, A, rl, ru, lo, hi, isb = _prepared(model)
    sgn = _sign(model)
    stats = {"nodes": 0, "simplex_iterations": 0, "bound_history": []}

    def finish(status, x, inc, bound):
        stats["wall_time"] = time.perf_counter() - t0
        if x is None:
            return SolveResult(status, None, math.nan, sgn * (bound + c0) if math.isfinite(bound) else math.nan, stats)
        return SolveResult(status, x, sgn * (inc + c0), sgn * (bound + c0), stats)

    def node_lp(nlo, nhi):
        bounds = propagate(A, rl, ru, nlo, nhi, isb)
        if bounds is None:
            return None
        plo, phi = bounds
        out = solve_lp_arrays(c, A, rl, ru, plo, phi)
        stats["simplex_iterations"] += out.iterations
        return out, plo, phi

    incumbent_x, incumbent = None, math.inf
    counter = 0
    root = node_lp(lo, hi)
    stats["nodes"] = 1
    if root is None or root[0].status == "infeasible":
        return finish(Status.INFEASIBLE, None, math.inf, math.inf)
    if root[0].status == "unbounded":
        return finish(Status.UNBOUNDED, None, -math.inf, -math.inf)
    if root[0].status != "optimal":
        return finish(Status.ITER_LIMIT, None, math.inf, -math.inf)
    heap = [(root[0].objective, counter, root[0].x, root[1], root[2])]
    global_bound = root[0].objective

    def gap_closed(bound):
        return incumbent - bound <= max(limits.mip_gap_abs, limits.mip_gap_rel * abs(incumbent))

    while heap:
        bound = heap[0][0]
        global_bound = max(global_bound, min(bound, incumbent))
        stats["bound_history"].append(global_bound)
        if incumbent_x is not None and gap_closed(bound):
            break
        if limits.time_limit is not None and time.perf_counter() - t0 > limits.time_limit:
            return finish(Status.TIME_LIMIT, incumbent_x, incumbent, global_bound)
        if limits.node_limit is not None and stats["nodes"] >= limits.node_limit:
            return finish(Status.ITER_LIMIT, incumbent_x, incumbent, global_bound)
        _, _, x, nlo, nhi = heapq.heappop(heap)
        frac = np.abs(x - np.round(x))
        frac = np.where(isb, frac, 0.0)
        j = int(np.argmax(frac)) if frac.size else 0  # first index among ties
        if not frac.size or frac[j] <= INT_TOL:
            xr = x.copy()
            xr[isb] = np.round(xr[isb])
            val = float(c @ xr)
            if val < incumbent:
                incumbent, incumbent_x = val, xr
            continue
        for side in (0.0, 1.0):
            clo, chi = nlo.copy(), nhi.copy()
            clo[j] = chi[j] = side
            counter += 1
            stats["nodes"] += 1
            child = node_lp(clo, chi)
            if child is None or child[0].status == "infeasible":
                continue
            out = child[0]
            if out.status == "unbounded":
                return finish(Status.UNBOUNDED, None, -math.inf, -math.inf)
            if out.status != "optimal":
                return finish(Status.NUMERICAL, incumbent_x, incumbent, global_bound)
            if out.objective < incumbent:
                heapq.heappush(heap, (max(out.objective, bound), counter, out.x, child[1], child[2]))

    if incumbent_x is None:
        return finish(Status.INFEASIBLE, None, math.inf, math.inf)
    final_bound = min(heap[0][0], incumbent) if heap else incumbent
    global_bound = max(global_bound, final_bound)
    stats["bound_history"].append(global_bound)
    res = finish(Status.OPTIMAL, incumbent_x, incumbent, global_bound)
    if model.violations(incumbent_x, FEAS_TOL, INT_TOL):
        res.status = Status.NUMERICAL
    return res
