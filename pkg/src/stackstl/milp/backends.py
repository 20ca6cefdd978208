"""Solver backends behind one contract: ``solve(model, limits) -> SolveResult``."""

from __future__ import annotations

import math
import time
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .bnb import FEAS_TOL, INT_TOL, SolveLimits, solve_milp
from .lpfile import write_lp
from .model import MilpModel, ObjSense, SolveResult, Status


class BackendUnavailable(RuntimeError):
    pass


class SolverBackend(Protocol):
    name: str

    def solve(self, model: MilpModel, limits: SolveLimits) -> SolveResult: ...


class EmbeddedBackend:
    name = "embedded"

    def solve(self, model, limits):
        return solve_milp(model, limits)


class HighsBackend:
    """HiGHS through ``scipy.optimize.milp``."""

    name = "highs"

    def solve(self, model, limits):
        from scipy.optimize import Bounds, LinearConstraint, milp

        t0 = time.perf_counter()
        c, c0, A, rl, ru, lo, hi, isb = model.arrays()
        sgn = -1.0 if model.obj_sense is ObjSense.MAX else 1.0
        options = {"disp": False, "presolve": True,
                   "mip_rel_gap": max(limits.mip_gap_rel, 0.0)}
        if limits.time_limit is not None:
            options["time_limit"] = float(limits.time_limit)
        if limits.node_limit is not None:
            options["node_limit"] = int(limits.node_limit)
        cons = [LinearConstraint(A, rl, ru)] if A.shape[0] else []
        res = milp(sgn * c, integrality=isb.astype(int), bounds=Bounds(lo, hi),
                   constraints=cons, options=options)
        stats = {"nodes": None, "simplex_iterations": None,
                 "wall_time": time.perf_counter() - t0, "message": res.message}
        x = None if res.x is None else np.asarray(res.x, dtype=float)
        if x is not None and isb.any():
            xr = x.copy()
            xr[isb] = np.round(xr[isb])
            if not model.violations(xr, 10 * FEAS_TOL, INT_TOL):
                x = xr
        bound = getattr(res, "mip_dual_bound", None)
        if res.status == 0:
            obj = float(c @ x + c0)
            b = obj if bound is None or not np.isfinite(bound) else sgn * float(bound) + c0
            return SolveResult(Status.OPTIMAL, x, obj, b, stats)
        if res.status == 2:
            return SolveResult(Status.INFEASIBLE, None, math.nan, math.nan, stats)
        if res.status == 3:
            return SolveResult(Status.UNBOUNDED, None, math.nan, math.nan, stats)
        if res.status == 1:
            status = Status.TIME_LIMIT if "time" in str(res.message).lower() else Status.ITER_LIMIT
            obj = float(c @ x + c0) if x is not None else math.nan
            b = sgn * float(bound) + c0 if bound is not None and np.isfinite(bound) else math.nan
            return SolveResult(status, x, obj, b, stats)
        return SolveResult(Status.NUMERICAL, None, math.nan, math.nan, stats)


class LPFileBackend:
    """Writes the model as LP text, then solves it with a delegate backend."""

    name = "lp-file"

    def __init__(self, path: str | Path = "model.lp", delegate: str = "embedded"):
        self.path = Path(path)
        self.delegate = delegate

    def solve(self, model, limits):
        self.path.write_text(write_lp(model))
        return get_backend(self.delegate).solve(model, limits)


_REGISTRY: dict[str, Callable[[], SolverBackend]] = {
    "embedded": EmbeddedBackend,
    "highs": HighsBackend,
    "lp-file": LPFileBackend,
}


def register_backend(name: str, factory: Callable[[], SolverBackend]):
    _REGISTRY[name] = factory


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


def get_backend(backend: str | SolverBackend | None = None) -> SolverBackend:
    if backend is None:
        return EmbeddedBackend()
    if not isinstance(backend, str):
        return backend
    try:
        return _REGISTRY[backend]()
    except KeyError:
        raise BackendUnavailable(
            f"unknown solver backend {backend!r}; available: {', '.join(available_backends())}") from None


def backend_solve(model: MilpModel, backend: str | SolverBackend | None = None,
                  limits: SolveLimits | None = None, **kw) -> SolveResult:
    return get_backend(backend).solve(model, limits or SolveLimits(**kw))
