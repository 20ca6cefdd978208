"""Two-input affine dynamics, scenarios, simulation and cost evaluation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from . import stl

__all__ = [
    "AffineSystem", "BoundsBox", "EffortNorm", "CostSpec", "Scenario", "Trajectory",
    "InputBoundsError", "simulate", "eval_cost", "effort", "superposition_decompose",
    "load_scenario", "scenario_from_dict", "scenario_to_dict", "write_trajectory_csv",
    "read_trace_csv", "reach_boxes", "deviation_radius", "bundled_scenario",
]

BOUND_TOL = 1e-9


class InputBoundsError(ValueError):
    pass


def _frozen(a, ndim) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AffineSystem:
    """``x+ = A x + B_L uL + B_F uF + c``."""

    A: np.ndarray
    B_L: np.ndarray
    B_F: np.ndarray
    c: np.ndarray | None = None

    def __post_init__(self):
        A = _frozen(self.A, 2)
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise ValueError(f"A must be square, got {A.shape}")
        B_L = _frozen(self.B_L, 2)
        B_F = np.array(self.B_F, dtype=float)
        if B_F.size == 0:
            B_F = np.zeros((n, 0))
        B_F = _frozen(B_F, 2)
        if B_L.shape[0] != n or B_L.shape[1] < 1:
            raise ValueError(f"B_L must be {n} x m_L with m_L >= 1, got {B_L.shape}")
        if B_F.shape[0] != n:
            raise ValueError(f"B_F must have {n} rows, got {B_F.shape}")
        c = np.zeros(n) if self.c is None else np.array(self.c, dtype=float)
        if c.shape != (n,):
            raise ValueError(f"c must have length {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B_L", B_L)
        object.__setattr__(self, "B_F", B_F)
        object.__setattr__(self, "c", _frozen(c, 1))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m_L(self) -> int:
        return self.B_L.shape[1]

    @property
    def m_F(self) -> int:
        return self.B_F.shape[1]

    def step(self, x, uL, uF) -> np.ndarray:
        return self.A @ x + self.B_L @ uL + self.B_F @ uF + self.c


@dataclass(frozen=True, eq=False)
class BoundsBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(self.lower, 1), _frozen(self.upper, 1)
        if lo.shape != hi.shape:
            raise ValueError("bounds have mismatched lengths")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, v, tol: float = BOUND_TOL) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def corners(self) -> np.ndarray:
        grids = np.meshgrid(*[[l, h] for l, h in zip(self.lower, self.upper)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1) if grids else np.zeros((1, 0))


class EffortNorm(str, Enum):
    SQUARED_PWL = "squared_pwl"
    L1 = "l1"


@dataclass(frozen=True)
class CostSpec:
    """``effort_weight * sum_t norm(uL_t) - [include_leader_robustness] * rho(phi_L)``."""

    effort_weight: float = 0.0
    effort_norm: EffortNorm = EffortNorm.SQUARED_PWL
    pwl_segments: int = 8
    include_leader_robustness: bool = True

    def __post_init__(self):
        object.__setattr__(self, "effort_norm", EffortNorm(self.effort_norm))
        if self.effort_weight < 0:
            raise ValueError("effort_weight must be nonnegative")
        if self.effort_norm is EffortNorm.SQUARED_PWL and self.pwl_segments < 2:
            raise ValueError("PWL effort needs at least 2 segments")


@dataclass(frozen=True, eq=False)
class Scenario:
    system: AffineSystem
    x0: np.ndarray
    N: int
    state_bounds: BoundsBox
    leader_bounds: BoundsBox
    follower_bounds: BoundsBox
    phi_L: stl.Formula
    phi_F: stl.Formula
    cost: CostSpec = field(default_factory=CostSpec)
    state_names: tuple[str, ...] = ()
    big_m: float = 1e6
    epsilon: float = 1e-4
    noninterfering_input: np.ndarray | None = None
    name: str = "scenario"
    # plot hints: which state indices are positions of which agent
    plot: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sys_ = self.system
        x0 = _frozen(self.x0, 1)
        object.__setattr__(self, "x0", x0)
        names = tuple(self.state_names) or tuple(f"x{i}" for i in range(sys_.n))
        object.__setattr__(self, "state_names", names)
        if x0.shape != (sys_.n,):
            raise ValueError("x0 has the wrong dimension")
        if len(names) != sys_.n:
            raise ValueError("state_names must match the state dimension")
        if self.state_bounds.dim != sys_.n or self.leader_bounds.dim != sys_.m_L \
                or self.follower_bounds.dim != sys_.m_F:
            raise ValueError("bounds dimensions do not match the system")
        if self.N < max(stl.horizon(self.phi_L), stl.horizon(self.phi_F)):
            raise ValueError(
                f"horizon N={self.N} shorter than formula horizons "
                f"({stl.horizon(self.phi_L)}, {stl.horizon(self.phi_F)})")
        if not self.state_bounds.contains(x0):
            raise ValueError("x0 lies outside the state bounds")
        for p in stl.predicates(self.phi_L) + stl.predicates(self.phi_F):
            if p.dim != sys_.n:
                raise ValueError("predicate dimension does not match the state dimension")
        if self.big_m <= 0 or self.epsilon <= 0:
            raise ValueError("big_m and epsilon must be positive")
        if self.noninterfering_input is None:
            ni = np.zeros((self.N, sys_.m_F))
        else:
            ni = np.array(self.noninterfering_input, dtype=float).reshape(self.N, sys_.m_F)
        for u in ni:
            if not self.follower_bounds.contains(u):
                raise ValueError("noninterfering input outside follower bounds")
        ni.flags.writeable = False
        object.__setattr__(self, "noninterfering_input", ni)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def m_L(self) -> int:
        return self.system.m_L

    @property
    def m_F(self) -> int:
        return self.system.m_F

    def zero_follower(self) -> np.ndarray:
        return np.array(self.noninterfering_input)

    def replace(self, **kw) -> "Scenario":
        import dataclasses
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: stl.Trace
    u_L: np.ndarray
    u_F: np.ndarray

    def check(self, system: AffineSystem, tol: float = 1e-9) -> bool:
        x = self.states.states
        for t in range(len(self.u_L)):
            if np.max(np.abs(system.step(x[t], self.u_L[t], self.u_F[t]) - x[t + 1]), initial=0) > tol:
                return False
        return True


def _inputs(seq, N: int, m: int, box: BoundsBox, who: str) -> np.ndarray:
    u = np.array(seq, dtype=float)
    if m == 0 and u.size == 0:
        return np.zeros((N, 0))
    if u.ndim == 1 and m == 1:
        u = u[:, None]
    if u.shape != (N, m):
        raise ValueError(f"{who} input must have shape ({N}, {m}), got {u.shape}")
    for t, ut in enumerate(u):
        if not box.contains(ut):
            raise InputBoundsError(f"{who} input at t={t} is out of bounds: {ut}")
    return u


def simulate(scenario: Scenario, u_L, u_F=None, check_bounds: bool = True) -> Trajectory:
    N, sys_ = scenario.N, scenario.system
    if u_F is None:
        u_F = scenario.zero_follower()
    if check_bounds:
        uL = _inputs(u_L, N, sys_.m_L, scenario.leader_bounds, "leader")
        uF = _inputs(u_F, N, sys_.m_F, scenario.follower_bounds, "follower")
    else:
        uL = np.array(u_L, dtype=float).reshape(N, sys_.m_L)
        uF = np.array(u_F, dtype=float).reshape(N, sys_.m_F)
    x = np.empty((N + 1, sys_.n))
    x[0] = scenario.x0
    for t in range(N):
        x[t + 1] = sys_.step(x[t], uL[t], uF[t])
    uL.flags.writeable = False
    uF.flags.writeable = False
    return Trajectory(stl.Trace(x), uL, uF)


def effort(cost: CostSpec, u_L) -> float:
    u = np.asarray(u_L, dtype=float)
    if cost.effort_norm is EffortNorm.L1:
        return float(np.sum(np.abs(u)))
    return float(np.sum(u * u))


def eval_cost(scenario: Scenario, traj: Trajectory) -> float:
    """Exact cost; the quadratic effort is never approximated here."""
    c = scenario.cost
    value = c.effort_weight * effort(c, traj.u_L)
    if c.include_leader_robustness:
        value -= stl.robustness(scenario.phi_L, traj.states, 0)
    return float(value)


def superposition_decompose(scenario: Scenario, u_L) -> tuple[np.ndarray, np.ndarray]:
    """Split states into a nominal trace plus a linear follower response.

    Returns ``(nominal, Phi)`` with ``nominal`` of shape (N+1, n) and ``Phi`` of
    shape (N+1, n, N*m_F) so that states = nominal + Phi @ vec(u_F), with vec
    taken row-major over (t, component).
    """
    N, sys_ = scenario.N, scenario.system
    n, mF = sys_.n, sys_.m_F
    nominal = simulate(scenario, u_L, np.zeros((N, mF)), check_bounds=False).states.states
    Phi = np.zeros((N + 1, n, N * mF))
    for t in range(N):
        Phi[t + 1] = sys_.A @ Phi[t]
        Phi[t + 1][:, t * mF:(t + 1) * mF] += sys_.B_F
    return np.array(nominal), Phi


def deviation_radius(scenario: Scenario, width: np.ndarray | None = None) -> np.ndarray:
    """Per-step bound on |x'_t - x_t| for two follower sequences in the box.

    ``width`` is the per-component range of the follower difference
    (default: the full box width).
    """
    N, sys_ = scenario.N, scenario.system
    w = scenario.follower_bounds.upper - scenario.follower_bounds.lower if width is None else width
    r = np.zeros((N + 1, sys_.n))
    absA, absB = np.abs(sys_.A), np.abs(sys_.B_F)
    for t in range(N):
        r[t + 1] = absA @ r[t] + absB @ w
    return r


def reach_boxes(scenario: Scenario, clip_to_state_bounds: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Interval over-approximation of reachable states for every step."""
    N, sys_ = scenario.N, scenario.system
    lo = np.empty((N + 1, sys_.n))
    hi = np.empty((N + 1, sys_.n))
    lo[0] = hi[0] = scenario.x0
    absA = np.abs(sys_.A)
    LB, FB = scenario.leader_bounds, scenario.follower_bounds
    for t in range(N):
        c = 0.5 * (lo[t] + hi[t])
        r = 0.5 * (hi[t] - lo[t])
        cn = sys_.A @ c + sys_.B_L @ LB.center + sys_.B_F @ FB.center + sys_.c
        rn = absA @ r + np.abs(sys_.B_L) @ LB.radius + np.abs(sys_.B_F) @ FB.radius
        lo[t + 1], hi[t + 1] = cn - rn, cn + rn
        if clip_to_state_bounds:
            lo[t + 1] = np.maximum(lo[t + 1], scenario.state_bounds.lower)
            hi[t + 1] = np.minimum(hi[t + 1], scenario.state_bounds.upper)
            hi[t + 1] = np.maximum(hi[t + 1], lo[t + 1])
    return lo, hi


# -- files ------------------------------------------------------------------

def scenario_from_dict(d: dict, name: str = "scenario") -> Scenario:
    names = list(d["state_names"])
    n = len(names)
    B_F = d.get("B_F") or [[] for _ in range(n)]
    system = AffineSystem(d["A"], d["B_L"], np.array(B_F, dtype=float).reshape(n, -1), d.get("c"))

    def box(key):
        b = d[key]
        if isinstance(b, dict):
            return BoundsBox(b["lower"], b["upper"])
        return BoundsBox([p[0] for p in b], [p[1] for p in b])

    cost = d.get("cost", {})
    spec = CostSpec(
        effort_weight=float(cost.get("effort_weight", 0.0)),
        effort_norm=cost.get("effort_norm", "squared_pwl"),
        pwl_segments=int(cost.get("pwl_segments", 8)),
        include_leader_robustness=bool(cost.get("include_leader_robustness", True)),
    )
    return Scenario(
        system=system,
        x0=d["x0"],
        N=int(d["N"]),
        state_bounds=box("state_bounds"),
        leader_bounds=box("leader_bounds"),
        follower_bounds=box("follower_bounds") if system.m_F else BoundsBox([], []),
        phi_L=stl.parse(d["phi_L"], names),
        phi_F=stl.parse(d.get("phi_F", "true"), names),
        cost=spec,
        state_names=tuple(names),
        big_m=float(d.get("big_m", 1e6)),
        epsilon=float(d.get("epsilon", 1e-4)),
        noninterfering_input=d.get("noninterfering_input"),
        name=d.get("name", name),
        plot=d.get("plot", {}),
    )


def scenario_to_dict(sc: Scenario) -> dict:
    def box(b):
        return {"lower": b.lower.tolist(), "upper": b.upper.tolist()}

    names = list(sc.state_names)
    return {
        "name": sc.name,
        "state_names": names,
        "A": sc.system.A.tolist(),
        "B_L": sc.system.B_L.tolist(),
        "B_F": sc.system.B_F.tolist(),
        "c": sc.system.c.tolist(),
        "x0": sc.x0.tolist(),
        "N": sc.N,
        "state_bounds": box(sc.state_bounds),
        "leader_bounds": box(sc.leader_bounds),
        "follower_bounds": box(sc.follower_bounds),
        "phi_L": stl.to_text(sc.phi_L, names),
        "phi_F": stl.to_text(sc.phi_F, names),
        "cost": {
            "effort_weight": sc.cost.effort_weight,
            "effort_norm": sc.cost.effort_norm.value,
            "pwl_segments": sc.cost.pwl_segments,
            "include_leader_robustness": sc.cost.include_leader_robustness,
        },
        "big_m": sc.big_m,
        "epsilon": sc.epsilon,
        "noninterfering_input": sc.noninterfering_input.tolist(),
        "plot": sc.plot,
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        d = json.load(fh)
    return scenario_from_dict(d, name=path.stem)


def bundled_scenario(name: str) -> Scenario:
    base = Path(__file__).parent / "scenarios"
    fname = name if name.endswith(".json") else f"{name}.json"
    return load_scenario(base / fname)


def write_trajectory_csv(path, traj: Trajectory):
    x = traj.states.states
    n = x.shape[1]
    mL, mF = traj.u_L.shape[1], traj.u_F.shape[1]
    names = [f"x_{i}" for i in range(n)]
    header = ["t"] + names + [f"uL_{j}" for j in range(mL)] + [f"uF_{j}" for j in range(mF)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(x.shape[0]):
            uL = traj.u_L[t] if t < len(traj.u_L) else [""] * mL
            uF = traj.u_F[t] if t < len(traj.u_F) else [""] * mF
            w.writerow([t] + [repr(float(v)) for v in x[t]]
                       + [repr(float(v)) if v != "" else "" for v in uL]
                       + [repr(float(v)) if v != "" else "" for v in uF])


def read_trace_csv(path, state_names: Sequence[str]) -> stl.Trace:
    """Read the state columns from a trajectory CSV.

    Columns are matched by state name first, then positionally as ``x_i``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    missing = [s for s in state_names if s not in header]
    if missing and all(f"x_{i}" in header for i in range(len(state_names))):
        state_names, missing = [f"x_{i}" for i in range(len(state_names))], []
    if missing:
        raise ValueError(f"{path}: missing state columns {missing}")
    idx = [header.index(s) for s in state_names]
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            data.append([float(row[j]) for j in idx])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{i}: malformed row") from exc
    if not data:
        raise ValueError(f"{path}: no data rows")
    return stl.Trace(np.array(data))
