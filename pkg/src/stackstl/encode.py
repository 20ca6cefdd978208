"""MILP encodings of trajectories, STL satisfaction, robustness, cost and the
Stackelberg gadgets.

Every encoded quantity carries an interval ``[lo, hi]`` derived from state
bounds.  Those intervals give a tight big-M for each predicate and selector,
which keeps the models well conditioned; the configured ``big_m`` is checked
as an upper bound and used for the robustness of the constant ``true``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import stl
from .dynamics import EffortNorm, Scenario
from .milp.model import LinExpr, MilpModel, Var


class BigMError(ValueError):
    """The configured big-M is smaller than an encoded quantity can reach."""


class HorizonError(ValueError):
    pass


@dataclass
class RVal:
    """An encoded real quantity with known bounds."""

    expr: LinExpr
    lo: float
    hi: float

    @staticmethod
    def const(v: float) -> "RVal":
        return RVal(LinExpr(const=float(v)), float(v), float(v))

    def __neg__(self) -> "RVal":
        return RVal(-self.expr, -self.hi, -self.lo)

    def shift(self, c: float) -> "RVal":
        return RVal(self.expr + c, self.lo + c, self.hi + c)


@dataclass
class TrajectoryCopy:
    label: str
    x: list  # (N+1) x n LinExpr
    u_F: list  # N x m_F LinExpr
    lo: np.ndarray
    hi: np.ndarray
    fixed_follower: np.ndarray | None
    bool_cache: dict = field(default_factory=dict)
    rob_cache: dict = field(default_factory=dict)

    def state(self, t: int) -> list:
        return self.x[t]


def _lin(v) -> LinExpr:
    return LinExpr.of(v)


class EncodingContext:
    """Owns one model under construction plus per-copy encoding caches.

    ``u_L`` may be given as a fixed numeric sequence (falsifiers) or left
    ``None`` to create bounded leader decision variables.
    """

    def __init__(self, scenario: Scenario, model: MilpModel | None = None, u_L=None,
                 big_m: float | None = None, epsilon: float | None = None,
                 tight_m: bool = True, leader_levels: int | None = None):
        self.scenario = scenario
        self.model = model or MilpModel(scenario.name)
        self.M = float(scenario.big_m if big_m is None else big_m)
        self.eps = float(scenario.epsilon if epsilon is None else epsilon)
        self.tight_m = tight_m
        self.copies: dict[str, TrajectoryCopy] = {}
        self._effort: RVal | None = None
        self._count = 0
        N, mL = scenario.N, scenario.m_L
        LB = scenario.leader_bounds
        if u_L is not None:
            u = np.array(u_L, dtype=float).reshape(N, mL)
            self.fixed_leader = u
            self.u_L = [[LinExpr(const=float(u[t, j])) for j in range(mL)] for t in range(N)]
            self.uL_lo = u.copy()
            self.uL_hi = u.copy()
        else:
            self.fixed_leader = None
            self.u_L = []
            for t in range(N):
                row = []
                for j in range(mL):
                    v = self.model.continuous(f"uL[{t}][{j}]", LB.lower[j], LB.upper[j])
                    if leader_levels is not None:
                        grid = np.linspace(LB.lower[j], LB.upper[j], leader_levels)
                        self._restrict_to_grid(v, grid, f"gL[{t}][{j}]")
                    row.append(_lin(v))
                self.u_L.append(row)
            self.uL_lo = np.tile(LB.lower, (N, 1))
            self.uL_hi = np.tile(LB.upper, (N, 1))

    # -- helpers --
    def fresh(self, prefix: str) -> str:
        self._count += 1
        return f"{prefix}#{self._count}"

    def _restrict_to_grid(self, v: Var, levels, prefix: str):
        """Force ``v`` onto a finite set of values through one-hot binaries."""
        gs = [self.model.binary(f"{prefix}[{i}]") for i in range(len(levels))]
        one = LinExpr()
        val = LinExpr()
        for g, lv in zip(gs, levels):
            one = one + g
            val = val + float(lv) * g
        self.model.add_constraint(one, "=", 1.0)
        self.model.add_constraint(val - v, "=", 0.0)
        return gs

    def require(self, expr, sense: str, rhs: float = 0.0, name: str = ""):
        """Add a constraint; constant expressions are checked and, if false,
        recorded as an infeasible row so the solver reports it."""
        e = _lin(expr)
        if not e.terms:
            ok = {"<=": e.const <= rhs + 1e-12, ">=": e.const >= rhs - 1e-12,
                  "=": abs(e.const - rhs) <= 1e-12}[sense]
            if ok:
                return None
            z = self.model.continuous(self.fresh("infeasible"), 0.0, 0.0)
            return self.model.add_constraint(_lin(z), ">=", 1.0, name or "infeasible")
        return self.model.add_constraint(e, sense, rhs, name)

    def copy(self, label: str) -> TrajectoryCopy:
        return self.copies[label]


# -- trajectories ------------------------------------------------------------

def _propagate_box(sc: Scenario, uL_lo, uL_hi, uF_lo, uF_hi, clip: bool):
    N, sys_ = sc.N, sc.system
    lo = np.empty((N + 1, sys_.n))
    hi = np.empty((N + 1, sys_.n))
    lo[0] = hi[0] = sc.x0
    absA, absBL, absBF = np.abs(sys_.A), np.abs(sys_.B_L), np.abs(sys_.B_F)
    for t in range(N):
        c = 0.5 * (lo[t] + hi[t])
        r = 0.5 * (hi[t] - lo[t])
        cl, rl = 0.5 * (uL_lo[t] + uL_hi[t]), 0.5 * (uL_hi[t] - uL_lo[t])
        cf, rf = 0.5 * (uF_lo[t] + uF_hi[t]), 0.5 * (uF_hi[t] - uF_lo[t])
        cn = sys_.A @ c + sys_.B_L @ cl + sys_.B_F @ cf + sys_.c
        rn = absA @ r + absBL @ rl + absBF @ rf
        lo[t + 1], hi[t + 1] = cn - rn, cn + rn
        if clip:
            lo[t + 1] = np.maximum(lo[t + 1], sc.state_bounds.lower)
            hi[t + 1] = np.minimum(hi[t + 1], sc.state_bounds.upper)
    return lo, hi


def _deviation_box(sc: Scenario, d_lo, d_hi):
    """Interval of Phi @ d for a follower difference d in [d_lo, d_hi]."""
    N, sys_ = sc.N, sc.system
    c = np.zeros((N + 1, sys_.n))
    r = np.zeros((N + 1, sys_.n))
    absA, absBF = np.abs(sys_.A), np.abs(sys_.B_F)
    for t in range(N):
        c[t + 1] = sys_.A @ c[t] + sys_.B_F @ (0.5 * (d_lo[t] + d_hi[t]))
        r[t + 1] = absA @ r[t] + absBF @ (0.5 * (d_hi[t] - d_lo[t]))
    return c - r, c + r


def add_trajectory_copy(ctx: EncodingContext, label: str, u_F=None,
                        enforce_state_bounds: bool = False, anchor: str | None = None,
                        levels: int | None = None) -> TrajectoryCopy:
    """Add a copy of the dynamics driven by the shared leader inputs.

    ``u_F`` is either a fixed (N, m_F) sequence or ``None`` for follower
    decision variables.  With ``anchor`` the state bounds are derived from the
    anchor copy's bounds plus the largest possible follower deviation, which is
    much tighter than propagating the full leader box.  ``levels`` restricts
    follower variables to an evenly spaced grid over their bounds.
    """
    sc, model = ctx.scenario, ctx.model
    if label in ctx.copies:
        raise ValueError(f"trajectory copy {label!r} already exists")
    N, n, mF = sc.N, sc.n, sc.m_F
    FB = sc.follower_bounds
    if u_F is not None:
        uf = np.array(u_F, dtype=float).reshape(N, mF)
        for t in range(N):
            if not FB.contains(uf[t]):
                raise ValueError(f"follower input at t={t} outside the follower bounds")
        uF = [[LinExpr(const=float(uf[t, j])) for j in range(mF)] for t in range(N)]
        uF_lo = uF_hi = uf
    else:
        uf = None
        uF = []
        for t in range(N):
            row = []
            for j in range(mF):
                v = model.continuous(f"uF[{label}][{t}][{j}]", FB.lower[j], FB.upper[j])
                if levels is not None:
                    grid = np.linspace(FB.lower[j], FB.upper[j], levels)
                    ctx._restrict_to_grid(v, grid, f"gF[{label}][{t}][{j}]")
                row.append(_lin(v))
            uF.append(row)
        uF_lo = np.tile(FB.lower, (N, 1))
        uF_hi = np.tile(FB.upper, (N, 1))

    lo, hi = _propagate_box(sc, ctx.uL_lo, ctx.uL_hi, uF_lo, uF_hi, enforce_state_bounds)
    if anchor is not None:
        a = ctx.copies[anchor]
        a_lo = a.fixed_follower if a.fixed_follower is not None else np.tile(FB.lower, (N, 1))
        a_hi = a.fixed_follower if a.fixed_follower is not None else np.tile(FB.upper, (N, 1))
        d_lo, d_hi = _deviation_box(sc, uF_lo - a_hi, uF_hi - a_lo)
        lo = np.maximum(lo, a.lo + d_lo)
        hi = np.minimum(hi, a.hi + d_hi)
    if np.any(lo > hi + 1e-9):
        # the state box cannot be met; keep an empty-but-consistent box so the
        # solver reports infeasibility instead of failing here
        hi = np.maximum(hi, lo)

    A, BL, BF, c = sc.system.A, sc.system.B_L, sc.system.B_F, sc.system.c
    x = [[LinExpr(const=float(v)) for v in sc.x0]]
    for t in range(N):
        nxt = []
        for i in range(n):
            rhs = LinExpr(const=float(c[i]))
            for j in range(n):
                if A[i, j] != 0.0:
                    rhs = rhs + float(A[i, j]) * x[t][j]
            for j in range(sc.m_L):
                if BL[i, j] != 0.0:
                    rhs = rhs + float(BL[i, j]) * ctx.u_L[t][j]
            for j in range(mF):
                if BF[i, j] != 0.0:
                    rhs = rhs + float(BF[i, j]) * uF[t][j]
            if not rhs.terms:
                nxt.append(rhs)
                continue
            v = model.continuous(f"x[{label}][{t + 1}][{i}]", lo[t + 1, i], hi[t + 1, i])
            model.add_constraint(_lin(v) - rhs, "=", 0.0, f"dyn[{label}][{t}][{i}]")
            nxt.append(_lin(v))
        x.append(nxt)
    cp = TrajectoryCopy(label, x, uF, lo, hi, uf)
    ctx.copies[label] = cp
    return cp


def add_fixed_trace(ctx: EncodingContext, label: str, states) -> TrajectoryCopy:
    """A copy whose states are numeric constants (used by encoding checks)."""
    s = np.asarray(states, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    x = [[LinExpr(const=float(v)) for v in row] for row in s]
    cp = TrajectoryCopy(label, x, [], s.copy(), s.copy(), None)
    ctx.copies[label] = cp
    return cp


# -- predicates --------------------------------------------------------------

def _mu(cp: TrajectoryCopy, p: stl.Predicate, t: int) -> RVal:
    if t >= len(cp.x):
        raise HorizonError(f"time {t} beyond the encoded horizon {len(cp.x) - 1}")
    e = LinExpr(const=float(p.offset))
    lo = hi = float(p.offset)
    for i, a in enumerate(p.coeffs):
        if a == 0.0:
            continue
        e = e + float(a) * cp.x[t][i]
        lo += min(a * cp.lo[t, i], a * cp.hi[t, i])
        hi += max(a * cp.lo[t, i], a * cp.hi[t, i])
    return RVal(e, lo, hi)


def predicate_big_m(ctx: EncodingContext, cp: TrajectoryCopy, p: stl.Predicate, t: int) -> float:
    """Smallest M for which the two predicate constraints are valid."""
    mu = _mu(cp, p, t)
    return max(abs(mu.lo), abs(mu.hi)) + ctx.eps


def encode_predicate(ctx: EncodingContext, cp: TrajectoryCopy | str, p: stl.Predicate, t: int) -> LinExpr:
    """Binary ``z`` with mu <= M z - eps and -mu <= M (1 - z) - eps.

    Feasible assignments have z = 1 when mu >= eps and z = 0 when mu <= -eps;
    values of mu strictly inside (-eps, eps) admit no z at all.
    """
    cp = ctx.copies[cp] if isinstance(cp, str) else cp
    key = ("pred", p, t)
    if key in cp.bool_cache:
        return cp.bool_cache[key]
    mu = _mu(cp, p, t)
    need = max(abs(mu.lo), abs(mu.hi)) + ctx.eps
    if need > ctx.M:
        raise BigMError(f"big-M {ctx.M:g} too small: predicate at t={t} in copy {cp.label!r} "
                        f"needs at least {need:g}")
    M = need if ctx.tight_m else ctx.M
    z = ctx.model.binary(ctx.fresh(f"zmu[{cp.label}][{t}]"))
    ctx.model.add_constraint(mu.expr - M * z, "<=", -ctx.eps)
    ctx.model.add_constraint(-mu.expr + M * z, "<=", M - ctx.eps)
    cp.bool_cache[key] = _lin(z)
    return cp.bool_cache[key]


# -- Boolean encoding ----------------------------------------------------------

def _normal(phi: stl.Formula) -> stl.Formula:
    return stl.simplify(stl.nnf(stl.simplify(phi)))


def _flatten(phi, t, cls_nary, cls_temporal):
    """Expand nested n-ary/temporal operators of one kind into (formula, t) leaves."""
    out = []
    stack = [(phi, t)]
    while stack:
        f, s = stack.pop()
        if isinstance(f, cls_nary):
            stack.extend((a, s) for a in reversed(f.args))
        elif isinstance(f, cls_temporal):
            stack.extend((f.arg, s + k) for k in range(f.b, f.a - 1, -1))
        else:
            out.append((f, s))
    return out


def _and_z(ctx, zs: list[LinExpr], name: str) -> LinExpr:
    if any(not z.terms and z.const < 0.5 for z in zs):
        return LinExpr(const=0.0)
    zs = [z for z in zs if z.terms]
    if not zs:
        return LinExpr(const=1.0)
    if len(zs) == 1:
        return zs[0]
    z = ctx.model.continuous(ctx.fresh(name), 0.0, 1.0)
    total = LinExpr()
    for zi in zs:
        ctx.model.add_constraint(_lin(z) - zi, "<=", 0.0)
        total = total + zi
    ctx.model.add_constraint(_lin(z) - total, ">=", -(len(zs) - 1))
    return _lin(z)


def _or_z(ctx, zs: list[LinExpr], name: str) -> LinExpr:
    if any(not z.terms and z.const > 0.5 for z in zs):
        return LinExpr(const=1.0)
    zs = [z for z in zs if z.terms]
    if not zs:
        return LinExpr(const=0.0)
    if len(zs) == 1:
        return zs[0]
    z = ctx.model.continuous(ctx.fresh(name), 0.0, 1.0)
    total = LinExpr()
    for zi in zs:
        ctx.model.add_constraint(_lin(z) - zi, ">=", 0.0)
        total = total + zi
    ctx.model.add_constraint(_lin(z) - total, "<=", 0.0)
    return _lin(z)


def _bool(ctx, cp: TrajectoryCopy, phi, t: int) -> LinExpr:
    key = ("bool", phi, t)
    if key in cp.bool_cache:
        return cp.bool_cache[key]
    if isinstance(phi, stl.TrueF):
        out = LinExpr(const=1.0)
    elif isinstance(phi, stl.Pred):
        out = encode_predicate(ctx, cp, phi.pred, t)
    elif isinstance(phi, stl.Not):
        out = 1.0 - _bool(ctx, cp, phi.arg, t)
    elif isinstance(phi, (stl.And, stl.Always)):
        leaves = _flatten(phi, t, stl.And, stl.Always)
        out = _and_z(ctx, [_bool(ctx, cp, f, s) for f, s in leaves], f"zand[{cp.label}][{t}]")
    elif isinstance(phi, (stl.Or, stl.Eventually)):
        leaves = _flatten(phi, t, stl.Or, stl.Eventually)
        out = _or_z(ctx, [_bool(ctx, cp, f, s) for f, s in leaves], f"zor[{cp.label}][{t}]")
    elif isinstance(phi, stl.Until):
        # disjunction over t' of (right at t' and left on [t, t'])
        prefix = LinExpr(const=1.0)
        terms = []
        for k in range(phi.b + 1):
            prefix = _and_z(ctx, [prefix, _bool(ctx, cp, phi.left, t + k)], f"zpre[{cp.label}][{t}]")
            if k >= phi.a:
                terms.append(_and_z(ctx, [prefix, _bool(ctx, cp, phi.right, t + k)],
                                    f"zuntil[{cp.label}][{t}]"))
        out = _or_z(ctx, terms, f"zor[{cp.label}][{t}]")
    else:
        raise TypeError(f"not a formula: {phi!r}")
    cp.bool_cache[key] = out
    return out


def encode_bool(ctx: EncodingContext, cp: TrajectoryCopy | str, phi: stl.Formula, t: int = 0) -> LinExpr:
    """Expression in [0, 1] equal to the satisfaction of ``phi`` at ``t``.

    Predicates get binaries; compound nodes are continuous in [0, 1] since
    their constraints force integrality once the predicates are integral.
    """
    cp = ctx.copies[cp] if isinstance(cp, str) else cp
    if t + stl.horizon(phi) > len(cp.x) - 1:
        raise HorizonError(f"formula horizon {stl.horizon(phi)} from t={t} exceeds N={len(cp.x) - 1}")
    return _bool(ctx, cp, _normal(phi), t)


# -- robustness encoding -------------------------------------------------------

def _prune(args: list[RVal], is_min: bool) -> list[RVal]:
    """Drop arguments that can never be the strict min (max)."""
    if len(args) <= 1:
        return args
    if is_min:
        j = min(range(len(args)), key=lambda i: args[i].hi)
        cap = args[j].hi
        return [a for i, a in enumerate(args) if i == j or a.lo < cap]
    j = max(range(len(args)), key=lambda i: args[i].lo)
    cap = args[j].lo
    return [a for i, a in enumerate(args) if i == j or a.hi > cap]


POLARITIES = ("exact", "lower", "upper")
_FLIP = {"exact": "exact", "lower": "upper", "upper": "lower"}


def encode_minmax(ctx: EncodingContext, args: list[RVal], is_min: bool, name: str = "rho",
                  polarity: str = "exact") -> RVal:
    """rho = min(args) (or max) with one selector binary per argument.

    ``polarity`` relaxes the encoding to one side.  With "lower" every
    feasible rho is at most the true value and the true value is attainable,
    which is all a model that pushes rho upward needs; "upper" is the mirror
    image.  The side that needs no selector then costs no binaries.
    """
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}")
    if not args:
        raise ValueError("min/max over no arguments")
    args = _prune(args, is_min)
    if len(args) == 1:
        return args[0]
    if all(not a.expr.terms for a in args):
        v = (min if is_min else max)(a.expr.const for a in args)
        return RVal.const(v)
    if is_min:
        lo, hi = min(a.lo for a in args), min(a.hi for a in args)
    else:
        lo, hi = max(a.lo for a in args), max(a.hi for a in args)
    # the bounding side (rho <= each arg for min) needs no binaries
    bounding = polarity in ("exact", "lower") if is_min else polarity in ("exact", "upper")
    selecting = polarity in ("exact", "upper") if is_min else polarity in ("exact", "lower")
    model = ctx.model
    r = model.continuous(ctx.fresh(name), lo, hi)
    R = _lin(r)
    if bounding:
        for a in args:
            model.add_constraint(R - a.expr, "<=" if is_min else ">=", 0.0)
    if selecting:
        sel = LinExpr()
        for a in args:
            s = model.binary(ctx.fresh(name + ".s"))
            sel = sel + s
            if is_min:
                big = a.hi - lo
                # r >= a - big (1 - s)
                model.add_constraint(R - a.expr - big * s, ">=", -big)
            else:
                big = hi - a.lo
                # r <= a + big (1 - s)
                model.add_constraint(R - a.expr + big * s, "<=", big)
        model.add_constraint(sel, "=", 1.0)
    return RVal(R, lo, hi)


def _rob(ctx, cp: TrajectoryCopy, phi, t: int, pol: str) -> RVal:
    key = ("rob", phi, t, pol)
    if key in cp.rob_cache:
        return cp.rob_cache[key]
    tag = f"[{cp.label}][{t}]"
    if isinstance(phi, stl.TrueF):
        out = RVal.const(ctx.M)
    elif isinstance(phi, stl.Pred):
        out = _mu(cp, phi.pred, t)
    elif isinstance(phi, stl.Not):
        out = -_rob(ctx, cp, phi.arg, t, _FLIP[pol])
    elif isinstance(phi, (stl.And, stl.Always)):
        leaves = _flatten(phi, t, stl.And, stl.Always)
        out = encode_minmax(ctx, [_rob(ctx, cp, f, s, pol) for f, s in leaves], True, "rmin" + tag, pol)
    elif isinstance(phi, (stl.Or, stl.Eventually)):
        leaves = _flatten(phi, t, stl.Or, stl.Eventually)
        out = encode_minmax(ctx, [_rob(ctx, cp, f, s, pol) for f, s in leaves], False, "rmax" + tag, pol)
    elif isinstance(phi, stl.Until):
        prefix = None
        terms = []
        for k in range(phi.b + 1):
            left = _rob(ctx, cp, phi.left, t + k, pol)
            prefix = left if prefix is None else encode_minmax(ctx, [prefix, left], True, "rpre" + tag, pol)
            if k >= phi.a:
                terms.append(encode_minmax(ctx, [prefix, _rob(ctx, cp, phi.right, t + k, pol)], True,
                                           "runtil" + tag, pol))
        out = encode_minmax(ctx, terms, False, "rmax" + tag, pol)
    else:
        raise TypeError(f"not a formula: {phi!r}")
    cp.rob_cache[key] = out
    return out


def encode_robustness(ctx: EncodingContext, cp: TrajectoryCopy | str, phi: stl.Formula, t: int = 0,
                      polarity: str = "exact") -> RVal:
    """Encoded robustness of ``phi`` at ``t``; ``true`` maps to the constant M.

    See :func:`encode_minmax` for ``polarity``.
    """
    cp = ctx.copies[cp] if isinstance(cp, str) else cp
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}")
    if t + stl.horizon(phi) > len(cp.x) - 1:
        raise HorizonError(f"formula horizon {stl.horizon(phi)} from t={t} exceeds N={len(cp.x) - 1}")
    # negation commutes with min/max, so robustness needs no normal form
    return _rob(ctx, cp, stl.simplify(phi), t, polarity)


# -- gadgets -----------------------------------------------------------------

def encode_rhoK(ctx: EncodingContext, k, J: RVal, rho_F: RVal, name: str = "rhoK") -> RVal:
    """rho^K = max(k - J, -rho_F) through the four-constraint gadget and binary b.

    ``k`` is a Var/LinExpr with bounds given as an RVal, or a number.
    """
    if J is None or rho_F is None:
        raise ValueError("rho^K needs the cost and follower-robustness encodings")
    kv = k if isinstance(k, RVal) else RVal.const(float(k))
    first = RVal(kv.expr - J.expr, kv.lo - J.hi, kv.hi - J.lo)
    second = -rho_F
    lo, hi = max(first.lo, second.lo), max(first.hi, second.hi)
    big = max(hi - first.lo, first.hi - lo, hi - second.lo, second.hi - lo, 0.0)
    m = ctx.model
    r = m.continuous(ctx.fresh(name), lo, hi)
    b = m.binary(ctx.fresh(name + ".b"))
    R = _lin(r)
    m.add_constraint(R - first.expr, ">=", 0.0)
    m.add_constraint(R - second.expr, ">=", 0.0)
    # first - b M <= rhoK <= first + b M
    m.add_constraint(R - first.expr + big * b, ">=", 0.0)
    m.add_constraint(R - first.expr - big * b, "<=", 0.0)
    # second - (1 - b) M <= rhoK <= second + (1 - b) M
    m.add_constraint(R - second.expr - big * b, ">=", -big)
    m.add_constraint(R - second.expr + big * b, "<=", big)
    return RVal(R, lo, hi)


def pwl_tangent_points(lo: float, hi: float, segments: int) -> np.ndarray:
    """Tangent abscissae for the squared-effort under-approximation."""
    return np.linspace(lo, hi, segments + 1)


def pwl_square(u: float, lo: float, hi: float, segments: int) -> float:
    """Value of the tangent-line under-approximation of u**2 (floored at 0)."""
    a = pwl_tangent_points(lo, hi, segments)
    return float(max(0.0, np.max(2.0 * a * u - a * a)))


def pwl_gap_bound(lo: float, hi: float, segments: int) -> float:
    """Largest u**2 - pwl(u) over [lo, hi]: half the tangent spacing, squared."""
    return ((hi - lo) / segments / 2.0) ** 2


def encode_effort(ctx: EncodingContext) -> RVal:
    """Effort sum over the leader inputs (PWL squares or absolute values)."""
    if ctx._effort is not None:
        return ctx._effort
    sc = ctx.scenario
    cost = sc.cost
    LB = sc.leader_bounds
    total = LinExpr()
    lo_sum = hi_sum = 0.0
    for t in range(sc.N):
        for j in range(sc.m_L):
            lo, hi = float(LB.lower[j]), float(LB.upper[j])
            peak = max(lo * lo, hi * hi) if cost.effort_norm is EffortNorm.SQUARED_PWL else max(abs(lo), abs(hi))
            if ctx.fixed_leader is not None:
                u = float(ctx.fixed_leader[t, j])
                v = pwl_square(u, lo, hi, cost.pwl_segments) if cost.effort_norm is EffortNorm.SQUARED_PWL else abs(u)
                total = total + v
                lo_sum += v
                hi_sum += v
                continue
            u = ctx.u_L[t][j]
            s = ctx.model.continuous(f"effort[{t}][{j}]", 0.0, peak)
            if cost.effort_norm is EffortNorm.SQUARED_PWL:
                for a in pwl_tangent_points(lo, hi, cost.pwl_segments):
                    # s >= 2 a u - a^2
                    ctx.model.add_constraint(_lin(s) - 2.0 * float(a) * u, ">=", -float(a) * float(a))
            else:
                ctx.model.add_constraint(_lin(s) - u, ">=", 0.0)
                ctx.model.add_constraint(_lin(s) + u, ">=", 0.0)
            total = total + s
            hi_sum += peak
    ctx._effort = RVal(total, lo_sum, hi_sum)
    return ctx._effort


def encode_cost(ctx: EncodingContext, cp: TrajectoryCopy | str, rho_L: RVal | None = None,
                polarity: str = "exact") -> RVal:
    """J_S on a trajectory copy: weighted effort minus the leader robustness.

    ``polarity`` refers to J itself, so "upper" encodes rho_L from below.
    """
    cp = ctx.copies[cp] if isinstance(cp, str) else cp
    cost = ctx.scenario.cost
    eff = encode_effort(ctx)
    w = cost.effort_weight
    J = RVal(w * eff.expr, w * eff.lo, w * eff.hi)
    if cost.include_leader_robustness:
        if rho_L is None:
            rho_L = encode_robustness(ctx, cp, ctx.scenario.phi_L, polarity=_FLIP[polarity])
        J = RVal(J.expr - rho_L.expr, J.lo - rho_L.hi, J.hi - rho_L.lo)
    return J


def encode_implication(ctx: EncodingContext, z_L, z_F):
    """z_L >= z_F."""
    return ctx.require(_lin(z_L) - _lin(z_F), ">=", 0.0)


def size_report(ctx: EncodingContext) -> dict:
    m = ctx.model
    return {"variables": m.num_vars, "binaries": m.num_binaries, "constraints": len(m.constraints)}


__all__ = [
    "BigMError", "HorizonError", "RVal", "TrajectoryCopy", "EncodingContext",
    "add_trajectory_copy", "add_fixed_trace", "encode_predicate", "predicate_big_m",
    "encode_bool", "encode_robustness", "encode_minmax", "POLARITIES", "encode_rhoK", "encode_effort",
    "encode_cost", "encode_implication", "pwl_tangent_points", "pwl_square", "pwl_gap_bound",
    "size_report",
]
