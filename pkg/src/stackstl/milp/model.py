"""MILP model builder: variables, linear expressions, constraints, results."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse


class ModelError(ValueError):
    pass


class VarKind(str, Enum):
    CONTINUOUS = "C"
    BINARY = "B"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class ObjSense(str, Enum):
    MIN = "min"
    MAX = "max"


class Status(str, Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"
    ITER_LIMIT = "ITER_LIMIT"
    TIME_LIMIT = "TIME_LIMIT"
    NUMERICAL = "NUMERICAL"


class LinExpr:
    """Sparse affine expression ``sum coef * var + const`` over variable ids."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def of(x) -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, Var):
            return LinExpr({x.id: 1.0})
        return LinExpr(const=float(x))

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def _iadd(self, other, scale: float = 1.0) -> "LinExpr":
        if isinstance(other, Var):
            self.terms[other.id] = self.terms.get(other.id, 0.0) + scale
        elif isinstance(other, LinExpr):
            for k, v in other.terms.items():
                self.terms[k] = self.terms.get(k, 0.0) + scale * v
            self.const += scale * other.const
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other):
        return self.copy()._iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        return (-self)._iadd(other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: k * v for i, v in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[i] for i, v in self.terms.items())

    def is_constant(self) -> bool:
        return all(v == 0.0 for v in self.terms.values())

    def __repr__(self):
        return f"LinExpr({self.terms}, {self.const})"


class Var:
    __slots__ = ("id", "name")

    def __init__(self, id: int, name: str):
        self.id = id
        self.name = name

    def _e(self):
        return LinExpr({self.id: 1.0})

    def __add__(self, o):
        return self._e() + o

    __radd__ = __add__

    def __sub__(self, o):
        return self._e() - o

    def __rsub__(self, o):
        return LinExpr.of(o) - self._e()

    def __neg__(self):
        return self._e() * -1.0

    def __mul__(self, k):
        return self._e() * k

    __rmul__ = __mul__

    def __repr__(self):
        return f"Var({self.id}, {self.name!r})"


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: VarKind
    lower: float
    upper: float


@dataclass(frozen=True)
class LinConstraint:
    terms: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float
    name: str = ""


class MilpModel:
    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[LinConstraint] = []
        self.names: dict[str, int] = {}
        self.obj_sense = ObjSense.MIN
        self.objective = LinExpr()
        self.frozen = False
        self._anon = 0

    # -- building --
    def _check_mutable(self):
        if self.frozen:
            raise ModelError("model is frozen")

    def add_variable(self, name: str | None = None, kind: VarKind = VarKind.CONTINUOUS,
                     lower: float = 0.0, upper: float = math.inf) -> Var:
        self._check_mutable()
        kind = VarKind(kind)
        if name is None:
            name = f"_v{self._anon}"
            self._anon += 1
        if name in self.names:
            raise ModelError(f"duplicate variable name {name!r}")
        lower, upper = float(lower), float(upper)
        if kind is VarKind.BINARY:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ModelError(f"bad bounds for {name!r}: [{lower}, {upper}]")
        if lower == math.inf or upper == -math.inf:
            raise ModelError(f"bad bounds for {name!r}: [{lower}, {upper}]")
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, kind, lower, upper))
        self.names[name] = vid
        return Var(vid, name)

    def binary(self, name: str | None = None) -> Var:
        return self.add_variable(name, VarKind.BINARY, 0.0, 1.0)

    def continuous(self, name: str | None = None, lower: float = -math.inf, upper: float = math.inf) -> Var:
        return self.add_variable(name, VarKind.CONTINUOUS, lower, upper)

    def var(self, name: str) -> Var:
        return Var(self.names[name], name)

    def add_constraint(self, lhs, sense, rhs=0.0, name: str = "") -> LinConstraint:
        """Add ``lhs sense rhs``; constants on either side are folded into the rhs."""
        self._check_mutable()
        sense = Sense(sense)
        if isinstance(lhs, (list, tuple)):
            raise ModelError("pass a LinExpr or Var, not a list of terms")
        expr = LinExpr.of(lhs) - rhs
        terms = []
        for vid, coef in sorted(expr.terms.items()):
            if not (0 <= vid < len(self.variables)):
                raise ModelError(f"constraint references undeclared variable id {vid}")
            if not math.isfinite(coef):
                raise ModelError("non-finite coefficient")
            if coef != 0.0:
                terms.append((vid, coef))
        r = -expr.const
        if not math.isfinite(r):
            raise ModelError("non-finite right-hand side")
        con = LinConstraint(tuple(terms), sense, r, name)
        self.constraints.append(con)
        return con

    def add_terms_constraint(self, terms: Iterable[tuple[int, float]], sense, rhs: float,
                             name: str = "") -> LinConstraint:
        seen = set()
        expr = LinExpr()
        for vid, coef in terms:
            if vid in seen:
                raise ModelError(f"duplicate variable id {vid} in constraint")
            seen.add(vid)
            expr.terms[vid] = float(coef)
        return self.add_constraint(expr, sense, rhs, name)

    def set_objective(self, expr, sense=ObjSense.MIN):
        self._check_mutable()
        self.obj_sense = ObjSense(sense)
        self.objective = LinExpr.of(expr).copy()

    def set_bounds(self, var: Var | int, lower: float, upper: float):
        self._check_mutable()
        vid = var.id if isinstance(var, Var) else var
        v = self.variables[vid]
        if lower > upper:
            raise ModelError(f"bad bounds for {v.name!r}")
        self.variables[vid] = Variable(vid, v.name, v.kind, float(lower), float(upper))

    def fix(self, var: Var | int, value: float):
        self.set_bounds(var, value, value)

    def freeze(self) -> "MilpModel":
        self.frozen = True
        return self

    def copy(self) -> "MilpModel":
        m = MilpModel(self.name)
        m.variables = list(self.variables)
        m.constraints = list(self.constraints)
        m.names = dict(self.names)
        m.obj_sense = self.obj_sense
        m.objective = self.objective.copy()
        m._anon = self._anon
        return m

    # -- views --
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_binaries(self) -> int:
        return sum(v.kind is VarKind.BINARY for v in self.variables)

    def arrays(self):
        """Matrix form: (c, c0, A csr, row_lo, row_hi, lo, hi, is_binary)."""
        n = self.num_vars
        c = np.zeros(n)
        for i, v in self.objective.terms.items():
            c[i] += v
        rows, cols, vals = [], [], []
        rl = np.empty(len(self.constraints))
        ru = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for vid, coef in con.terms:
                rows.append(r)
                cols.append(vid)
                vals.append(coef)
            rl[r] = con.rhs if con.sense in (Sense.GE, Sense.EQ) else -np.inf
            ru[r] = con.rhs if con.sense in (Sense.LE, Sense.EQ) else np.inf
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        lo = np.array([v.lower for v in self.variables])
        hi = np.array([v.upper for v in self.variables])
        isb = np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=bool)
        return c, self.objective.const, A, rl, ru, lo, hi, isb

    def violations(self, x: np.ndarray, feas_tol: float = 1e-7, int_tol: float = 1e-6) -> list[str]:
        bad = []
        for v in self.variables:
            if x[v.id] < v.lower - feas_tol or x[v.id] > v.upper + feas_tol:
                bad.append(f"bound {v.name}")
            if v.kind is VarKind.BINARY and abs(x[v.id] - round(x[v.id])) > int_tol:
                bad.append(f"integrality {v.name}")
        for k, con in enumerate(self.constraints):
            act = sum(c * x[i] for i, c in con.terms)
            scale = max(1.0, abs(con.rhs))
            if con.sense is Sense.LE and act > con.rhs + feas_tol * scale \
                    or con.sense is Sense.GE and act < con.rhs - feas_tol * scale \
                    or con.sense is Sense.EQ and abs(act - con.rhs) > feas_tol * scale:
                bad.append(f"constraint {con.name or k}")
        return bad


@dataclass
class SolveResult:
    status: Status
    assignment: np.ndarray | None = None
    objective: float = math.nan
    best_bound: float = math.nan
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def has_solution(self) -> bool:
        return self.assignment is not None

    def value(self, x) -> float:
        if self.assignment is None:
            raise ModelError(f"no solution available (status {self.status.value})")
        if isinstance(x, Var):
            return float(self.assignment[x.id])
        if isinstance(x, int):
            return float(self.assignment[x])
        return float(LinExpr.of(x).value(self.assignment))

    def values(self, xs) -> np.ndarray:
        return np.array([[self.value(v) for v in row] for row in xs]) if xs and isinstance(xs[0], (list, tuple)) \
            else np.array([self.value(v) for v in xs])
