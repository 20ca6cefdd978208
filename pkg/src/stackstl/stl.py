"""Bounded-time STL over affine predicates: AST, parser, printer and monitors.

Time is measured in integer steps.  Both monitors compute a whole signal
(one value per admissible start time) with numpy and index into it, which
keeps them cheap enough for exhaustive checks over thousands of traces.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Predicate", "TrueF", "Pred", "Not", "And", "Or", "Until", "Eventually", "Always",
    "Formula", "Trace", "STLSyntaxError", "TraceTooShortError",
    "parse", "to_text", "horizon", "eval_bool", "robustness",
    "bool_signal", "robustness_signal", "simplify", "nnf", "subformulas", "depth",
    "FALSE", "TRUE",
]


class STLSyntaxError(ValueError):
    def __init__(self, msg: str, text: str = "", pos: int = 0):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} (line {line}, column {col})")
        self.line = line
        self.column = col


class TraceTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    """Affine predicate ``coeffs . x + offset >= 0``."""

    coeffs: tuple[float, ...]
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "offset", float(self.offset))
        if not any(c != 0.0 for c in self.coeffs):
            raise ValueError("predicate needs a nonzero coefficient; use true/false for constants")
        if not all(math.isfinite(c) for c in self.coeffs) or not math.isfinite(self.offset):
            raise ValueError("predicate coefficients must be finite")

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def __call__(self, x) -> float:
        return float(np.dot(self.coeffs, x) + self.offset)

    def negated(self) -> "Predicate":
        return Predicate(tuple(-c for c in self.coeffs), -self.offset)


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Pred:
    pred: Predicate


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 1:
            raise ValueError("And needs at least one argument")


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 1:
            raise ValueError("Or needs at least one argument")


def _check_interval(a: int, b: int):
    if int(a) != a or int(b) != b:
        raise ValueError(f"interval bounds must be integers, got [{a},{b}]")
    if not 0 <= a <= b:
        raise ValueError(f"invalid interval [{a},{b}]: need 0 <= a <= b")


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    a: int
    b: int

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"
    a: int
    b: int

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Always:
    arg: "Formula"
    a: int
    b: int

    def __post_init__(self):
        _check_interval(self.a, self.b)


Formula = Union[TrueF, Pred, Not, And, Or, Until, Eventually, Always]

TRUE = TrueF()
FALSE = Not(TRUE)


@dataclass(frozen=True)
class Trace:
    states: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[1] < 1:
            raise ValueError("trace states must be a (T, n) array")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "states", s)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]


def horizon(phi: Formula) -> int:
    if isinstance(phi, (TrueF, Pred)):
        return 0
    if isinstance(phi, Not):
        return horizon(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(horizon(a) for a in phi.args)
    if isinstance(phi, Until):
        return phi.b + max(horizon(phi.left), horizon(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.b + horizon(phi.arg)
    raise TypeError(f"not a formula: {phi!r}")


def depth(phi: Formula) -> int:
    if isinstance(phi, (TrueF, Pred)):
        return 0
    if isinstance(phi, (Not, Eventually, Always)):
        return 1 + depth(phi.arg)
    if isinstance(phi, (And, Or)):
        return 1 + max(depth(a) for a in phi.args)
    if isinstance(phi, Until):
        return 1 + max(depth(phi.left), depth(phi.right))
    raise TypeError(f"not a formula: {phi!r}")


def subformulas(phi: Formula):
    yield phi
    if isinstance(phi, (Not, Eventually, Always)):
        yield from subformulas(phi.arg)
    elif isinstance(phi, (And, Or)):
        for a in phi.args:
            yield from subformulas(a)
    elif isinstance(phi, Until):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)


def predicates(phi: Formula) -> list[Predicate]:
    return [f.pred for f in subformulas(phi) if isinstance(f, Pred)]


# -- monitors ---------------------------------------------------------------

def _window(sig: np.ndarray, length: int, a: int, b: int, reduce) -> np.ndarray:
    # out[t] = reduce(sig[t+a .. t+b])
    out = sig[a:a + length].copy()
    for k in range(a + 1, b + 1):
        out = reduce(out, sig[k:k + length])
    return out


def _signal(phi: Formula, x: np.ndarray, length: int, boolean: bool) -> np.ndarray:
    """Values of ``phi`` at t = 0..length-1; requires len(x) >= length + horizon."""
    if isinstance(phi, TrueF):
        shape = (length,) + x.shape[1:-1]
        return np.full(shape, True) if boolean else np.full(shape, np.inf)
    if isinstance(phi, Pred):
        mu = x[:length] @ np.asarray(phi.pred.coeffs) + phi.pred.offset
        return mu >= 0 if boolean else mu
    if isinstance(phi, Not):
        s = _signal(phi.arg, x, length, boolean)
        return ~s if boolean else -s
    if isinstance(phi, (And, Or)):
        lo = (np.logical_and if boolean else np.minimum) if isinstance(phi, And) \
            else (np.logical_or if boolean else np.maximum)
        out = _signal(phi.args[0], x, length, boolean)
        for a in phi.args[1:]:
            out = lo(out, _signal(a, x, length, boolean))
        return out
    if isinstance(phi, (Eventually, Always)):
        inner = _signal(phi.arg, x, length + phi.b, boolean)
        if isinstance(phi, Eventually):
            red = np.logical_or if boolean else np.maximum
        else:
            red = np.logical_and if boolean else np.minimum
        return _window(inner, length, phi.a, phi.b, red)
    if isinstance(phi, Until):
        conj = np.logical_and if boolean else np.minimum
        disj = np.logical_or if boolean else np.maximum
        left = _signal(phi.left, x, length + phi.b, boolean)
        right = _signal(phi.right, x, length + phi.b, boolean)
        # prefix[t] tracks the conjunction of left over [t, t+k]
        prefix = left[:length].copy()
        for k in range(1, phi.a):
            prefix = conj(prefix, left[k:k + length])
        out = None
        for k in range(phi.a, phi.b + 1):
            if k > 0:
                prefix = conj(prefix, left[k:k + length])
            term = conj(prefix, right[k:k + length])
            out = term if out is None else disj(out, term)
        return out
    raise TypeError(f"not a formula: {phi!r}")


def _states(trace) -> np.ndarray:
    if isinstance(trace, Trace):
        return trace.states
    s = np.asarray(trace, dtype=float)
    return s[:, None] if s.ndim == 1 else s


def _prepare(phi: Formula, trace, t: int) -> np.ndarray:
    x = _states(trace)
    need = t + horizon(phi) + 1
    if x.shape[0] < need:
        raise TraceTooShortError(
            f"trace has {x.shape[0]} states, formula needs {need} from t={t}")
    for p in predicates(phi):
        if p.dim != x.shape[1]:
            raise ValueError(f"predicate dimension {p.dim} does not match trace dimension {x.shape[1]}")
    return x


def bool_signal(phi: Formula, trace) -> np.ndarray:
    x = _prepare(phi, trace, 0)
    return _signal(phi, x, x.shape[0] - horizon(phi), True)


def robustness_signal(phi: Formula, trace) -> np.ndarray:
    x = _prepare(phi, trace, 0)
    return _signal(phi, x, x.shape[0] - horizon(phi), False)


def batch_signal(phi: Formula, states: np.ndarray, boolean: bool = False) -> np.ndarray:
    """Value at t = 0 for a batch of traces of shape (batch, T, n)."""
    x = np.asarray(states, dtype=float)
    if x.ndim != 3:
        raise ValueError("batch states must have shape (batch, T, n)")
    need = horizon(phi) + 1
    if x.shape[1] < need:
        raise TraceTooShortError(f"traces have {x.shape[1]} states, formula needs {need}")
    return _signal(phi, np.swapaxes(x, 0, 1), 1, boolean)[0]


def eval_bool(phi: Formula, trace, t: int = 0) -> bool:
    x = _prepare(phi, trace, t)
    return bool(_signal(phi, x[t:], 1, True)[0])


def robustness(phi: Formula, trace, t: int = 0) -> float:
    x = _prepare(phi, trace, t)
    return float(_signal(phi, x[t:], 1, False)[0])


# -- rewriting --------------------------------------------------------------

def simplify(phi: Formula) -> Formula:
    """Remove constant subformulas.  The result is TRUE, FALSE or constant-free."""
    if isinstance(phi, (TrueF, Pred)):
        return phi
    if isinstance(phi, Not):
        a = simplify(phi.arg)
        if isinstance(a, Not):
            return a.arg
        return Not(a)
    if isinstance(phi, (And, Or)):
        absorbing, neutral = (FALSE, TRUE) if isinstance(phi, And) else (TRUE, FALSE)
        args = []
        for a in map(simplify, phi.args):
            if a == absorbing:
                return absorbing
            if a != neutral:
                args.append(a)
        if not args:
            return neutral
        return args[0] if len(args) == 1 else type(phi)(tuple(args))
    if isinstance(phi, (Eventually, Always)):
        a = simplify(phi.arg)
        if a in (TRUE, FALSE):
            return a
        return type(phi)(a, phi.a, phi.b)
    if isinstance(phi, Until):
        left, right = simplify(phi.left), simplify(phi.right)
        if left == FALSE or right == FALSE:
            return FALSE
        if left == TRUE:
            return right if right == TRUE else Eventually(right, phi.a, phi.b)
        if right == TRUE:
            return Always(left, 0, phi.a)
        return Until(left, right, phi.a, phi.b)
    raise TypeError(f"not a formula: {phi!r}")


def nnf(phi: Formula, negate: bool = False) -> Formula:
    """Push negations down to predicates.

    Negated until has no dual in the fragment and stays as ``Not(Until(...))``.
    """
    if isinstance(phi, TrueF):
        return FALSE if negate else TRUE
    if isinstance(phi, Pred):
        return Not(phi) if negate else phi
    if isinstance(phi, Not):
        return nnf(phi.arg, not negate)
    if isinstance(phi, (And, Or)):
        flip = {And: Or, Or: And}
        cls = flip[type(phi)] if negate else type(phi)
        return cls(tuple(nnf(a, negate) for a in phi.args))
    if isinstance(phi, (Eventually, Always)):
        cls = type(phi)
        if negate:
            cls = Always if cls is Eventually else Eventually
        return cls(nnf(phi.arg, negate), phi.a, phi.b)
    if isinstance(phi, Until):
        u = Until(nnf(phi.left), nnf(phi.right), phi.a, phi.b)
        return Not(u) if negate else u
    raise TypeError(f"not a formula: {phi!r}")


# -- printing ---------------------------------------------------------------

def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _pred_text(p: Predicate, names: Sequence[str]) -> str:
    parts = []
    for c, name in zip(p.coeffs, names):
        if c == 0.0:
            continue
        mag = abs(c)
        term = name if mag == 1.0 else f"{_num(mag)}*{name}"
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if c > 0 else f"- {term}")
    return f"{' '.join(parts)} >= {_num(-p.offset)}"


def _is_binary(phi) -> bool:
    return isinstance(phi, (And, Or, Until))


def to_text(phi: Formula, names: Sequence[str]) -> str:
    def wrap(f):
        s = to_text(f, names)
        return f"({s})" if _is_binary(f) else s

    if isinstance(phi, TrueF):
        return "true"
    if isinstance(phi, Pred):
        if phi.pred.dim != len(names):
            raise ValueError("predicate dimension does not match variable names")
        return _pred_text(phi.pred, names)
    if isinstance(phi, Not):
        inner = to_text(phi.arg, names)
        return f"!({inner})" if _is_binary(phi.arg) or isinstance(phi.arg, Pred) else f"!{inner}"
    if isinstance(phi, (And, Or)):
        op = " & " if isinstance(phi, And) else " | "
        return op.join(wrap(a) for a in phi.args)
    if isinstance(phi, (Eventually, Always)):
        op = "F" if isinstance(phi, Eventually) else "G"
        inner = to_text(phi.arg, names)
        if _is_binary(phi.arg) or isinstance(phi.arg, Pred):
            inner = f"({inner})"
        return f"{op}[{phi.a},{phi.b}] {inner}"
    if isinstance(phi, Until):
        def side(f):
            s = to_text(f, names)
            return f"({s})" if _is_binary(f) or isinstance(f, Pred) else s
        return f"{side(phi.left)} U[{phi.a},{phi.b}] {side(phi.right)}"
    raise TypeError(f"not a formula: {phi!r}")


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<op>->|>=|<=|[!&|()\[\],*+-])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

_RESERVED = {"F", "G", "U", "true", "false"}


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = {n: i for i, n in enumerate(names)}
        if len(self.names) != len(names):
            raise ValueError("duplicate state variable names")
        bad = _RESERVED & set(names)
        if bad:
            raise ValueError(f"reserved words used as state names: {sorted(bad)}")
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise STLSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
            if m.lastgroup != "ws":
                self.toks.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.toks.append(("eof", "", len(text)))
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise STLSyntaxError(msg, self.text, tok[2])

    def expect(self, value):
        tok = self.next()
        if tok[1] != value:
            self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek()[0] != "eof":
            self.error(f"unexpected {self.peek()[1]!r}")
        return f

    def implies(self):
        left = self.disj()
        if self.peek()[1] == "->":
            self.next()
            right = self.implies()
            return Or((Not(left), right))
        return left

    def disj(self):
        args = [self.conj()]
        while self.peek()[1] == "|":
            self.next()
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conj(self):
        args = [self.until()]
        while self.peek()[1] == "&":
            self.next()
            args.append(self.until())
        return args[0] if len(args) == 1 else And(tuple(args))

    def until(self):
        left = self.unary()
        while self.peek()[1] == "U":
            self.next()
            a, b = self.interval()
            right = self.unary()
            left = Until(left, right, a, b)
        return left

    def interval(self):
        start = self.expect("[")
        a = self.integer()
        self.expect(",")
        b = self.integer()
        self.expect("]")
        if a > b:
            raise STLSyntaxError(f"invalid interval [{a},{b}]: lower bound exceeds upper", self.text, start[2])
        return a, b

    def integer(self):
        tok = self.next()
        if tok[0] != "num" or not tok[1].isdigit():
            self.error("expected a nonnegative integer", tok)
        return int(tok[1])

    def unary(self):
        tok = self.peek()
        if tok[1] == "!":
            self.next()
            return Not(self.unary())
        if tok[1] in ("F", "G"):
            self.next()
            a, b = self.interval()
            arg = self.unary()
            return Eventually(arg, a, b) if tok[1] == "F" else Always(arg, a, b)
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok[1] == "true":
            self.next()
            return TRUE
        if tok[1] == "false":
            self.next()
            return FALSE
        if tok[1] == "(":
            self.next()
            f = self.implies()
            self.expect(")")
            return f
        if tok[0] in ("num", "name") or tok[1] in ("+", "-"):
            return self.atom()
        self.error(f"unexpected {tok[1] or 'end of input'!r}")

    def number(self):
        sign = 1.0
        while self.peek()[1] in ("+", "-"):
            if self.next()[1] == "-":
                sign = -sign
        tok = self.next()
        if tok[0] != "num":
            self.error("expected a number", tok)
        return sign * float(tok[1])

    def atom(self):
        start = self.peek()
        coeffs = [0.0] * len(self.names)
        const = 0.0
        first = True
        while True:
            sign = 1.0
            tok = self.peek()
            if tok[1] in ("+", "-"):
                while self.peek()[1] in ("+", "-"):
                    if self.next()[1] == "-":
                        sign = -sign
            elif not first:
                break
            first = False
            tok = self.peek()
            coef = 1.0
            if tok[0] == "num":
                coef = float(self.next()[1])
                if self.peek()[1] == "*":
                    self.next()
                elif self.peek()[0] != "name" or self.peek()[1] in _RESERVED:
                    const += sign * coef
                    continue
            tok = self.next()
            if tok[0] != "name" or tok[1] in _RESERVED:
                self.error("expected a state variable", tok)
            if tok[1] not in self.names:
                self.error(f"unknown state variable {tok[1]!r}", tok)
            coeffs[self.names[tok[1]]] += sign * coef
        rel = self.next()
        if rel[1] not in (">=", "<="):
            self.error("expected '>=' or '<=' in predicate", rel)
        rhs = self.number()
        if rel[1] == ">=":
            c, off = coeffs, const - rhs
        else:
            c, off = [-v for v in coeffs], rhs - const
        c = [v + 0.0 for v in c]
        if not any(c):
            self.error("predicate has no state variable", start)
        return Pred(Predicate(tuple(c), off + 0.0))


def parse(text: str, names: Sequence[str]) -> Formula:
    """Parse the concrete STL syntax over the given state variable names."""
    return _Parser(text, list(names)).parse()
