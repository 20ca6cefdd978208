"""CPLEX-style LP text export and a reader for the same subset."""

from __future__ import annotations

import math
import re

from .model import LinExpr, MilpModel, ObjSense, Sense, VarKind

_BAD = re.compile(r"[^A-Za-z0-9_.(){}!\"#$%&/,;?@`'|~]")


def lp_name(name: str) -> str:
    """Map a model name to a legal LP identifier (``uL[3][0]`` -> ``uL(3)(0)``)."""
    s = name.replace("[", "(").replace("]", ")")
    s = _BAD.sub("_", s)
    if not s or s[0].isdigit() or s[0] in ".eE" and (len(s) == 1 or s[1].isdigit()):
        s = "_" + s
    return s


def _num(v: float) -> str:
    return repr(float(v))


def _expr(terms, names) -> str:
    if not terms:
        return "0 " + names[0] if names else "0"
    parts = []
    for vid, coef in terms:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {names[vid]}")
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def write_lp(model: MilpModel) -> str:
    names = [lp_name(v.name) for v in model.variables]
    if len(set(names)) != len(names):
        # keep identifiers unique after sanitising
        seen = {}
        for i, n in enumerate(names):
            if n in seen:
                names[i] = f"{n}__{i}"
            seen[n] = i
    out = [f"\\ Problem: {model.name}"]
    if model.objective.const:
        out.append(f"\\ objective constant: {_num(model.objective.const)}")
    out.append("Maximize" if model.obj_sense is ObjSense.MAX else "Minimize")
    obj_terms = sorted((k, v) for k, v in model.objective.terms.items() if v != 0.0)
    obj = _expr(obj_terms, names) if obj_terms else f"0 {names[0]}" if names else "0"
    if model.objective.const:
        obj += f" + {_num(model.objective.const)} __const"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    for k, con in enumerate(model.constraints):
        cname = lp_name(con.name) if con.name else f"c{k}"
        op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}[con.sense]
        lhs = _expr(con.terms, names) if con.terms else f"0 {names[0]}"
        out.append(f" {cname}: {lhs} {op} {_num(con.rhs)}")
    out.append("Bounds")
    if model.objective.const:
        out.append(" __const = 1")
    # every variable is listed here, in model order, so ids survive a round trip
    for v, n in zip(model.variables, names):
        lo, hi = v.lower, v.upper
        if lo == hi:
            out.append(f" {n} = {_num(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            out.append(f" {n} free")
        else:
            los = "-inf" if math.isinf(lo) else _num(lo)
            his = "+inf" if math.isinf(hi) else _num(hi)
            out.append(f" {los} <= {n} <= {his}")
    bins = [n for v, n in zip(model.variables, names) if v.kind is VarKind.BINARY]
    if bins:
        out.append("Binary")
        for i in range(0, len(bins), 8):
            out.append(" " + " ".join(bins[i:i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def _parse_num(s: str) -> float:
    s = s.strip().lower()
    if s in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def _parse_expr(text: str) -> list[tuple[str, float]]:
    text = text.strip()
    terms = []
    pos = 0
    tok = re.compile(r"\s*([+-])?\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*([^\s+\-<>=:]+)?")
    while pos < len(text):
        m = tok.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse LP expression near {text[pos:pos + 20]!r}")
        sign, coef, name = m.groups()
        pos = m.end()
        if name is None:
            if coef is None:
                continue
            raise ValueError("constant terms are not supported in LP rows")
        value = float(coef) if coef else 1.0
        if sign == "-":
            value = -value
        terms.append((name, value))
    return terms


def _looks_numeric(s: str) -> bool:
    try:
        _parse_num(s)
        return True
    except ValueError:
        return False


def read_lp(text: str) -> MilpModel:
    lines = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if line:
            lines.append(line)
    name = "model"
    for raw in text.splitlines():
        if raw.startswith("\\ Problem:"):
            name = raw.split(":", 1)[1].strip()
    section = None
    obj_sense = ObjSense.MIN
    obj_text = ""
    rows: list[tuple[str, str]] = []
    bounds: list[str] = []
    binaries: list[str] = []
    buf = ""
    heads = {"minimize": "obj", "minimise": "obj", "min": "obj", "maximize": "obj", "maximise": "obj",
             "max": "obj", "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
             "bounds": "bounds", "binary": "bin", "binaries": "bin", "bin": "bin", "end": "end"}

    def flush():
        nonlocal buf, obj_text
        if not buf:
            return
        if section == "obj":
            obj_text += " " + buf
        elif section == "st":
            label, _, body = buf.partition(":") if ":" in buf else ("", "", buf)
            rows.append((label.strip(), body.strip()))
        buf = ""

    for line in lines:
        key = line.lower()
        if key in heads:
            flush()
            section = heads[key]
            if key.startswith("max"):
                obj_sense = ObjSense.MAX
            continue
        if section == "obj":
            buf += " " + line
        elif section == "st":
            # a row ends once it has a relational operator and a rhs
            buf = (buf + " " + line).strip()
            if re.search(r"(<=|>=|=<|=>|<|>|=)\s*[-+]?[\d.]+(?:[eE][+-]?\d+)?\s*$", buf) or \
                    re.search(r"(<=|>=|=)\s*[-+]?inf", buf, re.I):
                flush()
        elif section == "bounds":
            bounds.append(line)
        elif section == "bin":
            binaries.extend(line.split())
    flush()

    model = MilpModel(name)
    order: list[str] = []
    for b in bounds:
        toks = b.replace("<=", " <= ").replace(">=", " >= ").split()
        cand = toks[2] if len(toks) == 5 else toks[0]
        if len(toks) == 3 and toks[1] in ("<=", ">=") and _looks_numeric(toks[0]):
            cand = toks[2]
        if cand != "__const" and cand not in order:
            order.append(cand)

    def note(n):
        if n not in order:
            order.append(n)

    obj_body = obj_text.split(":", 1)[1] if ":" in obj_text else obj_text
    obj_terms = _parse_expr(obj_body)
    parsed_rows = []
    for label, body in rows:
        m = re.match(r"(.*?)(<=|>=|=<|=>|<|>|=)(.*)$", body)
        if not m:
            raise ValueError(f"bad constraint row {body!r}")
        lhs, op, rhs = m.groups()
        terms = _parse_expr(lhs)
        op = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(op, op)
        parsed_rows.append((label, terms, op, _parse_num(rhs)))
        for n, _ in terms:
            note(n)
    for n, _ in obj_terms:
        note(n)
    bnd = {}
    for b in bounds:
        toks = b.replace("<=", " <= ").replace(">=", " >= ").split()
        if len(toks) == 2 and toks[1].lower() == "free":
            bnd[toks[0]] = (-math.inf, math.inf)
            note(toks[0])
        elif len(toks) == 5:
            bnd[toks[2]] = (_parse_num(toks[0]), _parse_num(toks[4]))
            note(toks[2])
        elif len(toks) == 3 and toks[1] == "=":
            v = _parse_num(toks[2])
            bnd[toks[0]] = (v, v)
            note(toks[0])
        elif len(toks) == 3 and toks[1] in ("<=", ">="):
            if _looks_numeric(toks[0]):
                # "lo <= x" form
                lo = _parse_num(toks[0])
                bnd[toks[2]] = (lo, bnd.get(toks[2], (0.0, math.inf))[1])
                note(toks[2])
            else:
                cur = bnd.get(toks[0], (0.0, math.inf))
                v = _parse_num(toks[2])
                bnd[toks[0]] = (cur[0], v) if toks[1] == "<=" else (v, cur[1])
                note(toks[0])
        else:
            raise ValueError(f"bad bound line {b!r}")
    for n in binaries:
        note(n)
    binset = set(binaries)
    const = 0.0
    ids = {}
    for n in order:
        if n == "__const":
            continue
        if n in binset:
            lo, hi = bnd.get(n, (0.0, 1.0))
            ids[n] = model.add_variable(n, VarKind.BINARY, lo, hi)
        else:
            lo, hi = bnd.get(n, (0.0, math.inf))
            ids[n] = model.add_variable(n, VarKind.CONTINUOUS, lo, hi)
    obj = LinExpr()
    for n, v in obj_terms:
        if n == "__const":
            const += v
        else:
            obj = obj + v * ids[n]
    model.set_objective(obj + const, obj_sense)
    for label, terms, op, rhs in parsed_rows:
        e = LinExpr()
        for n, v in terms:
            e = e + v * ids[n]
        model.add_constraint(e, op, rhs, name=label)
    return model
