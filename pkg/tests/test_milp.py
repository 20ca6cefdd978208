import itertools
import math

import numpy as np
import pytest

from stackstl.milp import (BackendUnavailable, LinExpr, MilpModel, ModelError, Status,
                           available_backends, backend_solve, get_backend, read_lp, solve_lp,
                           solve_milp, write_lp)


def textbook_simplex(c, A, b):
    """max c.x s.t. A x <= b, x >= 0 with b >= 0: slack-basis tableau, Bland's rule."""
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    while True:
        enter = next((j for j in range(n + m) if T[m, j] < -1e-12), None)
        if enter is None:
            break
        ratios = [(T[i, -1] / T[i, enter], basis[i], i) for i in range(m) if T[i, enter] > 1e-12]
        if not ratios:
            return math.inf
        _, _, r = min(ratios)
        T[r] /= T[r, enter]
        for i in range(m + 1):
            if i != r:
                T[i] -= T[i, enter] * T[r]
        basis[r] = enter
    return T[m, -1]


def _lp_model(c, A, b, sense="max"):
    m = MilpModel("lp")
    xs = [m.continuous(f"x{j}", 0.0) for j in range(len(c))]
    for i, row in enumerate(A):
        m.add_constraint(sum((float(a) * x for a, x in zip(row, xs)), LinExpr()), "<=", float(b[i]))
    m.set_objective(sum((float(cj) * x for cj, x in zip(c, xs)), LinExpr()), sense)
    return m, xs


def test_lp_matches_textbook_simplex_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n, k = int(rng.integers(2, 7)), int(rng.integers(1, 6))
        A = rng.uniform(-1, 3, (k, n)).round(3)
        A = np.vstack([A, np.ones(n)])  # keeps the region bounded
        b = rng.uniform(0.5, 5, k + 1).round(3)
        c = rng.uniform(-1, 2, n).round(3)
        expected = textbook_simplex(c, A, b)
        model, _ = _lp_model(c, A, b)
        res = solve_lp(model)
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(expected, abs=1e-6)


def test_lp_infeasible_and_unbounded():
    m = MilpModel()
    x = m.continuous("x", 0.0, 1.0)
    m.add_constraint(x, ">=", 2.0)
    assert solve_lp(m).status is Status.INFEASIBLE
    m = MilpModel()
    x = m.continuous("x", 0.0)
    m.set_objective(x, "max")
    assert solve_lp(m).status is Status.UNBOUNDED


def test_equality_and_free_variables():
    m = MilpModel()
    x = m.continuous("x")
    y = m.continuous("y")
    m.add_constraint(x + y, "=", 1.0)
    m.add_constraint(x - y, ">=", -3.0)
    m.set_objective(x, "min")
    res = solve_milp(m)
    assert res.status is Status.OPTIMAL
    assert res.value(x) == pytest.approx(-1.0)
    assert res.value(y) == pytest.approx(2.0)


def test_knapsack_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = 10
        w = rng.integers(1, 20, n)
        v = rng.integers(1, 30, n)
        cap = int(w.sum() // 2)
        m = MilpModel("knap")
        z = [m.binary(f"z{i}") for i in range(n)]
        m.add_constraint(sum((int(wi) * zi for wi, zi in zip(w, z)), LinExpr()), "<=", cap)
        m.set_objective(sum((int(vi) * zi for vi, zi in zip(v, z)), LinExpr()), "max")
        best = max(int(v @ np.array(bits)) for bits in itertools.product([0, 1], repeat=n)
                   if w @ np.array(bits) <= cap)
        res = solve_milp(m)
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(best)
        assert res.best_bound == pytest.approx(best, abs=1e-6)
        assert not m.violations(res.assignment)


def test_mixed_integer_with_continuous_part():
    m = MilpModel()
    z = m.binary("z")
    x = m.continuous("x", 0.0, 10.0)
    m.add_constraint(x - 10 * z, "<=", 0.0)
    m.add_constraint(x, ">=", 2.5)
    m.set_objective(x + 3 * z, "min")
    res = solve_milp(m)
    assert res.objective == pytest.approx(5.5)
    assert res.value(z) == 1.0


def test_node_limit_reports_limit_status():
    rng = np.random.default_rng(2)
    n = 12
    m = MilpModel()
    z = [m.binary(f"z{i}") for i in range(n)]
    w = rng.integers(5, 40, n)
    m.add_constraint(sum((int(a) * b for a, b in zip(w, z)), LinExpr()), "<=", int(w.sum()) // 2 + 0.5)
    m.set_objective(sum((float(a) + 0.37 * i * b for i, (a, b) in enumerate(zip(w, z))), LinExpr()), "max")
    res = solve_milp(m, node_limit=1)
    assert res.status in (Status.ITER_LIMIT, Status.OPTIMAL)
    if res.status is Status.ITER_LIMIT and res.has_solution:
        assert res.best_bound >= res.objective - 1e-9


def test_model_errors():
    m = MilpModel()
    m.continuous("x")
    with pytest.raises(ModelError):
        m.continuous("x")
    with pytest.raises(ModelError):
        m.add_variable("y", lower=2.0, upper=1.0)
    with pytest.raises(ModelError):
        m.add_constraint(LinExpr({7: 1.0}), "<=", 0.0)
    with pytest.raises(ModelError):
        m.add_constraint(LinExpr({0: math.inf}), "<=", 0.0)


def test_lp_file_round_trip():
    rng = np.random.default_rng(8)
    m = MilpModel("rt")
    z = [m.binary(f"z[{i}]") for i in range(4)]
    x = [m.continuous(f"x({i})", -2.0, 3.5) for i in range(3)]
    f = m.continuous("free")
    for _ in range(5):
        e = LinExpr()
        for v in z + x:
            e = e + float(rng.integers(-3, 4)) * v
        m.add_constraint(e + f, rng.choice(["<=", ">=", "="]), float(rng.integers(-2, 3)))
    m.set_objective(x[0] - 2 * z[1] + 0.5 * f + 1.25, "max")
    text = write_lp(m)
    back = read_lp(text)
    assert back.num_vars == m.num_vars
    assert back.num_binaries == 4
    assert len(back.constraints) == len(m.constraints)
    assert write_lp(back) == text
    a, b = solve_milp(m), solve_milp(back)
    assert a.status == b.status
    if a.ok:
        assert a.objective == pytest.approx(b.objective)


def test_lp_file_sections():
    m = MilpModel("p")
    z = m.binary("z")
    x = m.continuous("x", 0.0, 4.0)
    m.add_constraint(x + z, "<=", 3.0, "cap")
    m.set_objective(x, "max")
    text = write_lp(m)
    for section in ("Maximize", "Subject To", "Bounds", "Binar", "End"):
        assert section in text


def test_backends_agree():
    assert {"embedded", "highs", "lp-file"} <= set(available_backends())
    rng = np.random.default_rng(9)
    for _ in range(10):
        m = MilpModel()
        z = [m.binary(f"z{i}") for i in range(6)]
        x = m.continuous("x", -5.0, 5.0)
        for _ in range(4):
            e = LinExpr()
            for v in z:
                e = e + float(rng.integers(-3, 4)) * v
            m.add_constraint(e + float(rng.integers(-2, 3)) * x, "<=", float(rng.integers(0, 5)))
        obj = LinExpr()
        for v in z:
            obj = obj + float(rng.uniform(-1, 1)) * v
        m.set_objective(obj + 0.3 * x, "min")
        a = backend_solve(m, "embedded")
        b = backend_solve(m, "highs")
        assert a.status == b.status
        if a.ok:
            assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_lp_file_backend_writes_model(tmp_path):
    from stackstl.milp import LPFileBackend, SolveLimits
    m = MilpModel()
    x = m.continuous("x", 0.0, 1.0)
    m.set_objective(x, "max")
    path = tmp_path / "m.lp"
    res = LPFileBackend(path).solve(m, SolveLimits())
    assert res.objective == pytest.approx(1.0)
    assert path.read_text() == write_lp(m)


def test_unknown_backend():
    with pytest.raises(BackendUnavailable):
        get_backend("nope")
