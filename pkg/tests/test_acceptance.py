"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line."""

import itertools
import json
import time

import numpy as np
import pytest

from stackstl import cli, stl
from stackstl.dynamics import AffineSystem, BoundsBox, Scenario, simulate
from stackstl.encode import (RVal, EncodingContext, add_fixed_trace, encode_bool, encode_rhoK,
                             encode_robustness)
from stackstl.milp import LinExpr, MilpModel, Status, solve_milp
from stackstl.synth import (SynthConfig, antagonistic_falsifier, antagonistic_synthesize,
                            brute_force_ssp, cooperative_synthesize, grid_master)

from conftest import random_formula, toy_family, toy_scenario

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    return emit


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_monitor_sign(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = checked = 0
    for _ in range(1000):
        phi = random_formula(rng, 4, max_b=3)
        h = stl.horizon(phi)
        T = int(rng.integers(h + 1, 31))
        x = rng.uniform(-2, 2, size=(T, 2))
        r = stl.robustness(phi, x)
        if abs(r) > 1e-9:
            checked += 1
            bad += (r > 0) != stl.eval_bool(phi, x)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 10.0
    report(1, ok, f"{checked} sign checks, {bad} disagreements, {dt:.2f} s")
    assert ok


# -- 2 ---------------------------------------------------------------------------

P_X = stl.Pred(stl.Predicate((1.0, 0.0), -0.5))      # x >= 0.5
P_XY = stl.Pred(stl.Predicate((-1.0, -1.0), 0.5))    # x + y <= 0.5


def _shapes(a, b, interval):
    lo, hi = interval
    return [stl.Not(a), stl.And((a, b)), stl.Or((a, b)), stl.Eventually(a, lo, hi),
            stl.Always(a, lo, hi), stl.Until(a, b, lo, hi)]


def exhaustive_formulas():
    """Every operator over the two predicates, then every operator over those,
    with interval endpoints that keep traces within length 4."""
    out = [P_X, P_XY]
    for interval in ((0, 1), (1, 1)):
        out += _shapes(P_X, P_XY, interval)
    inner_a = _shapes(P_X, P_XY, (1, 1))
    inner_b = _shapes(P_XY, P_X, (1, 1))
    for f in inner_a:
        out += [stl.Not(f), stl.Eventually(f, 0, 1), stl.Always(f, 0, 1)]
    for f, g in itertools.product(inner_a, inner_b):
        out += [stl.And((f, g)), stl.Or((f, g)), stl.Until(f, g, 0, 1)]
    return list(dict.fromkeys(out))


def _fixed_scenario():
    return Scenario(AffineSystem([[1.0]], [[1.0]], [[1.0]]), [0.0], 4, BoundsBox([-10.0], [10.0]),
                    BoundsBox([-1.0], [1.0]), BoundsBox([-1.0], [1.0]), stl.TRUE, stl.TRUE,
                    state_names=("x",))


def test_criterion_2_encoding_exhaustive(report):
    sc = _fixed_scenario()
    values = np.array(list(itertools.product([-1.0, 0.0, 1.0], repeat=2)))
    zeros = np.zeros((sc.N, 1))
    formulas = exhaustive_formulas()
    t0 = time.perf_counter()
    checks = bad = 0
    for phi in formulas:
        h = stl.horizon(phi)
        assert h + 1 <= 4
        for idx in itertools.product(range(9), repeat=h + 1):
            tr = values[list(idx)]
            truth = stl.eval_bool(phi, tr)
            rob = stl.robustness(phi, tr)
            ctx = EncodingContext(sc, MilpModel(), u_L=zeros)
            cp = add_fixed_trace(ctx, "tr", tr)
            ctx.model.add_constraint(encode_bool(ctx, cp, phi), "=", float(truth))
            r = encode_robustness(ctx, cp, phi)
            ctx.model.set_objective(r.expr, "min")
            lo = solve_milp(ctx.model)
            ctx.model.set_objective(r.expr, "max")
            hi = solve_milp(ctx.model)
            ok = lo.ok and hi.ok and abs(lo.objective - rob) <= 1e-6 and abs(hi.objective - rob) <= 1e-6
            ctx = EncodingContext(sc, MilpModel(), u_L=zeros)
            cp = add_fixed_trace(ctx, "tr", tr)
            ctx.model.add_constraint(encode_bool(ctx, cp, phi), "=", float(not truth))
            ok = ok and solve_milp(ctx.model).status is Status.INFEASIBLE
            checks += 1
            bad += not ok
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 300.0
    report(2, ok, f"{len(formulas)} formulas, {checks} traces, {bad} mismatches, {dt:.1f} s")
    assert ok


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3_rhoK_gadget(report):
    sc = toy_scenario(N=3)
    rng = np.random.default_rng(33)
    worst = 0.0
    for _ in range(100):
        k, J, rf = rng.uniform(-5, 5, 3)
        m = MilpModel()
        ctx = EncodingContext(sc, m, u_L=np.zeros((sc.N, 1)))
        vJ, vF = m.continuous("J", -5.0, 5.0), m.continuous("rF", -5.0, 5.0)
        m.fix(vJ, J)
        m.fix(vF, rf)
        rk = encode_rhoK(ctx, float(k), RVal(vJ._e(), -5.0, 5.0), RVal(vF._e(), -5.0, 5.0))
        truth = max(k - J, -rf)
        for sense in ("min", "max"):
            m.set_objective(rk.expr, sense)
            res = solve_milp(m)
            worst = max(worst, abs(res.objective - truth) if res.ok else np.inf)
    ok = worst <= 1e-6
    report(3, ok, f"100 instances, max error {worst:.2e}")
    assert ok


# -- 4 ---------------------------------------------------------------------------

def test_criterion_4_embedded_solver(report):
    rng = np.random.default_rng(44)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        n = int(rng.integers(2, 13))
        mrows = int(rng.integers(1, 11))
        A = rng.integers(-5, 6, (mrows, n)).astype(float)
        b = rng.integers(-3, 8, mrows).astype(float)
        c = rng.integers(-9, 10, n).astype(float)
        model = MilpModel()
        z = [model.binary(f"z{i}") for i in range(n)]
        for row, bi in zip(A, b):
            model.add_constraint(sum((a * v for a, v in zip(row, z)), LinExpr()), "<=", bi)
        model.set_objective(sum((ci * v for ci, v in zip(c, z)), LinExpr()), "min")
        X = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
        feasible = np.all(X @ A.T <= b + 1e-9, axis=1)
        res = solve_milp(model)
        if not feasible.any():
            bad += res.status is not Status.INFEASIBLE
            continue
        best = float(np.min(X[feasible] @ c))
        bad += not (res.status is Status.OPTIMAL and abs(res.objective - best) <= 1e-6)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 120.0
    report(4, ok, f"200 models, {bad} mismatches, {dt:.1f} s")
    assert ok


# -- 5 ---------------------------------------------------------------------------

def test_criterion_5_bilevel_equivalence(report):
    sc = toy_scenario("G[2,3] x >= -0.75", "F[1,1] x >= 1.25", N=3)
    t0 = time.perf_counter()
    rows = []
    for mode in ("cooperative", "antagonistic"):
        _, brute = brute_force_ssp(sc, 5, mode)
        _, master = grid_master(sc, 5, mode)
        rows.append((mode, brute, master))
    dt = time.perf_counter() - t0
    ok = all(abs(b - m) <= 1e-6 for _, b, m in rows) and dt < 60.0
    detail = ", ".join(f"{mode}: brute {b:.6g} master {m:.6g}" for mode, b, m in rows)
    report(5, ok, f"{detail}, {dt:.1f} s")
    assert ok


# -- 6 and 7 ----------------------------------------------------------------------

TOY_CONFIG = SynthConfig(seed=0, max_iters=25)


def test_criterion_6_cooperative_soundness(report):
    counts = {"SUCCESS": 0, "INFEASIBLE": 0, "ITERATION_LIMIT": 0}
    failed = []
    for sc in toy_family(20, 0):
        out = cooperative_synthesize(sc, TOY_CONFIG)
        counts[out.status.value] += 1
        if out.ok and not out.certificate.passed:
            failed.append(sc.name)
    ok = not failed and counts["SUCCESS"] > 0
    report(6, ok, f"{counts}, FAILED certificates: {failed or 'none'}")
    assert ok


def _grid_step_tolerance(sc, levels):
    """Largest cost change when every leader input moves by one grid step."""
    lo, hi = float(sc.leader_bounds.lower[0]), float(sc.leader_bounds.upper[0])
    step = (hi - lo) / (levels - 1)
    umax = max(abs(lo), abs(hi))
    N, w = sc.N, sc.cost.effort_weight
    # x_t sums t inputs, predicates have unit coefficients
    return step * N + w * N * (2 * umax * step + step * step)


def test_criterion_7_antagonistic_suite(report):
    problems = []
    n_success = 0
    worst_gap = 0.0
    for sc in toy_family(20, 0):
        out = antagonistic_synthesize(sc, TOY_CONFIG)
        if not out.ok:
            continue
        n_success += 1
        fval, _ = antagonistic_falsifier(sc, out.u_L, TOY_CONFIG)
        if fval > -sc.epsilon + 1e-9:
            problems.append(f"{sc.name}: max rho_F {fval:.3g}")
        if not stl.eval_bool(sc.phi_L, simulate(sc, out.u_L, sc.zero_follower()).states):
            problems.append(f"{sc.name}: phi_L fails under zero input")
        _, grid = brute_force_ssp(sc, 9, "antagonistic")
        gap = abs(out.exact_cost - grid)
        worst_gap = max(worst_gap, gap)
        if gap > _grid_step_tolerance(sc, 9):
            problems.append(f"{sc.name}: cost {out.exact_cost:.4g} vs grid {grid:.4g}")
    ok = not problems and n_success > 0
    report(7, ok, f"{n_success} successes, max |cost - grid| {worst_gap:.3g}, "
                  f"problems: {problems or 'none'}")
    assert ok


# -- 8, 9, 10 -----------------------------------------------------------------------

def _reproduce(case, out):
    code = cli.main(["reproduce", str(case), "--out", str(out)])
    docs = {}
    for mode_dir in sorted((out / f"case{case}").iterdir()):
        docs[mode_dir.name] = {
            "outcome": json.loads((mode_dir / "outcome.json").read_text()),
            "raw": (mode_dir / "outcome.json").read_bytes(),
            "robustness": json.loads((mode_dir / "outcome_robustness.json").read_text()),
        }
    return code, docs


@pytest.fixture(scope="module")
def case1(tmp_path_factory):
    t0 = time.perf_counter()
    code, docs = _reproduce(1, tmp_path_factory.mktemp("case1"))
    return code, docs, time.perf_counter() - t0


def test_criterion_8_case_study_1(report, case1):
    code, docs, dt = case1
    lines, ok = [], code == 0 and dt < 1800.0
    for mode, ref, tol in (("cooperative", -0.3613, 0.05), ("antagonistic", -0.9999, 0.02)):
        d = docs[mode]["outcome"]
        cost = d["exact_cost"]
        good = d["status"] == "SUCCESS" and d["certificate"]["passed"] and cost is not None \
            and abs(cost - ref) <= tol
        ok = ok and good
        lines.append(f"{mode} {d['status']} cost {cost}")
    report(8, ok, f"{'; '.join(lines)}; {dt:.0f} s")
    assert ok


def test_criterion_9_case_study_2(report, tmp_path):
    t0 = time.perf_counter()
    code, docs = _reproduce(2, tmp_path)
    d = docs["cooperative"]
    o, r = d["outcome"], d["robustness"]
    dist = r["distance_checks"]
    cost = o["exact_cost"]
    ok = (code == 0 and o["status"] == "SUCCESS" and o["certificate"]["passed"] and r["phi_L"]
          and r["phi_F"] and dist and all(c["passed"] for c in dist)
          and cost is not None and cost <= cli.CASE2_COST_CEILING)
    report(9, ok, f"{o['status']}, cost {cost}, phi_L {r['phi_L']}, phi_F {r['phi_F']}, "
                  f"{sum(c['passed'] for c in dist)}/{len(dist)} distance checks, "
                  f"{time.perf_counter() - t0:.0f} s")
    assert ok


def test_criterion_10_determinism(report, case1, tmp_path):
    _, first, _ = case1
    _, second = _reproduce(1, tmp_path)
    same = {mode: first[mode]["raw"] == second[mode]["raw"] for mode in first}
    ok = set(first) == set(second) and all(same.values())
    report(10, ok, f"byte-identical outcome JSON: {same}")
    assert ok
