import json

import numpy as np
import pytest

from stackstl import stl
from stackstl.dynamics import (AffineSystem, BoundsBox, CostSpec, InputBoundsError,
                               bundled_scenario, deviation_radius, effort, eval_cost,
                               read_trace_csv, reach_boxes, scenario_from_dict, scenario_to_dict,
                               simulate, superposition_decompose, write_trajectory_csv)

from conftest import toy_scenario


def _u(rng, box, N):
    return rng.uniform(box.lower, box.upper, (N, box.dim))


def test_simulate_scalar_integrator():
    sc = toy_scenario()
    tr = simulate(sc, [1.0, 0.5, -1.0], [0.0, 0.5, 0.0])
    assert tr.states.states[:, 0].tolist() == [0.0, 1.0, 2.0, 1.0]
    assert tr.check(sc.system)


def test_out_of_bounds_input_is_an_error():
    sc = toy_scenario()
    with pytest.raises(InputBoundsError):
        simulate(sc, [1.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        simulate(sc, [0.0, 0.0])


def test_affine_system_shape_checks():
    with pytest.raises(ValueError):
        AffineSystem([[1.0, 0.0]], [[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        AffineSystem([[1.0]], [[1.0], [2.0]], [[1.0]])
    with pytest.raises(ValueError):
        BoundsBox([1.0], [0.0])


def test_scenario_horizon_check():
    with pytest.raises(ValueError, match="horizon"):
        toy_scenario("F[0,5] x >= 0.75", N=3)


def test_superposition_matches_simulation():
    sc = bundled_scenario("double_integrator")
    rng = np.random.default_rng(3)
    uL = _u(rng, sc.leader_bounds, sc.N)
    uF = _u(rng, sc.follower_bounds, sc.N)
    nominal, Phi = superposition_decompose(sc, uL)
    x = nominal + Phi @ uF.reshape(-1)
    assert np.allclose(x, simulate(sc, uL, uF).states.states)


def test_deviation_radius_bounds_differences():
    sc = bundled_scenario("double_integrator")
    rng = np.random.default_rng(4)
    r = deviation_radius(sc)
    uL = np.zeros((sc.N, sc.m_L))
    for _ in range(20):
        a = simulate(sc, uL, _u(rng, sc.follower_bounds, sc.N)).states.states
        b = simulate(sc, uL, _u(rng, sc.follower_bounds, sc.N)).states.states
        assert np.all(np.abs(a - b) <= r + 1e-9)


def test_reach_boxes_contain_samples():
    sc = bundled_scenario("double_integrator")
    lo, hi = reach_boxes(sc, clip_to_state_bounds=False)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = simulate(sc, _u(rng, sc.leader_bounds, sc.N), _u(rng, sc.follower_bounds, sc.N)).states.states
        assert np.all(x >= lo - 1e-9) and np.all(x <= hi + 1e-9)


def test_effort_and_exact_cost():
    sc = toy_scenario(weight=0.5)
    uL = np.array([[1.0], [-0.5], [0.0]])
    assert effort(sc.cost, uL) == pytest.approx(1.25)
    assert effort(CostSpec(1.0, "l1"), uL) == pytest.approx(1.5)
    tr = simulate(sc, uL)
    assert eval_cost(sc, tr) == pytest.approx(0.5 * 1.25 - stl.robustness(sc.phi_L, tr.states))


def test_cost_spec_validation():
    with pytest.raises(ValueError):
        CostSpec(effort_weight=-1.0)
    with pytest.raises(ValueError):
        CostSpec(effort_norm="squared_pwl", pwl_segments=1)


def test_trajectory_csv_round_trip(tmp_path):
    sc = bundled_scenario("double_integrator")
    rng = np.random.default_rng(6)
    tr = simulate(sc, _u(rng, sc.leader_bounds, sc.N), _u(rng, sc.follower_bounds, sc.N))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, tr)
    back = read_trace_csv(path, sc.state_names)
    assert np.array_equal(back.states, tr.states.states)
    r = stl.robustness(sc.phi_L, tr.states)
    assert abs(stl.robustness(sc.phi_L, back) - r) <= 1e-9


def test_malformed_csv(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x_0\n0,abc\n")
    with pytest.raises(ValueError):
        read_trace_csv(p, ["x"])
    p.write_text("t,q\n0,1\n")
    with pytest.raises(ValueError):
        read_trace_csv(p, ["x"])


@pytest.mark.parametrize("name", ["double_integrator", "three_agents"])
def test_bundled_scenarios_round_trip(name):
    sc = bundled_scenario(name)
    d = json.loads(json.dumps(scenario_to_dict(sc)))
    sc2 = scenario_from_dict(d)
    assert sc2.phi_L == sc.phi_L and sc2.phi_F == sc.phi_F
    assert np.array_equal(sc2.system.A, sc.system.A)
    assert sc2.N == sc.N and sc2.cost == sc.cost


def test_bundled_case_study_shapes():
    di = bundled_scenario("double_integrator")
    assert (di.n, di.m_L, di.m_F, di.N) == (4, 2, 2, 25)
    assert stl.horizon(di.phi_L) == 25
    ta = bundled_scenario("three_agents")
    assert (ta.n, ta.m_L, ta.m_F) == (6, 2, 4)
    assert np.array_equal(ta.x0, [2, 6, 2, 6, 2, 6])
