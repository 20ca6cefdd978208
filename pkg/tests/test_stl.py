import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackstl import stl
from stackstl.stl import And, Always, Eventually, Not, Or, Pred, Predicate, Until

from conftest import NAMES, formulas, naive_bool, naive_rob


def P(text):
    return stl.parse(text, NAMES)


def test_parse_predicate_forms():
    assert P("x >= 1") == Pred(Predicate((1.0, 0.0), -1.0))
    assert P("2*x - y <= 3") == Pred(Predicate((-2.0, 1.0), 3.0))
    assert P("x - y + 1 >= 0") == Pred(Predicate((1.0, -1.0), 1.0))


def test_parse_precedence_and_temporal():
    phi = P("F[0,3] x >= 1 & G[1,2] (y <= 0 | !x >= 2)")
    assert isinstance(phi, And)
    assert isinstance(phi.args[0], Eventually) and (phi.args[0].a, phi.args[0].b) == (0, 3)
    g = phi.args[1]
    assert isinstance(g, Always) and isinstance(g.arg, Or)
    assert isinstance(g.arg.args[1], Not)
    u = P("x >= 0 U[1,4] y >= 0")
    assert isinstance(u, Until) and (u.a, u.b) == (1, 4)


@pytest.mark.parametrize("bad", ["x >=", "F[3,1] x >= 0", "F[0,1 x >= 0", "z >= 1", "x >= 1 &",
                                 "2 >= 1", "x ? 1", "x + 1 >= y"])
def test_parse_errors_have_location(bad):
    with pytest.raises(stl.STLSyntaxError) as exc:
        P(bad)
    assert "column" in str(exc.value)


@given(formulas(depth=3))
@settings(max_examples=150, deadline=None)
def test_text_round_trip(phi):
    assert P(stl.to_text(phi, NAMES)) == phi


def test_horizon_rules():
    assert stl.horizon(P("x >= 0")) == 0
    assert stl.horizon(P("F[2,5] G[0,3] x >= 0")) == 8
    assert stl.horizon(P("(F[0,2] x >= 0) U[1,4] (G[0,1] y >= 0)")) == 4 + 2


def test_until_requires_left_through_switch_time():
    phi = P("x >= 0 U[0,2] y >= 0")
    # y holds at t=2 but x fails at t=2: no witness
    x = np.array([[1, -1], [1, -1], [-1, 1]], float)
    assert not stl.eval_bool(phi, x)
    x[2, 0] = 1
    assert stl.eval_bool(phi, x)


def test_constant_trace_inside_box_robustness():
    box = P("G[0,2] (x >= 1 & x <= 4 & y >= 1 & y <= 4)")
    tr = np.tile([1.5, 3.0], (3, 1))
    assert stl.eval_bool(box, tr)
    assert stl.robustness(box, tr) == pytest.approx(0.5)


def test_true_robustness_infinite():
    assert stl.robustness(stl.TRUE, np.zeros((1, 2))) == math.inf
    assert stl.robustness(stl.FALSE, np.zeros((1, 2))) == -math.inf


def test_short_trace_raises():
    with pytest.raises(stl.TraceTooShortError):
        stl.robustness(P("F[0,5] x >= 0"), np.zeros((3, 2)))


@given(formulas(depth=3), st.integers(0, 2**32 - 1), st.integers(0, 3))
@settings(max_examples=200, deadline=None)
def test_monitor_matches_naive_reference(phi, seed, extra):
    rng = np.random.default_rng(seed)
    T = stl.horizon(phi) + 1 + extra
    x = rng.normal(size=(T, 2)).round(2)
    assert stl.robustness(phi, x) == pytest.approx(naive_rob(phi, x), abs=1e-12)
    assert stl.eval_bool(phi, x) == naive_bool(phi, x)


@given(formulas(depth=3), st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_robustness_sign_soundness(phi, seed):
    x = np.random.default_rng(seed).uniform(-2, 2, size=(stl.horizon(phi) + 1, 2))
    r = stl.robustness(phi, x)
    if r > 1e-9:
        assert stl.eval_bool(phi, x)
    if r < -1e-9:
        assert not stl.eval_bool(phi, x)


@given(formulas(depth=3), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_negation_and_nnf(phi, seed):
    x = np.random.default_rng(seed).uniform(-2, 2, size=(stl.horizon(phi) + 1, 2))
    r = stl.robustness(phi, x)
    assert stl.robustness(Not(phi), x) == pytest.approx(-r)
    assert stl.robustness(stl.nnf(phi), x) == pytest.approx(r)
    assert stl.robustness(stl.simplify(phi), x) == pytest.approx(r)


@given(formulas(depth=2), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_batch_signal_matches_single(phi, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(7, stl.horizon(phi) + 2, 2))
    rob = stl.batch_signal(phi, X)
    sat = stl.batch_signal(phi, X, boolean=True)
    for i in range(len(X)):
        assert rob[i] == pytest.approx(stl.robustness(phi, X[i]))
        assert sat[i] == stl.eval_bool(phi, X[i])


def test_depth_and_predicates():
    phi = P("F[0,1] (x >= 0 & G[0,1] y >= 0)")
    assert stl.depth(phi) == 3
    assert len(stl.predicates(phi)) == 2
