import math

import numpy as np
from hypothesis import strategies as st

from stackstl import stl

NAMES = ("x", "y")


def naive_rob(phi, x, t=0):
    """Textbook recursive robustness, one time point at a time."""
    if isinstance(phi, stl.TrueF):
        return math.inf
    if isinstance(phi, stl.Pred):
        return phi.pred(x[t])
    if isinstance(phi, stl.Not):
        return -naive_rob(phi.arg, x, t)
    if isinstance(phi, stl.And):
        return min(naive_rob(a, x, t) for a in phi.args)
    if isinstance(phi, stl.Or):
        return max(naive_rob(a, x, t) for a in phi.args)
    if isinstance(phi, stl.Eventually):
        return max(naive_rob(phi.arg, x, t + k) for k in range(phi.a, phi.b + 1))
    if isinstance(phi, stl.Always):
        return min(naive_rob(phi.arg, x, t + k) for k in range(phi.a, phi.b + 1))
    if isinstance(phi, stl.Until):
        best = -math.inf
        for k in range(phi.a, phi.b + 1):
            hold = min(naive_rob(phi.left, x, t + j) for j in range(0, k + 1))
            best = max(best, min(naive_rob(phi.right, x, t + k), hold))
        return best
    raise TypeError(phi)


def naive_bool(phi, x, t=0):
    if isinstance(phi, stl.TrueF):
        return True
    if isinstance(phi, stl.Pred):
        return phi.pred(x[t]) >= 0
    if isinstance(phi, stl.Not):
        return not naive_bool(phi.arg, x, t)
    if isinstance(phi, stl.And):
        return all(naive_bool(a, x, t) for a in phi.args)
    if isinstance(phi, stl.Or):
        return any(naive_bool(a, x, t) for a in phi.args)
    if isinstance(phi, stl.Eventually):
        return any(naive_bool(phi.arg, x, t + k) for k in range(phi.a, phi.b + 1))
    if isinstance(phi, stl.Always):
        return all(naive_bool(phi.arg, x, t + k) for k in range(phi.a, phi.b + 1))
    if isinstance(phi, stl.Until):
        return any(naive_bool(phi.right, x, t + k)
                   and all(naive_bool(phi.left, x, t + j) for j in range(k + 1))
                   for k in range(phi.a, phi.b + 1))
    raise TypeError(phi)


def random_formula(rng, depth, dim=2, max_b=3, offsets=(-0.5, 0.5)):
    """Random formula over integer-coefficient predicates."""
    if depth == 0 or rng.random() < 0.25:
        c = rng.integers(-1, 2, dim).astype(float)
        if not c.any():
            c[rng.integers(dim)] = 1.0
        return stl.Pred(stl.Predicate(tuple(c), float(rng.choice(offsets))))
    k = int(rng.integers(0, 6))
    a = int(rng.integers(0, max_b + 1))
    b = a + int(rng.integers(0, max_b - a + 1))
    sub = lambda: random_formula(rng, depth - 1, dim, max_b, offsets)  # noqa: E731
    if k == 0:
        return stl.Not(sub())
    if k == 1:
        return stl.And((sub(), sub()))
    if k == 2:
        return stl.Or((sub(), sub()))
    if k == 3:
        return stl.Eventually(sub(), a, b)
    if k == 4:
        return stl.Always(sub(), a, b)
    return stl.Until(sub(), sub(), a, b)


@st.composite
def formulas(draw, depth=3, dim=2):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_formula(np.random.default_rng(seed), depth, dim)


def toy_dict(phi_L="F[1,3] x >= 0.75", phi_F="true", N=3, weight=0.1,
             norm="squared_pwl", segments=4, name="toy", fbox=1.0):
    """Scenario document for a scalar integrator x+ = x + uL + uF.

    With ``segments=4`` the tangent points sit on the 5-level input grid, so
    the PWL effort is exact there.
    """
    return {
        "name": name, "state_names": ["x"], "A": [[1.0]], "B_L": [[1.0]], "B_F": [[1.0]],
        "x0": [0.0], "N": N,
        "state_bounds": {"lower": [-5.0], "upper": [5.0]},
        "leader_bounds": {"lower": [-1.0], "upper": [1.0]},
        "follower_bounds": {"lower": [-fbox], "upper": [fbox]},
        "phi_L": phi_L, "phi_F": phi_F,
        "cost": {"effort_weight": weight, "effort_norm": norm, "pwl_segments": segments,
                 "include_leader_robustness": True},
        "big_m": 1000.0, "epsilon": 1e-3,
    }


def toy_scenario(*args, **kw):
    from stackstl.dynamics import scenario_from_dict
    return scenario_from_dict(toy_dict(*args, **kw))


QUARTERS = (-1.75, -1.25, -0.75, -0.25, 0.25, 0.75, 1.25, 1.75)


def toy_family(count=20, seed=0):
    """Seeded toy scenarios with quarter-offset thresholds (off the input grid)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        def task():
            op = rng.choice(["F", "G"])
            a = int(rng.integers(1, 3))
            b = int(rng.integers(a, 4))
            rel = rng.choice([">=", "<="])
            thr = float(rng.choice(QUARTERS))
            return f"{op}[{a},{b}] x {rel} {thr}"
        out.append(toy_scenario(task(), task(), name=f"toy{i}"))
    return out
