"""Stackelberg synthesis: cooperative and antagonistic counterexample-guided
loops, response-set queries, independent verification and a brute-force
grid oracle for small instances."""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import stl
from .dynamics import Scenario, effort, eval_cost, simulate, superposition_decompose
from .encode import (EncodingContext, RVal, add_trajectory_copy, encode_bool, encode_cost,
                     encode_implication, encode_minmax, encode_rhoK, encode_robustness,
                     pwl_gap_bound)
from .milp import SolveLimits, Status, backend_solve

log = logging.getLogger(__name__)

CEGIS_TOL = 1e-6
DEDUP_TOL = 1e-9
# raised bound used by gap termination sits this far above the computed cost,
# which absorbs solver feasibility slack
GAP_SLACK = 1e-4


class Mode(str, Enum):
    COOPERATIVE = "cooperative"
    ANTAGONISTIC = "antagonistic"


class OutcomeStatus(str, Enum):
    SUCCESS = "SUCCESS"
    INFEASIBLE = "INFEASIBLE"
    ITERATION_LIMIT = "ITERATION_LIMIT"


class SolverError(RuntimeError):
    """A solve ended on a limit or numerical status with no usable answer."""

    def __init__(self, msg: str, status: Status | None = None):
        super().__init__(msg)
        self.status = status


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    init_candidates: int = 5
    restarts: int = 0
    max_iters: int = 50
    backend: str = "highs"
    mip_gap: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    big_m: float | None = None
    epsilon: float | None = None
    cegis_tol: float = CEGIS_TOL
    verify_samples: int = 10_000
    # "robustness" states task (dis)satisfaction in the master as rho >= eps
    # or rho <= -eps; "boolean" uses the predicate-binary z encoding
    master_encoding: str = "robustness"
    # candidate copies must meet the master constraints by this much, so the
    # leader cannot dodge a counterexample by an arbitrarily small change
    margin: float = 5e-2
    # when the falsifier is within this of zero, try certifying the plan at
    # the correspondingly raised bound instead of iterating; 0 disables
    cegis_gap: float = 1e-2

    def __post_init__(self):
        if self.master_encoding not in ("robustness", "boolean"):
            raise ValueError(f"unknown master encoding {self.master_encoding!r}")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    @property
    def limits(self) -> SolveLimits:
        return SolveLimits(node_limit=self.node_limit, time_limit=self.time_limit,
                           mip_gap_abs=self.mip_gap, mip_gap_rel=self.mip_gap)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class CandidateSet:
    sequences: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sequences)

    def find(self, u, tol: float = DEDUP_TOL) -> int | None:
        for i, s in enumerate(self.sequences):
            if np.max(np.abs(s - u), initial=0.0) <= tol:
                return i
        return None

    def add(self, u, tag: str, tol: float = DEDUP_TOL) -> bool:
        u = np.array(u, dtype=float)
        if self.find(u, tol) is not None:
            return False
        self.sequences.append(u)
        self.provenance.append(tag)
        return True

    @staticmethod
    def random(scenario: Scenario, count: int, seed: int) -> "CandidateSet":
        rng = np.random.default_rng(seed)
        FB = scenario.follower_bounds
        cs = CandidateSet()
        for _ in range(count):
            u = rng.uniform(FB.lower, FB.upper, size=(scenario.N, scenario.m_F))
            cs.add(u, "RANDOM_INIT")
        return cs


@dataclass
class IterationRecord:
    iteration: int
    candidates: int
    master_objective: float
    falsifier_objective: float
    counterexample: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Certificate:
    passed: bool
    checks: dict
    witness: list | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": self.checks, "witness": self.witness}

    @property
    def verdict(self) -> str:
        return "PASSED" if self.passed else "FAILED"


@dataclass
class SynthesisOutcome:
    mode: Mode
    status: OutcomeStatus
    u_L: np.ndarray | None = None
    k: float = float("nan")
    exact_cost: float = float("nan")
    witness_u_F: np.ndarray | None = None
    worst_case_cost: float = float("nan")
    iterations: list = field(default_factory=list)
    certificate: Certificate | None = None
    seed: int = 0
    config: dict = field(default_factory=dict)
    message: str = ""
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is OutcomeStatus.SUCCESS


@dataclass
class ResponseQuery:
    in_SR: bool
    in_BR: bool
    sr_nonempty: bool
    witness: np.ndarray | None


# -- solving helpers ----------------------------------------------------------

def _solve(model, config: SynthConfig, accept_incumbent: bool = True):
    res = backend_solve(model, config.backend, config.limits)
    if res.status is Status.OPTIMAL or res.status is Status.INFEASIBLE:
        return res
    if accept_incumbent and res.assignment is not None and \
            res.status in (Status.TIME_LIMIT, Status.ITER_LIMIT):
        log.warning("solver stopped on %s; using the incumbent", res.status.value)
        return res
    raise SolverError(f"solver returned {res.status.value}", res.status)


def _values(res, rows) -> np.ndarray:
    return np.array([[res.value(e) for e in row] for row in rows], dtype=float)


def _clip_follower(scenario: Scenario, u: np.ndarray) -> np.ndarray:
    FB = scenario.follower_bounds
    return np.clip(u, FB.lower, FB.upper)


def _clip_leader(scenario: Scenario, u: np.ndarray) -> np.ndarray:
    LB = scenario.leader_bounds
    return np.clip(u, LB.lower, LB.upper)


def _context(scenario, config, **kw) -> EncodingContext:
    return EncodingContext(scenario, big_m=config.big_m, epsilon=config.epsilon, **kw)


def _bounded_k(J_list: list[RVal]):
    return min(J.lo for J in J_list), max(J.hi for J in J_list)


def effort_gap_bound(scenario: Scenario) -> float:
    """Upper bound on exact minus PWL effort over a whole leader sequence."""
    c = scenario.cost
    if c.effort_norm.value != "squared_pwl":
        return 0.0
    LB = scenario.leader_bounds
    per_step = sum(pwl_gap_bound(lo, hi, c.pwl_segments) for lo, hi in zip(LB.lower, LB.upper))
    return c.effort_weight * scenario.N * per_step


# -- response sets ------------------------------------------------------------

def is_successful_response(scenario: Scenario, u_L, u_F) -> bool:
    traj = simulate(scenario, u_L, u_F)
    return stl.eval_bool(scenario.phi_F, traj.states)


def sr_nonempty(scenario: Scenario, u_L, config: SynthConfig | None = None):
    """Search follower space for a successful response to ``u_L``.

    Returns ``(True, witness)`` or ``(False, None)``.  The search uses the
    margin-epsilon predicate encoding, so a returned witness satisfies the
    follower task with margin.
    """
    config = config or SynthConfig()
    if stl.simplify(scenario.phi_F) == stl.TRUE:
        return True, scenario.zero_follower()
    ctx = _context(scenario, config, u_L=u_L)
    adv = add_trajectory_copy(ctx, "adv")
    ctx.require(encode_bool(ctx, adv, scenario.phi_F), "=", 1.0, "zF")
    ctx.model.set_objective(0.0)
    res = _solve(ctx.model, config, accept_incumbent=False)
    if res.status is Status.INFEASIBLE:
        return False, None
    return True, _clip_follower(scenario, _values(res, adv.u_F))


def response_query(scenario: Scenario, u_L, u_F, config: SynthConfig | None = None) -> ResponseQuery:
    """Classify ``u_F`` against the successful and best response sets."""
    in_sr = is_successful_response(scenario, u_L, u_F)
    nonempty, witness = (True, None) if in_sr else sr_nonempty(scenario, u_L, config)
    if nonempty:
        in_br = in_sr
    else:
        in_br = bool(np.allclose(np.asarray(u_F, dtype=float).reshape(scenario.N, scenario.m_F),
                                 scenario.zero_follower(), atol=0.0))
    return ResponseQuery(in_sr, in_br, nonempty, witness)


def worst_case_cost(scenario: Scenario, u_L, config: SynthConfig | None = None):
    """Exact cost maximised over successful responses.

    The effort term does not depend on the follower, so this minimises the
    leader robustness over follower sequences that satisfy the follower task.
    Returns ``(cost, u_F)`` or ``(nan, None)`` when no response succeeds.
    """
    config = config or SynthConfig()
    u_L = np.asarray(u_L, dtype=float)
    sc = scenario
    ctx = _context(sc, config, u_L=u_L)
    adv = add_trajectory_copy(ctx, "adv")
    ctx.require(encode_bool(ctx, adv, sc.phi_F), "=", 1.0, "zF")
    if sc.cost.include_leader_robustness:
        rL = encode_robustness(ctx, adv, sc.phi_L, polarity="upper")
        ctx.model.set_objective(rL.expr, "min")
    else:
        ctx.model.set_objective(0.0)
    res = _solve(ctx.model, config, accept_incumbent=False)
    if res.status is Status.INFEASIBLE:
        return float("nan"), None
    u_F = _clip_follower(sc, _values(res, adv.u_F))
    traj = simulate(sc, u_L, u_F)
    return eval_cost(sc, traj), u_F


# -- cooperative ---------------------------------------------------------------

def _coop_master(sc: Scenario, cands: CandidateSet, config: SynthConfig, leader_levels=None,
                 follower_levels=None):
    ctx = _context(sc, config, leader_levels=leader_levels)
    wit = add_trajectory_copy(ctx, "wit", enforce_state_bounds=True, levels=follower_levels)
    copies = [wit] + [add_trajectory_copy(ctx, f"cand={i}", u, anchor="wit")
                      for i, u in enumerate(cands.sequences)]
    boolean = config.master_encoding == "boolean"
    eps = ctx.eps
    if boolean:
        ctx.require(encode_bool(ctx, wit, sc.phi_F), "=", 1.0, "zF[wit]")
    else:
        rFw = encode_robustness(ctx, wit, sc.phi_F, polarity="lower")
        ctx.require(rFw.expr, ">=", eps, "rhoF_min[wit]")
    parts = []
    for cp in copies:
        # k >= J pushes rho_L up and rho^K >= 0 pushes rho_F down, so each
        # side only needs a one-sided encoding
        rL = encode_robustness(ctx, cp, sc.phi_L, polarity="lower")
        rF = encode_robustness(ctx, cp, sc.phi_F, polarity="upper")
        parts.append((cp, encode_cost(ctx, cp, rL), rL, rF))
    k_lo, k_hi = _bounded_k([J for _, J, _, _ in parts])
    k = ctx.model.continuous("k", k_lo, k_hi)
    kv = RVal(k._e(), k_lo, k_hi)
    for cp, J, rL, rF in parts:
        if cp is wit and not boolean:
            # rho_F >= eps already holds here, so rho^K >= 0 reduces to k >= J
            ctx.require(kv.expr - J.expr, ">=", 0.0, "k_bound[wit]")
            ctx.require(rL.expr, ">=", eps, "rhoL_min[wit]")
            continue
        rk = encode_rhoK(ctx, kv, J, rF, name=f"rhoK[{cp.label}]")
        ctx.require(rk.expr, ">=", 0.0 if cp is wit else config.margin, f"rhoK_nonneg[{cp.label}]")
        if boolean:
            encode_implication(ctx, encode_bool(ctx, cp, sc.phi_L), encode_bool(ctx, cp, sc.phi_F))
        else:
            # phi_F -> phi_L as max(rho_L - eps, -rho_F) >= 0, the same gadget
            # with k = 0 and J = eps - rho_L
            lead = RVal(eps - rL.expr, eps - rL.hi, eps - rL.lo)
            ri = encode_rhoK(ctx, 0.0, lead, rF, name=f"rhoImp[{cp.label}]")
            ctx.require(ri.expr, ">=", config.margin, f"rhoImp_nonneg[{cp.label}]")
    ctx.model.set_objective(kv.expr, "min")
    return ctx, wit, k


def cooperative_falsifier(sc: Scenario, u_L, k: float, config: SynthConfig):
    """Minimise min[rho^K, rho^(phi_F -> phi_L)] over follower sequences."""
    ctx = _context(sc, config, u_L=u_L)
    adv = add_trajectory_copy(ctx, "adv")
    # minimising w pushes rho_L down and rho_F up
    rL = encode_robustness(ctx, adv, sc.phi_L, polarity="upper")
    rF = encode_robustness(ctx, adv, sc.phi_F, polarity="lower")
    J = encode_cost(ctx, adv, rL)
    rk = encode_rhoK(ctx, float(k), J, rF, name="rhoK[adv]")
    rimp = encode_minmax(ctx, [-rF, rL], False, "rimp", polarity="upper")
    w = encode_minmax(ctx, [rk, rimp], True, "w", polarity="upper")
    ctx.model.set_objective(w.expr, "min")
    res = _solve(ctx.model, config, accept_incumbent=True)
    if res.status is not Status.OPTIMAL and res.assignment is None:
        raise SolverError(f"falsifier returned {res.status.value}", res.status)
    if res.status is not Status.OPTIMAL and res.objective >= -config.cegis_tol:
        raise SolverError("falsifier stopped early without a counterexample; cannot certify", res.status)
    return res.objective, _clip_follower(sc, _values(res, adv.u_F))


def coop_cost_bound(sc: Scenario, u_L, config: SynthConfig):
    """Largest PWL cost over follower inputs with rho_F >= 0, or None when
    some such input violates the leader task (or none exists)."""
    ctx = _context(sc, config, u_L=u_L)
    adv = add_trajectory_copy(ctx, "adv")
    rF = encode_robustness(ctx, adv, sc.phi_F, polarity="lower")
    ctx.require(rF.expr, ">=", 0.0, "rhoF_nonneg")
    rL = encode_robustness(ctx, adv, sc.phi_L, polarity="upper")
    ctx.model.set_objective(rL.expr, "min")
    res = _solve(ctx.model, config, accept_incumbent=False)
    if res.status is not Status.OPTIMAL or res.objective < -config.cegis_tol:
        return None
    J = encode_cost(ctx, adv, rL)
    return J.expr.value(res.assignment)


def _finish_coop(sc, out: SynthesisOutcome, u_L, u_F_wit, config):
    out.u_L = u_L
    out.witness_u_F = u_F_wit
    out.exact_cost = eval_cost(sc, simulate(sc, u_L, u_F_wit))
    out.worst_case_cost, _ = worst_case_cost(sc, u_L, config)


def _cooperative_once(sc: Scenario, config: SynthConfig, seed: int) -> SynthesisOutcome:
    t0 = time.perf_counter()
    out = SynthesisOutcome(Mode.COOPERATIVE, OutcomeStatus.ITERATION_LIMIT, seed=seed,
                           config=config.to_dict())
    cands = CandidateSet.random(sc, config.init_candidates, seed)
    for it in range(1, config.max_iters + 1):
        ctx, wit, k = _coop_master(sc, cands, config)
        res = _solve(ctx.model, config)
        if res.status is Status.INFEASIBLE:
            out.status = OutcomeStatus.INFEASIBLE
            out.message = "cooperative master infeasible"
            out.iterations.append(IterationRecord(it, len(cands), float("nan"), float("nan"), False))
            break
        u_L = _clip_leader(sc, _values(res, ctx.u_L))
        u_F_wit = _clip_follower(sc, _values(res, wit.u_F))
        kval = res.value(k)
        fval, u_F = cooperative_falsifier(sc, u_L, kval, config)
        found = fval < -config.cegis_tol
        out.iterations.append(IterationRecord(it, len(cands), kval, fval, found))
        out.k = kval
        log.info("coop iter %d: |cand|=%d k=%.6g falsifier=%.6g", it, len(cands), kval, fval)
        if found and config.cegis_gap > 0:
            bound = coop_cost_bound(sc, u_L, config)
            if bound is not None and bound + GAP_SLACK - kval <= config.cegis_gap:
                k_up = bound + GAP_SLACK
                fup, _ = cooperative_falsifier(sc, u_L, k_up, config)
                log.info("coop iter %d: bound %.6g gives falsifier=%.6g", it, k_up, fup)
                if fup >= -config.cegis_tol:
                    found = False
                    out.k = k_up
                    out.message = f"certified at a bound {k_up - kval:.3g} above the master optimum"
        if not found:
            out.status = OutcomeStatus.SUCCESS
            _finish_coop(sc, out, u_L, u_F_wit, config)
            break
        if not cands.add(u_F, "COUNTEREXAMPLE"):
            out.message = "stalled: counterexample duplicates an existing candidate"
            break
    else:
        out.message = f"no certificate after {config.max_iters} iterations"
    out.wall_time = time.perf_counter() - t0
    return out


def _best(outcomes: list[SynthesisOutcome]) -> SynthesisOutcome:
    good = [o for o in outcomes if o.ok]
    if good:
        return min(good, key=lambda o: o.exact_cost)
    return outcomes[0]


def cooperative_synthesize(scenario: Scenario, config: SynthConfig | None = None,
                           verify: bool = True) -> SynthesisOutcome:
    """Counterexample-guided synthesis of a cooperative leader plan.

    Runs ``1 + restarts`` sessions with consecutive seeds and keeps the
    successful session with the lowest exact worst-case cost.
    """
    config = config or SynthConfig()
    runs = [_cooperative_once(scenario, config, config.seed + r) for r in range(config.restarts + 1)]
    out = _best(runs)
    if out.ok and verify:
        out.certificate = verify_outcome(scenario, out, config)
    return out


# -- antagonistic ----------------------------------------------------------------

def _ant_master(sc: Scenario, cands: CandidateSet, config: SynthConfig, leader_levels=None):
    ctx = _context(sc, config, leader_levels=leader_levels)
    zero = add_trajectory_copy(ctx, "zero", sc.zero_follower(), enforce_state_bounds=True)
    boolean = config.master_encoding == "boolean"
    rL = encode_robustness(ctx, zero, sc.phi_L, polarity="lower")
    if boolean:
        ctx.require(encode_bool(ctx, zero, sc.phi_L), "=", 1.0, "zL[zero]")
    else:
        ctx.require(rL.expr, ">=", ctx.eps, "rhoL_min[zero]")
    for i, u in enumerate(cands.sequences):
        cp = add_trajectory_copy(ctx, f"cand={i}", u, anchor="zero")
        if boolean:
            ctx.require(encode_bool(ctx, cp, sc.phi_F), "=", 0.0, f"zF[cand={i}]")
        else:
            rF = encode_robustness(ctx, cp, sc.phi_F, polarity="upper")
            ctx.require(rF.expr, "<=", -ctx.eps - config.margin, f"rhoF_max[cand={i}]")
    J = encode_cost(ctx, zero, rL)
    ctx.model.set_objective(J.expr, "min")
    return ctx


def antagonistic_falsifier(sc: Scenario, u_L, config: SynthConfig):
    """Maximise the follower robustness with the leader plan fixed."""
    ctx = _context(sc, config, u_L=u_L)
    adv = add_trajectory_copy(ctx, "adv")
    rF = encode_robustness(ctx, adv, sc.phi_F, polarity="lower")
    if not rF.expr.terms:
        return rF.expr.const, sc.zero_follower()
    ctx.model.set_objective(rF.expr, "max")
    res = _solve(ctx.model, config, accept_incumbent=True)
    eps = ctx.eps
    if res.status is not Status.OPTIMAL:
        if res.assignment is None or res.objective <= -eps:
            raise SolverError("falsifier stopped early without a counterexample; cannot certify", res.status)
    return res.objective, _clip_follower(sc, _values(res, adv.u_F))


def _blocked(value: float, eps: float) -> bool:
    return value <= -eps + 1e-9


def _antagonistic_once(sc: Scenario, config: SynthConfig, seed: int) -> SynthesisOutcome:
    t0 = time.perf_counter()
    out = SynthesisOutcome(Mode.ANTAGONISTIC, OutcomeStatus.ITERATION_LIMIT, seed=seed,
                           config=config.to_dict())
    eps = sc.epsilon if config.epsilon is None else config.epsilon
    cands = CandidateSet.random(sc, config.init_candidates, seed)
    for it in range(1, config.max_iters + 1):
        ctx = _ant_master(sc, cands, config)
        res = _solve(ctx.model, config)
        if res.status is Status.INFEASIBLE:
            out.status = OutcomeStatus.INFEASIBLE
            out.message = "antagonistic master infeasible"
            out.iterations.append(IterationRecord(it, len(cands), float("nan"), float("nan"), False))
            break
        u_L = _clip_leader(sc, _values(res, ctx.u_L))
        fval, u_F = antagonistic_falsifier(sc, u_L, config)
        found = not _blocked(fval, eps)
        out.iterations.append(IterationRecord(it, len(cands), res.objective, fval, found))
        out.k = res.objective
        log.info("ant iter %d: |cand|=%d J=%.6g max rhoF=%.6g", it, len(cands), res.objective, fval)
        if not found:
            out.status = OutcomeStatus.SUCCESS
            out.u_L = u_L
            out.exact_cost = eval_cost(sc, simulate(sc, u_L, sc.zero_follower()))
            break
        if not cands.add(u_F, "COUNTEREXAMPLE"):
            out.message = "stalled: counterexample duplicates an existing candidate"
            break
    else:
        out.message = f"no certificate after {config.max_iters} iterations"
    out.wall_time = time.perf_counter() - t0
    return out


def antagonistic_synthesize(scenario: Scenario, config: SynthConfig | None = None,
                            verify: bool = True) -> SynthesisOutcome:
    """Leader plan that makes the follower task unsatisfiable, optimal under
    the non-interfering follower input."""
    config = config or SynthConfig()
    runs = [_antagonistic_once(scenario, config, config.seed + r) for r in range(config.restarts + 1)]
    out = _best(runs)
    if out.ok and verify:
        out.certificate = verify_outcome(scenario, out, config)
    return out


def solve_ssp(scenario: Scenario, config: SynthConfig | None = None, mode: str = "auto",
              verify: bool = True) -> SynthesisOutcome:
    """Run the requested mode(s) and return the better verified outcome.

    Ties in exact cost go to the cooperative outcome.
    """
    config = config or SynthConfig()
    mode = {"coop": "cooperative", "ant": "antagonistic"}.get(mode, mode)
    outs = []
    if mode in ("auto", "cooperative"):
        outs.append(cooperative_synthesize(scenario, config, verify))
    if mode in ("auto", "antagonistic"):
        outs.append(antagonistic_synthesize(scenario, config, verify))
    if not outs:
        raise ValueError(f"unknown mode {mode!r}")
    good = [o for o in outs if o.ok and (o.certificate is None or o.certificate.passed)]
    if not good:
        return outs[0] if len(outs) == 1 or outs[0].status is not OutcomeStatus.INFEASIBLE else outs[-1]
    best = good[0]
    for o in good[1:]:
        if o.exact_cost < best.exact_cost:
            best = o
    return best


def build_master(scenario: Scenario, config: SynthConfig | None = None, mode: str = "cooperative",
                 candidates: CandidateSet | None = None):
    """The first-iteration master MILP for ``mode``, e.g. for LP export."""
    config = config or SynthConfig()
    mode = {"coop": "cooperative", "ant": "antagonistic"}.get(mode, mode)
    cands = candidates if candidates is not None else \
        CandidateSet.random(scenario, config.init_candidates, config.seed)
    if mode == "cooperative":
        return _coop_master(scenario, cands, config)[0].model
    if mode == "antagonistic":
        return _ant_master(scenario, cands, config).model
    raise ValueError(f"unknown mode {mode!r}")


# -- verification ------------------------------------------------------------------

def _batch_states(sc: Scenario, u_L, samples: np.ndarray) -> np.ndarray:
    nominal, Phi = superposition_decompose(sc, u_L)
    flat = samples.reshape(samples.shape[0], -1)
    return nominal[None] + np.einsum("tnk,bk->btn", Phi, flat)


def follower_samples(sc: Scenario, count: int, seed: int) -> np.ndarray:
    """Random follower sequences plus constant corner sequences and the
    non-interfering input."""
    FB = sc.follower_bounds
    rng = np.random.default_rng(seed)
    rand = rng.uniform(FB.lower, FB.upper, size=(count, sc.N, sc.m_F))
    corners = np.array([np.tile(c, (sc.N, 1)) for c in FB.corners()]).reshape(-1, sc.N, sc.m_F)
    return np.concatenate([rand, corners, sc.zero_follower()[None]], axis=0)


def verify_outcome(scenario: Scenario, outcome: SynthesisOutcome, config: SynthConfig | None = None,
                   samples: int | None = None, seed: int | None = None) -> Certificate:
    """Check an outcome with the monitor, a fresh falsifier and random sampling."""
    config = config or SynthConfig()
    sc = scenario
    samples = config.verify_samples if samples is None else samples
    seed = outcome.seed + 7919 if seed is None else seed
    eps = sc.epsilon if config.epsilon is None else config.epsilon
    checks = {}
    witness = None
    if outcome.u_L is None:
        return Certificate(False, {"a": {"passed": False, "detail": "no leader plan"}})
    u_L = np.asarray(outcome.u_L, dtype=float)
    coop = Mode(outcome.mode) is Mode.COOPERATIVE

    # (a) monitor replay
    try:
        if coop:
            if outcome.witness_u_F is None:
                raise ValueError("cooperative outcome lacks a witness response")
            tr = simulate(sc, u_L, outcome.witness_u_F).states
            rf = stl.robustness(sc.phi_F, tr)
            rl = stl.robustness(sc.phi_L, tr)
            ok = stl.eval_bool(sc.phi_F, tr) and stl.eval_bool(sc.phi_L, tr)
            checks["a"] = {"passed": bool(ok), "detail": f"witness rho_F={rf:.6g} rho_L={rl:.6g}"}
        else:
            tr = simulate(sc, u_L, sc.zero_follower()).states
            rl = stl.robustness(sc.phi_L, tr)
            ok = stl.eval_bool(sc.phi_L, tr)
            checks["a"] = {"passed": bool(ok), "detail": f"zero-follower rho_L={rl:.6g}"}
    except ValueError as exc:
        checks["a"] = {"passed": False, "detail": str(exc)}

    # (b) fresh falsifier
    try:
        if coop:
            fval, u_F = cooperative_falsifier(sc, u_L, outcome.k, config)
            ok = fval >= -config.cegis_tol
        else:
            fval, u_F = antagonistic_falsifier(sc, u_L, config)
            ok = _blocked(fval, eps)
        checks["b"] = {"passed": bool(ok), "detail": f"falsifier optimum {fval:.6g}"}
        if not ok:
            witness = np.asarray(u_F).tolist()
    except (SolverError, ValueError) as exc:
        checks["b"] = {"passed": False, "detail": str(exc)}

    # (c) randomized falsifier
    U = follower_samples(sc, samples, seed)
    X = _batch_states(sc, u_L, U)
    f_sat = stl.batch_signal(sc.phi_F, X, boolean=True)
    if coop:
        l_sat = stl.batch_signal(sc.phi_L, X, boolean=True)
        cost = sc.cost
        J = cost.effort_weight * effort(cost, u_L) * np.ones(len(U))
        if cost.include_leader_robustness:
            J = J - stl.batch_signal(sc.phi_L, X, boolean=False)
        bound = outcome.k + effort_gap_bound(sc) + 1e-6
        bad = f_sat & (~l_sat | (J > bound))
    else:
        bad = f_sat
    idx = np.nonzero(bad)[0]
    checks["c"] = {"passed": idx.size == 0,
                   "detail": f"{len(U)} sampled responses, {idx.size} violations"}
    if idx.size and witness is None:
        witness = U[idx[0]].tolist()
    passed = all(c["passed"] for c in checks.values())
    return Certificate(passed, checks, witness)


# -- grid oracles ---------------------------------------------------------------------

def _grid(box, levels: int, N: int, limit: float):
    axes = [np.linspace(lo, hi, levels) for lo, hi in zip(box.lower, box.upper)]
    count = float(levels) ** (len(axes) * N)
    if count > limit:
        raise ValueError(f"grid of {count:.3g} sequences exceeds the limit {limit:.3g}")
    step_values = list(itertools.product(*axes))
    for seq in itertools.product(step_values, repeat=N):
        yield np.array(seq, dtype=float).reshape(N, len(axes))


def brute_force_ssp(scenario: Scenario, levels: int, mode: str = "auto",
                    limit: float = 2e6):
    """Exhaustive leader/follower grid search for the Stackelberg problem.

    For each leader grid sequence the successful responses are enumerated
    over the follower grid; the best response set is the successful set when
    nonempty and the non-interfering input otherwise.  ``mode`` restricts the
    search to plans with a nonempty ("cooperative") or empty ("antagonistic")
    successful set.  Returns ``(u_L, cost)``; ``(None, inf)`` if nothing
    qualifies.
    """
    sc = scenario
    mode = {"coop": "cooperative", "ant": "antagonistic"}.get(mode, mode)
    F = np.array(list(_grid(sc.follower_bounds, levels, sc.N, limit))).reshape(-1, sc.N, sc.m_F)
    leader = list(_grid(sc.leader_bounds, levels, sc.N, limit))
    if len(leader) * len(F) > 50 * limit:
        raise ValueError("joint grid too large")
    best_u, best_cost = None, float("inf")
    cost = sc.cost
    for u_L in leader:
        X = _batch_states(sc, u_L, F)
        sr = stl.batch_signal(sc.phi_F, X, boolean=True)
        base = cost.effort_weight * effort(cost, u_L)
        if sr.any():
            if mode == "antagonistic":
                continue
            Xs = X[sr]
            if not stl.batch_signal(sc.phi_L, Xs, boolean=True).all():
                continue
            value = base - (stl.batch_signal(sc.phi_L, Xs).min() if cost.include_leader_robustness else 0.0)
        else:
            if mode == "cooperative":
                continue
            tr = simulate(sc, u_L, sc.zero_follower(), check_bounds=False).states
            if not stl.eval_bool(sc.phi_L, tr):
                continue
            value = base - (stl.robustness(sc.phi_L, tr) if cost.include_leader_robustness else 0.0)
        if value < best_cost - 1e-12:
            best_u, best_cost = u_L, float(value)
    return best_u, best_cost


def grid_master(scenario: Scenario, levels: int, mode: str = "cooperative",
                config: SynthConfig | None = None):
    """Single master solve with leader and follower restricted to grids.

    The candidate set is the entire follower grid, so no counterexample
    iteration is needed.  Returns ``(u_L, cost)`` or ``(None, inf)``.
    """
    # grid values are exact, so no solver-slack margin is wanted here
    config = dataclasses.replace(config or SynthConfig(), margin=0.0)
    sc = scenario
    mode = {"coop": "cooperative", "ant": "antagonistic"}.get(mode, mode)
    cands = CandidateSet()
    for u in _grid(sc.follower_bounds, levels, sc.N, 1e5):
        cands.add(u, "GRID")
    if mode == "cooperative":
        ctx, _, k = _coop_master(sc, cands, config, leader_levels=levels, follower_levels=levels)
    else:
        ctx = _ant_master(sc, cands, config, leader_levels=levels)
    res = _solve(ctx.model, config, accept_incumbent=False)
    if res.status is Status.INFEASIBLE:
        return None, float("inf")
    u_L = _values(res, ctx.u_L)
    return u_L, float(res.objective)


# -- persistence ------------------------------------------------------------------------

def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def outcome_to_dict(outcome: SynthesisOutcome) -> dict:
    cfg = {k: v for k, v in outcome.config.items()}
    return {
        "mode": Mode(outcome.mode).value,
        "status": OutcomeStatus(outcome.status).value,
        "u_L": None if outcome.u_L is None else np.asarray(outcome.u_L).tolist(),
        "k": _num(outcome.k),
        "exact_cost": _num(outcome.exact_cost),
        "witness_u_F": None if outcome.witness_u_F is None else np.asarray(outcome.witness_u_F).tolist(),
        "worst_case_cost": _num(outcome.worst_case_cost),
        "iterations": [
            {key: (_num(val) if isinstance(val, float) else val) for key, val in r.to_dict().items()}
            for r in outcome.iterations
        ],
        "certificate": None if outcome.certificate is None else outcome.certificate.to_dict(),
        "seed": outcome.seed,
        "config": cfg,
        "message": outcome.message,
    }


def outcome_from_dict(d: dict) -> SynthesisOutcome:
    try:
        cert = d.get("certificate")
        nan = float("nan")
        return SynthesisOutcome(
            mode=Mode(d["mode"]),
            status=OutcomeStatus(d["status"]),
            u_L=None if d.get("u_L") is None else np.array(d["u_L"], dtype=float),
            k=nan if d.get("k") is None else float(d["k"]),
            exact_cost=nan if d.get("exact_cost") is None else float(d["exact_cost"]),
            witness_u_F=None if d.get("witness_u_F") is None else np.array(d["witness_u_F"], dtype=float),
            worst_case_cost=nan if d.get("worst_case_cost") is None else float(d["worst_case_cost"]),
            iterations=[IterationRecord(**{k: (nan if v is None else v) for k, v in r.items()})
                        for r in d.get("iterations", [])],
            certificate=None if cert is None else Certificate(cert["passed"], cert["checks"], cert.get("witness")),
            seed=int(d.get("seed", 0)),
            config=dict(d.get("config", {})),
            message=d.get("message", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"outcome JSON does not match the schema: {exc}") from exc


def dumps_outcome(outcome: SynthesisOutcome) -> str:
    return json.dumps(outcome_to_dict(outcome), indent=2, sort_keys=True) + "\n"


def save_outcome(path, outcome: SynthesisOutcome):
    """Write the deterministic outcome JSON and, beside it, a timing file."""
    path = Path(path)
    path.write_text(dumps_outcome(outcome))
    timing = {"wall_time": outcome.wall_time, "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    path.with_suffix(".timing.json").write_text(json.dumps(timing, indent=2) + "\n")


def load_outcome(path) -> SynthesisOutcome:
    with open(path) as fh:
        return outcome_from_dict(json.load(fh))
