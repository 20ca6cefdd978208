"""Command-line front end: ``stackstl synthesize|monitor|verify|reproduce|export-lp``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import stl
from .dynamics import (Scenario, Trajectory, bundled_scenario, eval_cost, load_scenario,
                       read_trace_csv, simulate, write_trajectory_csv)
from .encode import BigMError, HorizonError
from .milp import BackendUnavailable, write_lp
from .plotting import plot_workspace
from .synth import (Mode, OutcomeStatus, SolverError, SynthConfig, SynthesisOutcome,
                    build_master, load_outcome, save_outcome, solve_ssp, verify_outcome)

log = logging.getLogger(__name__)

OUT_ENV = "STACKSTL_OUT"

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_ITER_LIMIT = 3
EXIT_INPUT = 4
EXIT_INTERNAL = 5

_STATUS_EXIT = {
    OutcomeStatus.SUCCESS: EXIT_OK,
    OutcomeStatus.INFEASIBLE: EXIT_INFEASIBLE,
    OutcomeStatus.ITERATION_LIMIT: EXIT_ITER_LIMIT,
}

# published results used by ``reproduce``: (scenario, mode, cost, tolerance)
REFERENCE = {
    1: [("double_integrator", "cooperative", -0.3613, 0.05),
        ("double_integrator", "antagonistic", -0.9999, 0.02)],
    2: [("three_agents", "cooperative", 2.7439e-6, None)],
}
CASE2_COST_CEILING = 1e-5


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    mode: str = "auto"
    seed: int = 0
    init_candidates: int = 5
    restarts: int = 0
    max_iters: int = 50
    big_m: float | None = None
    epsilon: float | None = None
    mip_gap: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    pwl_segments: int | None = None
    margin: float = 5e-2
    cegis_gap: float = 1e-2
    out: Path = Path("stackstl_out")
    backend: str = "highs"

    def __post_init__(self):
        for name in ("init_candidates", "max_iters", "mip_gap", "big_m", "epsilon",
                     "node_limit", "time_limit", "pwl_segments"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        for name in ("restarts", "margin", "cegis_gap"):
            if getattr(self, name) < 0:
                raise InputError(f"--{name.replace('_', '-')} must be nonnegative")
        if self.mode not in ("coop", "ant", "auto"):
            raise InputError(f"unknown mode {self.mode!r}")

    def synth_config(self) -> SynthConfig:
        return SynthConfig(seed=self.seed, init_candidates=self.init_candidates,
                           restarts=self.restarts, max_iters=self.max_iters, backend=self.backend,
                           mip_gap=self.mip_gap, node_limit=self.node_limit,
                           time_limit=self.time_limit, big_m=self.big_m, epsilon=self.epsilon,
                           margin=self.margin, cegis_gap=self.cegis_gap)


def resolve_scenario(spec: str, pwl_segments: int | None = None) -> Scenario:
    """Load a scenario from a path, falling back to the bundled scenarios."""
    path = Path(spec)
    try:
        if path.exists():
            sc = load_scenario(path)
        else:
            try:
                sc = bundled_scenario(path.name)
            except FileNotFoundError:
                raise InputError(f"scenario file not found: {spec}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"cannot parse scenario {spec}: {exc}") from exc
    if pwl_segments is not None:
        sc = sc.replace(cost=dataclasses.replace(sc.cost, pwl_segments=pwl_segments))
    return sc


def _writable(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"output directory {out} is not writable: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    return out


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "stackstl_out"))


# -- artifacts ---------------------------------------------------------------------------

def outcome_trajectory(sc: Scenario, outcome: SynthesisOutcome) -> Trajectory | None:
    """Trajectory to render: the witness response (cooperative) or the
    non-interfering response (antagonistic)."""
    if outcome.u_L is None:
        return None
    if Mode(outcome.mode) is Mode.COOPERATIVE and outcome.witness_u_F is not None:
        return simulate(sc, outcome.u_L, outcome.witness_u_F, check_bounds=False)
    return simulate(sc, outcome.u_L, sc.zero_follower(), check_bounds=False)


def distance_report(sc: Scenario, traj: Trajectory) -> list[dict]:
    """Check Euclidean distance requirements listed in the scenario plot hints.

    Each entry of ``distance_checks`` is ``[ax, ay, bx, by, radius]``.
    """
    x = traj.states.states
    rows = []
    for ax, ay, bx, by, r in sc.plot.get("distance_checks", []):
        d = np.hypot(x[:, ax] - x[:, bx], x[:, ay] - x[:, by])
        rows.append({"pair": [ax, ay, bx, by], "radius": r, "max_distance": float(d.max()),
                     "passed": bool(d.max() <= r)})
    return rows


def write_artifacts(sc: Scenario, outcome: SynthesisOutcome, out: Path, stem: str = "outcome") -> dict:
    out = _writable(out)
    paths = {"outcome": out / f"{stem}.json"}
    save_outcome(paths["outcome"], outcome)
    traj = outcome_trajectory(sc, outcome)
    if traj is None:
        return paths
    csv_path = out / f"{stem}_trajectory.csv"
    write_trajectory_csv(csv_path, traj)
    paths["trajectory"] = csv_path
    summary = {
        "rho_L": stl.robustness(sc.phi_L, traj.states),
        "rho_F": stl.robustness(sc.phi_F, traj.states),
        "phi_L": stl.eval_bool(sc.phi_L, traj.states),
        "phi_F": stl.eval_bool(sc.phi_F, traj.states),
        "cost": eval_cost(sc, traj),
        "distance_checks": distance_report(sc, traj),
    }
    paths["robustness"] = out / f"{stem}_robustness.json"
    paths["robustness"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    title = f"{sc.name}: {Mode(outcome.mode).value}"
    paths["plot"] = plot_workspace(sc, traj, out / f"{stem}.svg", title=title)
    return paths


def _print_outcome(outcome: SynthesisOutcome):
    print(f"mode:        {Mode(outcome.mode).value}")
    print(f"status:      {outcome.status.value}")
    if outcome.ok:
        print(f"k:           {outcome.k:.6g}")
        print(f"exact cost:  {outcome.exact_cost:.6g}")
        if Mode(outcome.mode) is Mode.COOPERATIVE:
            print(f"worst case:  {outcome.worst_case_cost:.6g}")
    print(f"iterations:  {len(outcome.iterations)}")
    if outcome.certificate is not None:
        print(f"certificate: {outcome.certificate.verdict}")
    if outcome.message:
        print(f"message:     {outcome.message}")
    print(f"wall time:   {outcome.wall_time:.2f} s")


# -- commands ---------------------------------------------------------------------------

def cmd_synthesize(cfg: RunConfig) -> int:
    sc = resolve_scenario(cfg.scenario, cfg.pwl_segments)
    outcome = solve_ssp(sc, cfg.synth_config(), cfg.mode)
    _print_outcome(outcome)
    paths = write_artifacts(sc, outcome, cfg.out)
    for k, p in paths.items():
        print(f"wrote {k}: {p}")
    if outcome.ok and outcome.certificate is not None and not outcome.certificate.passed:
        return EXIT_INTERNAL
    return _STATUS_EXIT[outcome.status]


def cmd_monitor(trace_path: str, formula: str, scenario: str | None = None,
                state_names: list[str] | None = None) -> int:
    if scenario is not None:
        sc = resolve_scenario(scenario)
        names = list(sc.state_names)
        specs = {"phi_L": sc.phi_L, "phi_F": sc.phi_F}
    else:
        sc, specs = None, {}
        names = state_names
    if names is None:
        raise InputError("give --scenario or --states to name the trace columns")
    phi = specs.get(formula) or stl.parse(formula, names)
    trace = read_trace_csv(trace_path, names)
    sat = stl.eval_bool(phi, trace)
    rho = stl.robustness(phi, trace)
    print(f"satisfied:  {sat}")
    print(f"robustness: {rho!r}")
    return EXIT_OK if sat else 1


def cmd_verify(outcome_path: str, scenario: str, cfg: SynthConfig | None = None,
               samples: int | None = None) -> int:
    sc = resolve_scenario(scenario)
    outcome = load_outcome(outcome_path)
    base = SynthConfig(**{k: v for k, v in outcome.config.items()
                          if k in SynthConfig.__dataclass_fields__})
    if cfg is not None:
        base = dataclasses.replace(base, backend=cfg.backend)
    cert = verify_outcome(sc, outcome, base, samples=samples)
    print(f"certificate: {cert.verdict}")
    for name, c in sorted(cert.checks.items()):
        print(f"  ({name}) {'pass' if c['passed'] else 'FAIL'}: {c['detail']}")
    if cert.witness is not None:
        print("witness follower input:")
        print(json.dumps(cert.witness))
    return EXIT_OK if cert.passed else 1


def _within(case: int, mode: str, cost: float, ref: float, tol: float | None, dist_ok: bool) -> bool:
    if not np.isfinite(cost):
        return False
    if tol is not None:
        return abs(cost - ref) <= tol
    return cost <= CASE2_COST_CEILING and dist_ok


def cmd_reproduce(case: int, cfg: RunConfig) -> int:
    if case not in REFERENCE:
        raise InputError(f"unknown case {case}; choose 1 or 2")
    rows, code = [], EXIT_OK
    for name, mode, ref, tol in REFERENCE[case]:
        sc = resolve_scenario(name, cfg.pwl_segments)
        outcome = solve_ssp(sc, cfg.synth_config(), mode)
        out = cfg.out / f"case{case}" / mode
        write_artifacts(sc, outcome, out)
        traj = outcome_trajectory(sc, outcome)
        dist = distance_report(sc, traj) if traj is not None else []
        dist_ok = all(d["passed"] for d in dist)
        monitor_ok = traj is not None and stl.eval_bool(sc.phi_L, traj.states) and \
            (mode == "antagonistic" or stl.eval_bool(sc.phi_F, traj.states))
        cert = outcome.certificate.verdict if outcome.certificate else "-"
        ok = outcome.ok and monitor_ok and _within(case, mode, outcome.exact_cost, ref, tol, dist_ok)
        tol_text = f"+/-{tol}" if tol is not None else f"<= {CASE2_COST_CEILING:g}"
        rows.append((f"case {case}", mode, outcome.status.value, cert, f"{outcome.exact_cost:.6g}",
                     f"{ref:.6g}", tol_text, "yes" if ok else "no", f"{outcome.wall_time:.1f}"))
        if not outcome.ok:
            code = max(code, _STATUS_EXIT[outcome.status])
    header = ("case", "mode", "status", "cert", "exact cost", "published", "tolerance", "within",
              "time [s]")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))
    return code


def cmd_export_lp(cfg: RunConfig, path: Path) -> int:
    sc = resolve_scenario(cfg.scenario, cfg.pwl_segments)
    mode = "antagonistic" if cfg.mode == "ant" else "cooperative"
    model = build_master(sc, cfg.synth_config(), mode)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_lp(model))
    print(f"wrote {path} ({model.num_vars} variables, {model.num_binaries} binaries, "
          f"{len(model.constraints)} constraints)")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser, scenario: bool = True):
    if scenario:
        p.add_argument("--scenario", required=True,
                       help="scenario JSON path or bundled name (double_integrator, three_agents)")
    p.add_argument("--mode", choices=["coop", "ant", "auto"], default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-candidates", type=int, default=5)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--big-m", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--mip-gap", type=float, default=1e-6)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None, help="per-solve time limit [s]")
    p.add_argument("--pwl-segments", type=int, default=None)
    p.add_argument("--margin", type=float, default=5e-2,
                   help="amount by which candidate copies must meet the master constraints")
    p.add_argument("--cegis-gap", type=float, default=1e-2, help="gap termination threshold (0 disables)")
    p.add_argument("--backend", default="highs", help="embedded, highs or lp-file")
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default ${OUT_ENV} or ./stackstl_out)")


def _run_config(args, scenario: str = "") -> RunConfig:
    return RunConfig(scenario=getattr(args, "scenario", scenario) or scenario, mode=args.mode,
                     seed=args.seed, init_candidates=args.init_candidates, restarts=args.restarts,
                     max_iters=args.max_iters, big_m=args.big_m, epsilon=args.epsilon,
                     mip_gap=args.mip_gap, node_limit=args.node_limit, time_limit=args.time_limit,
                     pwl_segments=args.pwl_segments, margin=args.margin, cegis_gap=args.cegis_gap,
                     out=args.out or default_out(),
                     backend=args.backend)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackstl",
                                     description="Leader-follower STL synthesis with MILP.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log CEGIS iterations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="synthesize a leader plan")
    _add_run_flags(p)

    p = sub.add_parser("monitor", help="evaluate a formula on a trajectory CSV")
    p.add_argument("trace", help="trajectory CSV")
    p.add_argument("formula", help="STL formula text, or phi_L / phi_F with --scenario")
    p.add_argument("--scenario", default=None, help="scenario giving state names and formulas")
    p.add_argument("--states", default=None, help="comma-separated state names")

    p = sub.add_parser("verify", help="re-check a saved outcome")
    p.add_argument("outcome", help="outcome JSON")
    p.add_argument("--scenario", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--backend", default=None)

    p = sub.add_parser("reproduce", help="rerun the bundled case studies")
    p.add_argument("case", type=int)
    _add_run_flags(p, scenario=False)
    p.set_defaults(seed=1)

    p = sub.add_parser("export-lp", help="write the first master MILP as an LP file")
    _add_run_flags(p)
    p.add_argument("--lp", type=Path, default=None, help="LP file path (default OUT/master.lp)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synthesize":
            return cmd_synthesize(_run_config(args))
        if args.command == "monitor":
            names = args.states.split(",") if args.states else None
            return cmd_monitor(args.trace, args.formula, args.scenario, names)
        if args.command == "verify":
            cfg = SynthConfig(backend=args.backend) if args.backend else None
            return cmd_verify(args.outcome, args.scenario, cfg, args.samples)
        if args.command == "reproduce":
            return cmd_reproduce(args.case, _run_config(args))
        if args.command == "export-lp":
            cfg = _run_config(args)
            return cmd_export_lp(cfg, args.lp or cfg.out / "master.lp")
    except (InputError, FileNotFoundError, IsADirectoryError, stl.STLSyntaxError,
            stl.TraceTooShortError, HorizonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, BigMError, BackendUnavailable) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    parser.error(f"unknown command {args.command}")
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
