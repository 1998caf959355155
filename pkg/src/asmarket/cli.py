"""Command-line pipeline: scenario -> UC -> prices -> stand-alone markets ->
allocations, with persistent run artifacts.

Exit codes: 0 ok, 1 validation, 2 infeasible, 3 internal.
"""
from __future__ import annotations

import argparse
import datetime
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import (
    RULES,
    AirportGame,
    AllocationError,
    allocate_hourly,
    nucleolus_lp_oracle,
    shapley_bruteforce,
)
from .pricing import StandaloneError, as_prices_from_duals, duality_audit, standalone_markets
from .scenario import Scenario, ScenarioError, ScenarioValidationError, load_scenario
from .solve import InfeasibleError, SolveOptions, solve_mip, solve_relaxed
from .tables import (
    RunManifest,
    make_run_id,
    sha256_file,
    write_allocation,
    write_allocation_by_technology,
    write_audit_hourly,
    write_audit_summary,
    write_commitment,
    write_dispatch,
    write_duals,
    write_prices,
    write_standalone_matrix,
)
from .ucmodel import EndogenousMax, FixedProfile, build_uc

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_INTERNAL = 3

OUT_DIR_ENV = "ASMARKET_OUT_DIR"


def cmd_validate(args) -> int:
    try:
        load_scenario(args.scenario)
    except ScenarioValidationError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print("scenario is valid")
    return EXIT_OK


def _loss_rule(spec: str, scenario: Scenario):
    if spec == "endogenous":
        return EndogenousMax()
    if spec == "profile":
        if scenario.p_loss_cap_mw is None:
            raise ScenarioError("--loss-rule profile requires p_loss_cap_mw in the scenario")
        return FixedProfile(scenario.p_loss_cap_mw)
    try:
        value = float(spec)
    except ValueError:
        raise ScenarioError(f"--loss-rule must be 'endogenous', 'profile' or a MW value (got {spec!r})")
    return FixedProfile.constant(value, scenario.horizon)


def _realized_loss_profile(scenario: Scenario, dispatch) -> tuple[float, ...]:
    # largest dispatched loss-eligible injection per hour
    T = scenario.horizon
    worst = np.zeros(T)
    for u in scenario.all_units:
        if u.loss_eligible:
            worst = np.maximum(worst, dispatch.dispatch_of(u.id))
    return tuple(float(v) for v in worst)


def cmd_run(args) -> int:
    t_start = time.perf_counter()
    out_dir = Path(args.out or os.environ.get(OUT_DIR_ENV) or "asmarket_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    flags = {
        "rule": args.rule,
        "loss_rule": args.loss_rule,
        "gap": args.gap,
        "hours": args.hours,
        "group_tol": args.group_tol,
        "feas_tol": args.feas_tol,
        "duality_tol": args.duality_tol,
        "cone_tol": args.cone_tol,
    }
    try:
        scenario_sha = sha256_file(args.scenario)
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    run_id = make_run_id(scenario_sha, flags, __version__)
    manifest = RunManifest(
        run_id=run_id,
        tool_version=__version__,
        scenario_path=str(args.scenario),
        scenario_sha256=scenario_sha,
        created_utc=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        flags=flags,
    )
    manifest_path = out_dir / "manifest.json"

    def finish(code: int) -> int:
        manifest.save(manifest_path)
        return code

    def run_stage(name, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception:
            manifest.add_stage(name, "failed", time.perf_counter() - t0)
            raise
        manifest.add_stage(name, "ok", time.perf_counter() - t0)
        return result

    opts = SolveOptions(
        feas_tol=args.feas_tol, duality_tol=args.duality_tol, cone_rel_tol=args.cone_tol
    )
    try:
        def load():
            sc = load_scenario(args.scenario)
            if args.hours is None:
                return sc
            if not 1 <= args.hours <= sc.horizon:
                raise ScenarioError(f"--hours must be in [1, {sc.horizon}] (got {args.hours})")
            return sc.truncated(args.hours)

        scenario = run_stage("load", load)
        loss_rule = _loss_rule(args.loss_rule, scenario)

        def block_i():
            model = build_uc(scenario, loss_rule, relaxed=False)
            return solve_mip(model, rel_gap=args.gap, options=opts)

        schedule, dispatch, mip_stats = run_stage("uc_mip", block_i)
        if mip_stats.budget_exhausted:
            print(
                f"warning: MIP budget exhausted at gap {mip_stats.rel_mip_gap:.2e}; "
                "results use the incumbent",
                file=sys.stderr,
            )

        def price_stage():
            # fixed designs price at their own loss parameter; the endogenous
            # rule prices at the realized largest dispatched unit
            if isinstance(loss_rule, FixedProfile):
                profile = loss_rule.p_mw
            else:
                profile = _realized_loss_profile(scenario, dispatch)
            model = build_uc(scenario, FixedProfile(profile), relaxed=True)
            relaxed_dispatch, duals, _ = solve_relaxed(model, opts)
            prices = as_prices_from_duals(duals, scenario.params)
            breakdown = duality_audit(relaxed_dispatch, duals, scenario)
            return relaxed_dispatch, duals, prices, breakdown

        relaxed_dispatch, duals, prices, breakdown = run_stage("prices", price_stage)

        standalone = run_stage(
            "standalone",
            lambda: standalone_markets(scenario, (schedule, dispatch), options=opts, jobs=args.jobs),
        )

        rules = list(RULES) if args.rule == "all" else [args.rule]
        series = run_stage(
            "allocation",
            lambda: {rule: allocate_hourly(standalone, rule, args.group_tol) for rule in rules},
        )

        def write_outputs():
            tech = scenario.technology_of()
            outputs = {
                "commitment.csv": lambda p: write_commitment(p, run_id, scenario, schedule),
                "dispatch.csv": lambda p: write_dispatch(p, run_id, scenario, dispatch),
                "prices.csv": lambda p: write_prices(p, run_id, prices),
                "standalone_omega.csv": lambda p: write_standalone_matrix(p, run_id, standalone),
                "duals.csv": lambda p: write_duals(p, run_id, scenario, duals),
                "audit_hourly.csv": lambda p: write_audit_hourly(p, run_id, relaxed_dispatch, breakdown),
                "audit_summary.csv": lambda p: write_audit_summary(p, run_id, breakdown),
            }
            for rule, s in series.items():
                outputs[f"allocation_{rule}.csv"] = (
                    lambda p, s=s: write_allocation(p, run_id, s, tech)
                )
                outputs[f"allocation_{rule}_by_technology.csv"] = (
                    lambda p, s=s: write_allocation_by_technology(p, run_id, s)
                )
            for name, writer in outputs.items():
                writer(out_dir / name)
                manifest.outputs.append(name)
            manifest.outputs.append("manifest.json")

        run_stage("write", write_outputs)
    except (ScenarioValidationError, ScenarioError) as exc:
        print(str(exc), file=sys.stderr)
        return finish(EXIT_VALIDATION)
    except (InfeasibleError, StandaloneError) as exc:
        print(str(exc), file=sys.stderr)
        return finish(EXIT_INFEASIBLE)
    except Exception as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return finish(EXIT_INTERNAL)
    manifest.add_stage("total", "ok", time.perf_counter() - t_start)
    print(f"run {run_id} complete: {len(manifest.outputs)} artifacts in {out_dir}")
    return finish(EXIT_OK)


def _read_costs_file(path: Path) -> list[tuple[str, float]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise ScenarioError(f"costs file line needs 'id,omega': {line!r}")
        try:
            value = float(parts[1])
        except ValueError:
            if not rows:
                continue  # header line
            raise ScenarioError(f"bad omega value in line: {line!r}")
        rows.append((parts[0], value))
    if not rows:
        raise ScenarioError("costs file has no data rows")
    return rows


def cmd_game(args) -> int:
    try:
        costs = _read_costs_file(args.costs_file)
        game = AirportGame.from_costs(costs)
        alloc = RULES[args.rule](game)
        print("unit_id,phi_gbp")
        for uid, _ in game.players:
            print(f"{uid},{alloc.phi[uid]!r}")
        if args.oracle:
            if args.rule == "shapley":
                oracle = shapley_bruteforce(game)
            elif args.rule == "nucleolus":
                oracle = nucleolus_lp_oracle(game)
            else:
                print("no oracle for the proportional rule", file=sys.stderr)
                return EXIT_VALIDATION
            dev = max(abs(alloc.phi[u] - oracle.phi[u]) for u in alloc.phi)
            print(f"# oracle max deviation: {dev!r}")
    except OSError as exc:
        print(f"cannot read costs file: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ScenarioError, AllocationError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asmarket",
        description="Frequency-secured market clearing, AS pricing and cost allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario document")
    p.add_argument("scenario", type=Path)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("scenario", type=Path)
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default ${OUT_DIR_ENV} or ./asmarket_out)")
    p.add_argument("--rule", choices=sorted(RULES) + ["all"], default="all")
    p.add_argument("--loss-rule", default="endogenous",
                   help="'endogenous', 'profile' (scenario p_loss_cap_mw) or a constant MW value")
    p.add_argument("--gap", type=float, default=1e-6, help="relative MIP gap")
    p.add_argument("--hours", type=int, default=None, help="truncate the horizon")
    p.add_argument("--jobs", type=int, default=4, help="stand-alone solve fan-out")
    p.add_argument("--group-tol", type=float, default=1e-9,
                   help="relative tolerance for nucleolus type grouping")
    p.add_argument("--feas-tol", type=float, default=1e-6,
                   help="feasibility tolerance on scaled rows")
    p.add_argument("--duality-tol", type=float, default=1e-6,
                   help="relative duality gap / complementary slackness tolerance")
    p.add_argument("--cone-tol", type=float, default=1e-9,
                   help="relative nadir-cone residual target")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("game", help="allocate a cost vector from a file of id,omega rows")
    p.add_argument("costs_file", type=Path)
    p.add_argument("--rule", choices=sorted(RULES), default="nucleolus")
    p.add_argument("--oracle", action="store_true",
                   help="also run the brute-force counterpart and print the max deviation")
    p.set_defaults(fn=cmd_game)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
