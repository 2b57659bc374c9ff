"""``convrptw`` command line.

Exit codes: 0 success, 2 input/output or parse errors, 3 an instance with a
customer no vehicle can serve, 4 an instance the exact oracle refuses.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import io as nio
from .construction import ConstructionParams
from .elimination import EliminationParams
from .model import ConVRPTWError, InfeasibleInstanceError, Instance, InstanceError, Solution, evaluate_solution
from .oracle import OracleLimitError, OracleLimits, exact_min_vehicles, export_milp
from .report import ReportError, RunReport, build_table, improvement, read_report, write_report
from .rolling import assignment_by_label, daily_plan, day_instance, update_solution
from .solver import solve

log = logging.getLogger("convrptw")

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


def _load_instance(args) -> Instance:
    instance = nio.read_instance(args.instance)
    if getattr(args, "distance_matrix", None) or getattr(args, "time_matrix", None):
        if not (args.distance_matrix and args.time_matrix):
            raise CommandError("--distance-matrix and --time-matrix go together")
        instance = nio.load_matrices(instance, args.distance_matrix, args.time_matrix)
    return instance


def _construction(args) -> ConstructionParams:
    return ConstructionParams(ic=args.ic, mu=args.mu, lam=args.lam,
                              alpha1=args.alpha1, alpha2=1 - args.alpha1)


def _elimination(args) -> EliminationParams:
    return EliminationParams(k_max=args.k_max, ct_max=args.ct_max, rng_seed=args.seed)


def _params(args) -> dict:
    return {"construction": asdict(_construction(args)),
            "elimination": {k: v for k, v in asdict(_elimination(args)).items() if k != "stream"},
            "portfolio": getattr(args, "portfolio", 1)}


def _report_path(args) -> Path:
    if args.report:
        return Path(args.report)
    out = Path(args.out)
    return out.with_name(out.stem + ".report.json")


def _write_verified(instance: Instance, solution: Solution, path, **extra) -> None:
    metrics = evaluate_solution(instance, solution)
    if not metrics.feasible:
        raise AssertionError("refusing to write an infeasible solution; this is a bug")
    nio.write_solution(instance, solution, path, metrics={
        "n_vehicles": metrics.n_vehicles,
        "travel_time_min": round(metrics.travel_time, 6),
        "distance_km": round(metrics.distance, 6),
        "ptw": metrics.ptw,
        "ltw": metrics.ltw,
    }, **extra)


def _log_trace(trace) -> None:
    for event in trace or ():
        log.debug("trace %s", json.dumps(event, sort_keys=True))


def _finish(instance, solution, args, report: RunReport) -> None:
    _write_verified(instance, solution, args.out, seed=args.seed, params=_params(args),
                    command=report.command)
    write_report(report, _report_path(args))
    print(f"{instance.name}: NV={report.n_vehicles} TT={report.travel_time_hours:.2f}h "
          f"PTW={report.ptw:.1f}% -> {args.out}")


def cmd_generate(args) -> int:
    if args.bundled:
        solomon = nio.load_bundled_solomon(args.bundled)
    else:
        solomon = nio.read_solomon(args.solomon)
    config = nio.GeneratorConfig(customer_count=args.customers, day_count=args.days,
                                 activity_probability=args.activity,
                                 capacity_factor=args.capacity_factor, rng_seed=args.seed,
                                 customer_offset=args.offset)
    instance = nio.generate_convrptw(solomon, config)
    nio.write_instance(instance, args.out)
    print(f"{instance.name}: {instance.n_customers} customers, {instance.n_days} days -> {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = _load_instance(args)
    result = solve(instance, _construction(args), _elimination(args),
                   portfolio=args.portfolio, trace=args.verbose)
    _log_trace(result.trace)
    delta_tt = None
    if args.baseline:
        base = nio.read_solution(args.baseline, instance)
        delta_tt = improvement(evaluate_solution(instance, base).travel_time, result.travel_time)
    report = RunReport.from_solution(instance, result.solution, result.cpu_seconds, args.seed,
                                     command="solve", delta_tt=delta_tt, params=_params(args))
    _finish(instance, result.solution, args, report)
    return EXIT_OK


def cmd_update(args) -> int:
    instance = _load_instance(args)
    previous = nio.driver_map(nio.read_solution_document(args.previous))
    trace = [] if args.verbose else None
    clock = time.perf_counter()
    result = update_solution(instance, previous, _elimination(args), _construction(args),
                             trace=trace)
    _log_trace(trace)
    report = RunReport.from_solution(instance, result.solution, time.perf_counter() - clock,
                                     args.seed, command="update", ic=result.percent_changed,
                                     params=_params(args))
    _finish(instance, result.solution, args, report)
    print(f"IC={result.percent_changed:.1f}% ({result.changed} of {result.retained} retained "
          f"customers changed driver; {len(result.new_customers)} new, {result.opened} vehicles opened)")
    return EXIT_OK


def cmd_daily(args) -> int:
    instance = _load_instance(args)
    if args.day is not None:
        instance = day_instance(instance, args.day)
    if instance.n_days != 1:
        raise CommandError(f"{args.instance} has {instance.n_days} days; pass --day")
    base = nio.driver_map(nio.read_solution_document(args.base))
    trace = [] if args.verbose else None
    clock = time.perf_counter()
    result = daily_plan(instance, base, _elimination(args), _construction(args), trace=trace)
    _log_trace(trace)
    report = RunReport.from_solution(instance, result.solution, time.perf_counter() - clock,
                                     args.seed, command="daily",
                                     inconsistency=result.percent_changed, params=_params(args))
    _finish(instance, result.solution, args, report)
    print(f"inconsistency={result.percent_changed:.1f}% ({result.changed} of {result.retained} visits)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance = _load_instance(args)
    limits = OracleLimits(max_customers=args.max_customers, max_nodes=args.max_nodes,
                          time_limit=args.time_limit)
    result = exact_min_vehicles(instance, limits)
    print(f"{instance.name}: min_vehicles={result.min_vehicles} "
          f"nodes={result.explored_nodes} elapsed={result.elapsed:.2f}s")
    if args.out:
        _write_verified(instance, result.witness, args.out, command="oracle",
                        explored_nodes=result.explored_nodes)
    return EXIT_OK


def cmd_export_milp(args) -> int:
    instance = _load_instance(args)
    export_milp(instance, args.out, args.vehicles)
    print(f"{instance.name}: LP model -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [read_report(p) for p in args.runs]
    baseline = read_report(args.baseline) if args.baseline else None
    table = build_table(reports, [Path(p).stem for p in args.runs], baseline)
    sys.stdout.write(table.to_text())
    if args.csv:
        Path(args.csv).write_text(table.to_csv())
    return EXIT_OK


def _add_heuristic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ct-max", type=float, default=60.0, help="elimination budget in seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ic", type=int, choices=(1, 2), default=1,
                   help="seed rule: 1 farthest customer, 2 earliest deadline")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--alpha1", type=float, default=0.5,
                   help="weight of the distance detour; the time term gets 1 - alpha1")
    p.add_argument("--k-max", type=int, default=3)
    p.add_argument("--report", help="run report path (default: next to --out)")


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True)
    p.add_argument("--distance-matrix", help="whitespace-separated km distance matrix overriding the instance's")
    p.add_argument("--time-matrix", help="whitespace-separated minute travel-time matrix overriding the instance's")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convrptw", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="log the search trace to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="draw a multi-day instance from a Solomon file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--solomon", help="path to a Solomon text file")
    src.add_argument("--bundled", help="name of a bundled Solomon instance, e.g. C101")
    p.add_argument("--customers", type=int, default=10)
    p.add_argument("--days", type=int, default=5)
    p.add_argument("--activity", type=float, default=0.7)
    p.add_argument("--capacity-factor", type=float, default=0.5)
    p.add_argument("--offset", type=int, default=0, help="skip this many customers of the file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[common], help="construct, eliminate vehicles, polish")
    _add_instance_flags(p)
    _add_heuristic_flags(p)
    p.add_argument("--portfolio", type=int, default=1,
                   help="independent elimination streams run in parallel")
    p.add_argument("--baseline", help="solution of the same instance to compare travel time with")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("update", parents=[common], help="re-plan a new period from a previous solution")
    _add_instance_flags(p)
    _add_heuristic_flags(p)
    p.add_argument("--previous", required=True, help="solution file of the previous period")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("daily", parents=[common], help="route one day against a base assignment")
    _add_instance_flags(p)
    _add_heuristic_flags(p)
    p.add_argument("--base", required=True, help="solution file holding the base assignment")
    p.add_argument("--day", type=int, help="day of a multi-day instance to route")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_daily)

    p = sub.add_parser("oracle", parents=[common], help="exact minimum number of vehicles (small instances)")
    _add_instance_flags(p)
    p.add_argument("--max-customers", type=int, default=OracleLimits.max_customers)
    p.add_argument("--max-nodes", type=int, default=OracleLimits.max_nodes)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--out", help="write the witness solution here")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-milp", parents=[common], help="write the vehicle-minimization model as LP text")
    _add_instance_flags(p)
    p.add_argument("--vehicles", type=int, help="fleet size in the model (default: one per customer)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_milp)

    p = sub.add_parser("report", parents=[common], help="tabulate run reports of one instance")
    p.add_argument("runs", nargs="+", help="run report files")
    p.add_argument("--baseline", help="run report the improvement columns compare against")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except InfeasibleInstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OracleLimitError as exc:
        print(f"error: oracle refused: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, InstanceError, ReportError, ConVRPTWError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
