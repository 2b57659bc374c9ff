"""The full heuristic: construction, vehicle elimination, distance polishing.

``portfolio > 1`` runs independent elimination streams in worker processes
and keeps the fewest vehicles, then the shortest travel time, then the
lowest stream index, so the answer does not depend on scheduling.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .construction import ConstructionParams, construct
from .elimination import EliminationParams, eliminate_routes
from .local_search import PenaltyParams, reoptimize
from .model import Instance, Solution, evaluate_solution


@dataclass
class SolveResult:
    solution: Solution
    constructed_vehicles: int
    travel_time: float  # minutes
    stream: int = 0
    cpu_seconds: float = 0.0  # wall clock, construction included
    trace: list = field(default_factory=list)


def _run_stream(instance: Instance, start: Solution, params: EliminationParams,
                construction: ConstructionParams, penalty_params: PenaltyParams,
                stream: int, want_trace: bool) -> tuple[int, float, int, Solution, list]:
    trace = [] if want_trace else None
    solution = eliminate_routes(instance, start, params, construction, penalty_params, trace)
    reoptimize(instance, solution)
    m = evaluate_solution(instance, solution)
    return m.n_vehicles, m.travel_time, stream, solution, trace or []


def solve(instance: Instance, construction: ConstructionParams = ConstructionParams(),
          params: EliminationParams = EliminationParams(),
          penalty_params: PenaltyParams = PenaltyParams(),
          portfolio: int = 1, trace: bool = False) -> SolveResult:
    """Construct, eliminate vehicles within ``params.ct_max``, then polish distance."""
    if portfolio < 1:
        raise ValueError("portfolio must be at least 1")
    clock = time.perf_counter()
    start = construct(instance, construction)
    if portfolio == 1:
        runs = [_run_stream(instance, start, params, construction, penalty_params, 0, trace)]
    else:
        streams = [replace(params, stream=(i,)) for i in range(portfolio)]
        with ProcessPoolExecutor(max_workers=portfolio) as pool:
            futures = [pool.submit(_run_stream, instance, start, p, construction,
                                   penalty_params, i, trace)
                       for i, p in enumerate(streams)]
            runs = [f.result() for f in futures]
    nv, tt, stream, solution, log = min(runs, key=lambda r: r[:3])
    return SolveResult(solution, start.n_vehicles, tt, stream,
                       time.perf_counter() - clock, log)
