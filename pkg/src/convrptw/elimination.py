"""Vehicle elimination with an ejection pool.

One vehicle at a time is removed and its customers are pushed on a LIFO
pool; each popped customer is reinserted by

1. the best feasible vehicle insertion, else
2. the penalty-minimizing infeasible insertion followed by a repair descent, else
3. an insertion into a random vehicle that ejects the cheapest (by failure
   counters) set of at most ``k_max`` customers restoring feasibility.

Only fully feasible states are ever committed.
"""
from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .construction import ConstructionParams, best_vehicle_insertion
from .local_search import (
    DistanceObjective,
    PenaltyObjective,
    PenaltyParams,
    adapt_alpha,
    descend,
    penalty,
    restore_feasibility,
)
from .model import Instance, Solution, route_feasible, vehicle_lower_bound

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EliminationParams:
    k_max: int = 3
    ct_max: float = 60.0  # seconds
    rng_seed: int = 0
    max_stage3: int = 2000  # per elimination attempt
    restore_budget: int = 1000
    target_vehicles: int | None = None
    stop_at_lower_bound: bool = True
    diversify: bool = True  # distance descent after each stage-3 ejection
    stream: tuple[int, ...] = ()  # spawn key of an independent random stream

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.ct_max < 0:
            raise ValueError("ct_max must be nonnegative")


class EjectionPool:
    """LIFO stack of unassigned customers with failure counters."""

    def __init__(self, customers=()):
        self.stack: list[int] = []
        self.penalty: dict[int, int] = {}
        for v in customers:
            self.push(v)

    def push(self, v: int) -> None:
        self.stack.append(v)
        self.penalty.setdefault(v, 1)

    def pop(self) -> int:
        return self.stack.pop()

    def reset_penalties(self, customers) -> None:
        self.penalty = {v: 1 for v in customers}

    def __len__(self) -> int:
        return len(self.stack)

    def __contains__(self, v) -> bool:
        return v in self.stack


@dataclass
class PenaltyState:
    alpha: float = 1.0
    params: PenaltyParams = field(default_factory=PenaltyParams)

    def adapt(self, breakdown) -> None:
        self.alpha = adapt_alpha(breakdown, self.alpha, self.params)


def _emit(trace, event: str, **data) -> None:
    if trace is not None:
        trace.append({"event": event, **data})


def select_victim(solution: Solution) -> int | None:
    """Non-empty vehicle with the fewest visits summed over days."""
    nonempty = [k for k, days in enumerate(solution.routes) if any(days)]
    if len(nonempty) < 2:
        return None
    return min(nonempty, key=lambda k: (solution.visit_count(k), k))


def feasible_insertions(instance: Instance, solution: Solution, v: int,
                        params: ConstructionParams = ConstructionParams()):
    """All feasible vehicle insertions of ``v`` as ``(quality, k, positions)``."""
    out = []
    for k, days in enumerate(solution.routes):
        if not any(days):
            continue
        found = best_vehicle_insertion(instance, solution, k, v, params)
        if found is not None:
            positions, costs = found
            out.append((sum(costs.values()), k, positions))
    return out


def stage1_insert(instance: Instance, solution: Solution, v: int,
                  params: ConstructionParams = ConstructionParams()) -> bool:
    options = feasible_insertions(instance, solution, v, params)
    if not options:
        return False
    _, k, positions = min(options, key=lambda o: (o[0], o[1]))
    solution.insert(k, v, positions)
    return True


def penalty_insertions(instance: Instance, solution: Solution, v: int, alpha: float):
    """Per vehicle, the per-day ``F_p``-minimizing slots: ``(F_p increase, k, positions)``."""
    objective = PenaltyObjective(alpha)
    out = []
    for k, days in enumerate(solution.routes):
        if not any(days):
            continue
        positions, increase = {}, 0.0
        for d in instance.active_days(v):
            r = days[d]
            p, val = objective.best_insertion(instance, d, r, v)
            positions[d] = p
            increase += val - objective.route_value(instance, d, r)
        out.append((increase, k, positions))
    return out


def stage2_insert(instance: Instance, solution: Solution, v: int, state: PenaltyState,
                  budget: int = 1000) -> bool:
    options = penalty_insertions(instance, solution, v, state.alpha)
    if not options:
        return False
    _, k, positions = min(options, key=lambda o: (o[0], o[1]))
    snapshot = solution.copy()
    solution.insert(k, v, positions)
    _, ok = restore_feasibility(instance, solution, state.alpha, budget)
    if ok:
        return True
    state.adapt(penalty(instance, solution, state.alpha))
    solution.routes, solution.drivers = snapshot.routes, snapshot.drivers
    return False


def vehicle_feasible(instance: Instance, days: list[list[int]]) -> bool:
    return all(route_feasible(instance, d, r) for d, r in enumerate(days) if r)


def best_ejection(instance: Instance, days: list[list[int]], pool: EjectionPool,
                  k_max: int) -> tuple[int, ...] | None:
    """Cheapest subset of at most ``k_max`` customers whose removal makes the vehicle feasible.

    Ordered by summed failure counters, then subset size, then ids.
    """
    members = sorted({v for r in days for v in r})
    candidates = []
    for size in range(1, min(k_max, len(members)) + 1):
        for subset in itertools.combinations(members, size):
            psum = sum(pool.penalty.get(x, 1) for x in subset)
            candidates.append((psum, size, subset))
    candidates.sort()
    for _, _, subset in candidates:
        drop = set(subset)
        if all(route_feasible(instance, d, [x for x in r if x not in drop])
               for d, r in enumerate(days) if r):
            return subset
    return None


def stage3_eject(instance: Instance, solution: Solution, v: int, pool: EjectionPool,
                 rng: np.random.Generator, state: PenaltyState, k_max: int = 3,
                 diversify: bool = True) -> tuple[int, ...] | None:
    """Insert ``v`` into a random vehicle and eject customers to restore feasibility.

    Returns the ejected customers (already pushed on the pool), or ``None``
    if no subset of size ``<= k_max`` works; the solution is then unchanged.
    """
    pool.penalty[v] = pool.penalty.get(v, 1) + 1
    days_v = set(instance.active_days(v))
    nonempty = [k for k, days in enumerate(solution.routes) if any(days)]
    eligible = [k for k in nonempty
                if days_v & {d for d, r in enumerate(solution.routes[k]) if r}]
    eligible = eligible or nonempty
    if not eligible:
        return None
    k = eligible[int(rng.integers(len(eligible)))]
    objective = PenaltyObjective(state.alpha)
    positions = {d: objective.best_insertion(instance, d, solution.routes[k][d], v)[0]
                 for d in sorted(days_v)}
    solution.insert(k, v, positions)
    if vehicle_feasible(instance, solution.routes[k]):
        return ()
    subset = best_ejection(instance, solution.routes[k], pool, k_max)
    if subset is None:
        solution.remove(k, v)
        return None
    for x in subset:
        solution.remove(k, x)
    for x in subset:
        pool.push(x)
    if diversify:
        descend(instance, solution, DistanceObjective(), allow_emptying=True)
    # vehicles emptied by the descent are dropped; their customers are all routed
    solution.prune()
    return subset


@dataclass
class PoolResult:
    emptied: bool
    stage_counts: dict[str, int]
    blocking: int | None = None


def insert_pool(instance: Instance, solution: Solution, pool: EjectionPool,
                state: PenaltyState, rng: np.random.Generator, params: EliminationParams,
                deadline: float, construction: ConstructionParams = ConstructionParams(),
                trace: list | None = None) -> PoolResult:
    """Run the three insertion stages until the pool empties or a limit is hit.

    On failure the customer that was being inserted is left on top of the pool.
    """
    counts = {"stage1": 0, "stage2": 0, "stage3": 0, "stage3_failed": 0}
    while len(pool):
        if time.perf_counter() > deadline:
            return PoolResult(False, counts, pool.stack[-1])
        v = pool.pop()
        if stage1_insert(instance, solution, v, construction):
            counts["stage1"] += 1
            _emit(trace, "stage1", customer=v, pool=len(pool))
            continue
        if stage2_insert(instance, solution, v, state, params.restore_budget):
            counts["stage2"] += 1
            _emit(trace, "stage2", customer=v, pool=len(pool), alpha=state.alpha)
            continue
        _emit(trace, "stage2_failed", customer=v, alpha=state.alpha)
        if counts["stage3"] >= params.max_stage3:
            pool.push(v)
            return PoolResult(False, counts, v)
        counts["stage3"] += 1
        ejected = stage3_eject(instance, solution, v, pool, rng, state, params.k_max,
                               params.diversify)
        if ejected is None:
            counts["stage3_failed"] += 1
            pool.push(v)
            _emit(trace, "stage3_failed", customer=v, penalty=pool.penalty[v])
        else:
            _emit(trace, "stage3", customer=v, ejected=list(ejected),
                  penalty=pool.penalty[v], pool=len(pool))
    return PoolResult(True, counts)


def make_rng(seed: int, stream: tuple[int, ...] = ()) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=stream))


def eliminate_routes(instance: Instance, solution: Solution,
                     params: EliminationParams = EliminationParams(),
                     construction: ConstructionParams = ConstructionParams(),
                     penalty_params: PenaltyParams = PenaltyParams(),
                     trace: list | None = None,
                     deadline: float | None = None) -> Solution:
    """Remove vehicles one at a time while every customer can be reinserted.

    Stops at ``ct_max`` seconds, at the vehicle target (default: a
    capacity/compatibility lower bound), or when an attempt exhausts its
    stage-3 budget. The input is not modified; the result is the last
    committed feasible plan.
    """
    start = time.perf_counter()
    if deadline is None:
        deadline = start + params.ct_max
    rng = make_rng(params.rng_seed, params.stream)
    state = PenaltyState(penalty_params.alpha, penalty_params)
    current = solution.copy().prune()
    target = params.target_vehicles
    if target is None:
        target = vehicle_lower_bound(instance) if params.stop_at_lower_bound else 1
    _emit(trace, "start", vehicles=current.n_vehicles, target=target)
    while current.n_vehicles > max(target, 1) and time.perf_counter() < deadline:
        work = current.copy()
        k = select_victim(work)
        if k is None:
            break
        removed = sorted({v for r in work.remove_vehicle(k) for v in r})
        pool = EjectionPool(removed)
        pool.reset_penalties(instance.customers)
        _emit(trace, "attempt", victim=k, customers=removed)
        result = insert_pool(instance, work, pool, state, rng, params, deadline,
                             construction, trace)
        if not result.emptied:
            _emit(trace, "abandon", pool=list(pool.stack), **result.stage_counts)
            break
        current = work.prune()
        _emit(trace, "commit", vehicles=current.n_vehicles, **result.stage_counts)
        log.debug("eliminated a vehicle: %d left", current.n_vehicles)
    _emit(trace, "end", vehicles=current.n_vehicles)
    log.debug("elimination finished in %.3fs", time.perf_counter() - start)
    return current
