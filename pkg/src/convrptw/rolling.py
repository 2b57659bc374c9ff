"""Re-planning against a previous customer-to-driver assignment.

``update_solution`` carries a tactical plan over to the next planning
period; ``daily_plan`` routes a single day against a fixed plan. Both match
customers between instances by label, never by index.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .construction import ConstructionParams, best_customer, check_alone, construct, seed_customer
from .elimination import (
    EjectionPool,
    EliminationParams,
    PenaltyState,
    eliminate_routes,
    insert_pool,
    make_rng,
)
from .local_search import DistanceObjective, PenaltyParams, reoptimize, two_opt_intra
from .model import Instance, Solution, route_feasible
from .oracle import sequence_route

log = logging.getLogger(__name__)

EXACT_SEQUENCING_LIMIT = 12
# stage-3 moves spent on a stuck customer before it gets a vehicle of its own;
# each move may reshuffle other customers, so a long search erodes the assignment
INSERTION_BUDGET = 25


def day_instance(instance: Instance, day: int) -> Instance:
    """One day of a multi-day instance, keeping only that day's active customers."""
    keep = [0, *instance.active_customers(day)]
    idx = np.array(keep)
    coords = None if instance.coords is None else instance.coords[idx]
    return Instance(
        demand=instance.demand[idx, day:day + 1],
        service_time=instance.service_time[idx],
        tw_lower=instance.tw_lower[idx],
        tw_upper=instance.tw_upper[idx],
        distance=instance.distance[np.ix_(idx, idx)],
        travel_time=instance.travel_time[np.ix_(idx, idx)],
        capacity=instance.capacity,
        horizon_end=instance.horizon_end,
        name=f"{instance.name}-day{day}",
        source=instance.source,
        labels=[instance.labels[i] for i in keep],
        coords=coords,
    )


def assignment_by_label(instance: Instance, solution: Solution) -> dict[int, int]:
    """Customer label -> driver id."""
    return {instance.labels[v]: d for v, d in solution.driver_assignment().items()}


def changed_drivers(before: Mapping[int, int], after: Mapping[int, int]) -> tuple[int, int]:
    """``(retained, changed)``: customers in both maps, and those whose driver differs."""
    common = before.keys() & after.keys()
    return len(common), sum(1 for c in common if before[c] != after[c])


def _percent(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def build_vehicle(instance: Instance, members, params: ConstructionParams) -> tuple[list[list[int]], list[int]]:
    """Routes for one vehicle's customer set, plus the customers that did not fit.

    Greedy insertion first; on a single day with a small set, an exact
    sequencing search is tried before giving up on anyone.
    """
    members = sorted(members)
    probe = Solution.empty()
    probe.add_vehicle(instance.n_days)
    left = set(members)
    while left:
        if not any(probe.routes[0]):
            seed = seed_customer(instance, left, params.ic)
            left.discard(seed)
            if all(route_feasible(instance, d, [seed]) for d in instance.active_days(seed)):
                probe.insert(0, seed, {d: 0 for d in instance.active_days(seed)})
            continue
        found = best_customer(instance, probe, 0, left, params)
        if found is None:
            break
        v, positions = found
        probe.insert(0, v, positions)
        left.discard(v)
    routes = probe.routes[0]
    rejected = sorted(set(members) - probe.customers_of(0))
    if rejected and instance.n_days == 1 and len(members) <= EXACT_SEQUENCING_LIMIT:
        exact = sequence_route(instance, 0, members)
        if exact is not None:
            return [exact], []
    return routes, rejected


@dataclass
class RollingResult:
    solution: Solution
    retained: int
    changed: int
    new_customers: list[int] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    opened: int = 0

    @property
    def percent_changed(self) -> float:
        return _percent(self.changed, self.retained)


def _carry_over(instance: Instance, previous: Mapping[int, int],
                params: ConstructionParams) -> tuple[Solution, list[int], list[int]]:
    """Rebuild the previous vehicles on the new instance.

    Returns the partial solution, the customers without a vehicle (new ones
    and those that no longer fit), and the previous labels that disappeared.
    """
    present = {instance.labels[v]: v for v in instance.customers}
    groups: dict[int, list[int]] = {}
    for label, driver in previous.items():
        if label in present:
            groups.setdefault(driver, []).append(present[label])
    dropped = sorted(set(previous) - present.keys())
    solution = Solution.empty()
    unassigned = [v for label, v in present.items() if label not in previous]
    for driver in sorted(groups):
        routes, rejected = build_vehicle(instance, groups[driver], params)
        if any(routes):
            k = solution.add_vehicle(instance.n_days, driver)
            solution.routes[k] = routes
        unassigned.extend(rejected)
    return solution, sorted(unassigned), dropped


def _next_driver(solution: Solution, previous: Mapping[int, int]) -> int:
    return max([*previous.values(), *solution.drivers], default=-1) + 1


def _fill(instance: Instance, solution: Solution, customers, state: PenaltyState,
          rng, params: EliminationParams, deadline: float,
          construction: ConstructionParams, trace, next_driver: int) -> int:
    """Insert ``customers`` with the three stages, opening vehicles when stuck.

    Opened vehicles get driver ids from ``next_driver`` upwards. Returns the
    number of vehicles opened.
    """
    # no diversification here: it would move settled customers for distance only
    params = replace(params, max_stage3=min(params.max_stage3, INSERTION_BUDGET),
                     diversify=False)
    pool = EjectionPool(sorted(customers))
    pool.reset_penalties(instance.customers)
    opened = 0
    while len(pool):
        if not any(any(days) for days in solution.routes):
            v = pool.pop()
        else:
            result = insert_pool(instance, solution, pool, state, rng, params, deadline,
                                 construction, trace)
            if result.emptied:
                break
            v = result.blocking
            pool.stack.remove(v)
        check_alone(instance, v)
        k = solution.add_vehicle(instance.n_days, next_driver + opened)
        solution.insert(k, v, {d: 0 for d in instance.active_days(v)})
        opened += 1
        log.debug("opened vehicle %d for customer %d", solution.drivers[k], v)
    return opened


def update_solution(instance: Instance, previous: Mapping[int, int],
                    params: EliminationParams = EliminationParams(),
                    construction: ConstructionParams = ConstructionParams(),
                    penalty_params: PenaltyParams = PenaltyParams(),
                    trace: list | None = None) -> RollingResult:
    """Plan a new period starting from the previous label -> driver map.

    Customers keep their driver where the rebuilt route allows it; the rest
    and all new customers go through the insertion stages, then vehicles are
    eliminated within what remains of ``ct_max``.
    """
    start = time.perf_counter()
    deadline = start + params.ct_max
    present = {instance.labels[v] for v in instance.customers}
    if not present & previous.keys():
        log.warning("no customer of the previous plan appears in %s; solving from scratch",
                    instance.name or "the new instance")
        solution = construct(instance, construction)
        solution = eliminate_routes(instance, solution, params, construction, penalty_params,
                                    trace, deadline)
        reoptimize(instance, solution)
        return RollingResult(solution, 0, 0, sorted(present), sorted(previous))
    solution, unassigned, dropped = _carry_over(instance, previous, construction)
    new = sorted(instance.labels[v] for v in instance.customers
                 if instance.labels[v] not in previous)
    rng = make_rng(params.rng_seed, params.stream)
    state = PenaltyState(penalty_params.alpha, penalty_params)
    opened = _fill(instance, solution, unassigned, state, rng, params, deadline,
                   construction, trace, _next_driver(solution, previous))
    solution = eliminate_routes(instance, solution, params, construction, penalty_params,
                                trace, deadline)
    # route polishing only; relocations would trade driver changes for distance
    two_opt_intra(instance, solution, DistanceObjective())
    retained, changed = changed_drivers(previous, assignment_by_label(instance, solution))
    return RollingResult(solution, retained, changed, new, dropped, opened)


def day_inconsistency(base: Mapping[int, int], plan: Mapping[int, int]) -> tuple[int, int]:
    """``(visits, off_assignment)`` over the day's customers present in ``base``."""
    return changed_drivers(base, plan)


def daily_plan(instance: Instance, base: Mapping[int, int],
               params: EliminationParams = EliminationParams(),
               construction: ConstructionParams = ConstructionParams(),
               penalty_params: PenaltyParams = PenaltyParams(),
               trace: list | None = None) -> RollingResult:
    """Route one day against a fixed label -> driver assignment.

    Each driver's active customers are routed on their own; customers that
    cannot be, and customers unknown to ``base``, are reinserted by the
    insertion stages. No vehicle elimination is run, so a day on which
    every driver's customers fit keeps the assignment exactly.
    """
    if instance.n_days != 1:
        raise ValueError(f"a daily plan needs a one-day instance, got {instance.n_days} days")
    deadline = time.perf_counter() + params.ct_max
    solution, unassigned, dropped = _carry_over(instance, base, construction)
    new = sorted(instance.labels[v] for v in instance.customers
                 if instance.labels[v] not in base)
    rng = make_rng(params.rng_seed, params.stream)
    state = PenaltyState(penalty_params.alpha, penalty_params)
    opened = _fill(instance, solution, unassigned, state, rng, params, deadline,
                   construction, trace, _next_driver(solution, base))
    visits, off = day_inconsistency(base, assignment_by_label(instance, solution))
    return RollingResult(solution, visits, off, new, dropped, opened)
