"""Sequential insertion construction, extended to multi-day vehicles.

A vehicle is grown one customer at a time; inserting a customer means
inserting it into the vehicle's route on every day the customer is active.
With a single day this is the classic one-period insertion heuristic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    DISTANCE_UNIT,
    TIME_UNIT,
    InfeasibleInstanceError,
    Instance,
    Solution,
    route_feasible,
)


@dataclass(frozen=True)
class ConstructionParams:
    ic: int = 1
    mu: float = 1.0
    lam: float = 2.0
    alpha1: float = 0.5
    alpha2: float = 0.5

    def __post_init__(self):
        if self.ic not in (1, 2):
            raise ValueError("ic must be 1 (farthest) or 2 (earliest deadline)")
        if self.mu < 0 or self.lam < 0:
            raise ValueError("mu and lam must be nonnegative")
        if self.alpha1 < 0 or self.alpha2 < 0 or abs(self.alpha1 + self.alpha2 - 1) > 1e-9:
            raise ValueError("alpha1 and alpha2 must be nonnegative and sum to 1")


def seed_customer(instance: Instance, unrouted: Iterable[int], ic: int = 1) -> int:
    """Farthest customer from the depot (ic=1) or earliest window close (ic=2)."""
    pool = sorted(unrouted)
    if not pool:
        raise ValueError("no unrouted customers")
    if ic == 1:
        dist = instance._dist[0]
        return min(pool, key=lambda v: (-dist[v], v))
    u = instance._u
    return min(pool, key=lambda v: (u[v], v))


@dataclass
class RouteTimes:
    """Earliest and latest feasible service starts along a feasible route."""

    route: Sequence[int]
    earliest: list[int]
    latest: list[int]
    load: float
    return_time: int


def route_times(instance: Instance, day: int, route: Sequence[int]) -> RouteTimes | None:
    """``None`` if the route itself is infeasible."""
    t, s, l, u, q = instance._t, instance._s, instance._l, instance._u, instance._q
    T = instance.horizon_end
    earliest = []
    prev, ready, load = 0, 0, 0.0
    for j in route:
        a = ready + t[prev][j]
        if a < l[j]:
            a = l[j]
        if a > u[j]:
            return None
        earliest.append(a)
        load += q[j][day]
        ready = a + s[j]
        prev = j
    back = ready + t[prev][0]
    if back > T or load > instance.capacity:
        return None
    latest = [0] * len(route)
    nxt_latest, nxt = T, 0
    for idx in range(len(route) - 1, -1, -1):
        j = route[idx]
        z = nxt_latest - s[j] - t[j][nxt]
        if z > u[j]:
            z = u[j]
        latest[idx] = z
        nxt_latest, nxt = z, j
    return RouteTimes(route, earliest, latest, load, back)


def slot_check(instance: Instance, day: int, times: RouteTimes, v: int,
               p: int) -> tuple[int, int, int] | None:
    """``(predecessor, successor, push_forward)`` for inserting ``v`` at ``p``.

    The successor is 0 when ``v`` goes last; its push-forward is then the
    delay of the depot return. ``None`` when capacity or a window breaks.
    """
    if times.load + instance._q[v][day] > instance.capacity:
        return None
    t, s, l, u = instance._t, instance._s, instance._l, instance._u
    route = times.route
    if p == 0:
        prev, ready = 0, 0
    else:
        prev = route[p - 1]
        ready = times.earliest[p - 1] + s[prev]
    a_v = ready + t[prev][v]
    if a_v < l[v]:
        a_v = l[v]
    if a_v > u[v]:
        return None
    if p == len(route):
        new = a_v + s[v] + t[v][0]
        if new > instance.horizon_end:
            return None
        return prev, 0, new - times.return_time
    nxt = route[p]
    new = a_v + s[v] + t[v][nxt]
    if new < l[nxt]:
        new = l[nxt]
    if new > times.latest[p]:
        return None
    return prev, nxt, new - times.earliest[p]


def insertion_cost(instance: Instance, day: int, times: RouteTimes, v: int, p: int,
                   params: ConstructionParams) -> float | None:
    """Weighted detour/push-forward cost of inserting ``v`` at index ``p``.

    ``None`` when the insertion breaks capacity or any time window.
    """
    slot = slot_check(instance, day, times, v, p)
    if slot is None:
        return None
    prev, nxt, push = slot
    dist = instance._dist
    detour = dist[prev][v] + dist[v][nxt] - params.mu * dist[prev][nxt]
    return (params.alpha1 * detour / DISTANCE_UNIT
            + params.alpha2 * push / TIME_UNIT)


def best_route_position(instance: Instance, day: int, route: Sequence[int], v: int,
                        params: ConstructionParams) -> tuple[int, float] | None:
    times = route_times(instance, day, route)
    if times is None:
        return None
    best = None
    for p in range(len(route) + 1):
        c = insertion_cost(instance, day, times, v, p, params)
        if c is not None and (best is None or c < best[1]):
            best = (p, c)
    return best


def best_position(instance: Instance, solution: Solution, k: int, d: int, v: int,
                  params: ConstructionParams = ConstructionParams()) -> tuple[int, float] | None:
    """Cheapest feasible slot for ``v`` in vehicle ``k``'s route on day ``d``."""
    return best_route_position(instance, d, solution.routes[k][d], v, params)


def best_vehicle_insertion(instance: Instance, solution: Solution, k: int, v: int,
                           params: ConstructionParams) -> tuple[dict[int, int], dict[int, float]] | None:
    """Per-day best slots and costs for ``v`` in vehicle ``k``, if feasible every day."""
    positions, costs = {}, {}
    for d in instance.active_days(v):
        best = best_route_position(instance, d, solution.routes[k][d], v, params)
        if best is None:
            return None
        positions[d], costs[d] = best
    return positions, costs


def customer_score(instance: Instance, costs: dict[int, float], v: int,
                   params: ConstructionParams) -> float:
    """Average over active days of the insertion cost minus the direct-trip saving."""
    direct = params.lam * instance._dist[0][v] / DISTANCE_UNIT
    return sum(c - direct for c in costs.values()) / len(costs)


def best_customer(instance: Instance, solution: Solution, k: int, unrouted: Iterable[int],
                  params: ConstructionParams = ConstructionParams()
                  ) -> tuple[int, dict[int, int]] | None:
    """The unrouted customer with the lowest score feasible for vehicle ``k``."""
    best = None
    for v in sorted(unrouted):
        found = best_vehicle_insertion(instance, solution, k, v, params)
        if found is None:
            continue
        positions, costs = found
        score = customer_score(instance, costs, v, params)
        if best is None or score < best[0]:
            best = (score, v, positions)
    if best is None:
        return None
    return best[1], best[2]


def check_alone(instance: Instance, v: int) -> None:
    for d in instance.active_days(v):
        if not route_feasible(instance, d, [v]):
            raise InfeasibleInstanceError(
                v, d, f"customer {instance.labels[v]} has no feasible route on day {d}")


def construct(instance: Instance, params: ConstructionParams = ConstructionParams()) -> Solution:
    """Build a feasible plan vehicle by vehicle; closed vehicles are never revisited."""
    solution = Solution.empty()
    unrouted = set(instance.customers)
    D = instance.n_days
    while unrouted:
        seed = seed_customer(instance, unrouted, params.ic)
        check_alone(instance, seed)
        k = solution.add_vehicle(D)
        solution.insert(k, seed, {d: 0 for d in instance.active_days(seed)})
        unrouted.discard(seed)
        while unrouted:
            found = best_customer(instance, solution, k, unrouted, params)
            if found is None:
                break
            v, positions = found
            solution.insert(k, v, positions)
            unrouted.discard(v)
    return solution
