"""Penalty function and descent operators over a multi-day plan.

Two objectives are supported: total distance restricted to feasible moves,
and the penalized infeasibility ``F_p = P_c + alpha * P_tw``. Operators
mutate the solution in place and return the number of moves applied.
Relocation moves a customer together with all of its day visits.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .construction import route_times, slot_check
from .model import TIME_UNIT, Instance, Solution, route_distance, route_penalty

EPS = 1e-9


@dataclass(frozen=True)
class PenaltyParams:
    alpha: float = 1.0
    adaptation_factor: float = 0.99
    alpha_min: float = 1e-3
    alpha_max: float = 1e3

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.adaptation_factor < 1:
            raise ValueError("adaptation_factor must be in (0, 1)")


@dataclass(frozen=True)
class PenaltyBreakdown:
    capacity: float  # P_c, quantity units
    time_warp: float  # P_tw, minutes
    alpha: float

    @property
    def value(self) -> float:
        return self.capacity + self.alpha * self.time_warp

    @property
    def feasible(self) -> bool:
        return self.capacity == 0 and self.time_warp == 0


def penalty(instance: Instance, solution: Solution, alpha: float = 1.0) -> PenaltyBreakdown:
    pc, warp = 0.0, 0
    for days in solution.routes:
        for d, r in enumerate(days):
            if r:
                c, w = route_penalty(instance, d, r)
                pc += c
                warp += w
    return PenaltyBreakdown(pc, warp / TIME_UNIT, alpha)


def adapt_alpha(breakdown: PenaltyBreakdown, alpha: float,
                params: PenaltyParams = PenaltyParams()) -> float:
    if breakdown.capacity < breakdown.time_warp:
        alpha = alpha / params.adaptation_factor
    else:
        alpha = alpha * params.adaptation_factor
    return min(params.alpha_max, max(params.alpha_min, alpha))


class DistanceObjective:
    """Total distance; only moves that keep every touched route feasible."""

    feasible_only = True

    def route_value(self, instance: Instance, day: int, route: Sequence[int]) -> float:
        return route_distance(instance, route)

    def admissible(self, instance: Instance, day: int, route: Sequence[int]) -> bool:
        c, w = route_penalty(instance, day, route)
        return c == 0 and w == 0

    def best_insertion(self, instance, day, route, v):
        """Cheapest feasible slot; ``(position, value of the new route)``."""
        times = route_times(instance, day, route)
        if times is None:
            return None
        dist = instance._dist
        base = route_distance(instance, route)
        best = None
        for p in range(len(route) + 1):
            slot = slot_check(instance, day, times, v, p)
            if slot is None:
                continue
            prev, nxt, _ = slot
            delta = dist[prev][v] + dist[v][nxt] - dist[prev][nxt]
            if best is None or delta < best[1]:
                best = (p, delta)
        if best is None:
            return None
        return best[0], base + best[1]


class PenaltyObjective:
    """``P_c + alpha * P_tw`` with time warp in minutes; every move admissible."""

    feasible_only = False

    def __init__(self, alpha: float):
        self.alpha = alpha

    def route_value(self, instance: Instance, day: int, route: Sequence[int]) -> float:
        if not route:
            return 0.0
        c, w = route_penalty(instance, day, route)
        return c + self.alpha * w / TIME_UNIT

    def admissible(self, instance, day, route) -> bool:
        return True

    def best_insertion(self, instance, day, route, v):
        best = None
        for p in range(len(route) + 1):
            val = self.route_value(instance, day, [*route[:p], v, *route[p:]])
            if best is None or val < best[1] - EPS:
                best = (p, val)
        return best


def two_opt_route(instance: Instance, day: int, route: list[int], objective) -> int:
    """Best-improvement segment reversal on one route, to a local optimum."""
    moves = 0
    current = objective.route_value(instance, day, route)
    m = len(route)
    while m > 1:
        best = None
        for i in range(m - 1):
            for j in range(i + 1, m):
                cand = route[:i] + route[i:j + 1][::-1] + route[j + 1:]
                if objective.feasible_only and not objective.admissible(instance, day, cand):
                    continue
                val = objective.route_value(instance, day, cand)
                if val < current - EPS and (best is None or val < best[0] - EPS):
                    best = (val, cand)
        if best is None:
            break
        current, route[:] = best[0], best[1]
        moves += 1
    return moves


def two_opt_intra(instance: Instance, solution: Solution, objective=None) -> int:
    objective = objective or DistanceObjective()
    moves = 0
    for days in solution.routes:
        for d, r in enumerate(days):
            moves += two_opt_route(instance, d, r, objective)
    return moves


def best_relocation(instance: Instance, solution: Solution, objective,
                    allow_emptying: bool = True):
    """The most improving single relocation, or ``None``.

    Returns ``(gain, v, source, target, positions)``.
    """
    routes = solution.routes
    value = {}
    for k, days in enumerate(routes):
        for d, r in enumerate(days):
            value[k, d] = objective.route_value(instance, d, r) if r else 0.0
    nonempty = [k for k, days in enumerate(routes) if any(days)]
    best = None
    for a in nonempty:
        members = sorted(solution.customers_of(a))
        if not allow_emptying and len(members) == 1:
            continue
        for v in members:
            days = instance.active_days(v)
            removal = 0.0
            ok = True
            for d in days:
                rest = [x for x in routes[a][d] if x != v]
                if rest and objective.feasible_only and not objective.admissible(instance, d, rest):
                    ok = False
                    break
                removal += (objective.route_value(instance, d, rest) if rest else 0.0) - value[a, d]
            if not ok:
                continue
            for b in nonempty:
                if b == a:
                    continue
                gain = -removal
                positions = {}
                for d in days:
                    found = objective.best_insertion(instance, d, routes[b][d], v)
                    if found is None:
                        break
                    positions[d] = found[0]
                    gain -= found[1] - value[b, d]
                else:
                    if gain > EPS and (best is None or gain > best[0] + EPS):
                        best = (gain, v, a, b, positions)
    return best


def relocate_inter(instance: Instance, solution: Solution, objective=None,
                   allow_emptying: bool = True, max_moves: int | None = None) -> int:
    """Best-improvement inter-vehicle relocation until no move improves."""
    objective = objective or DistanceObjective()
    moves = 0
    while max_moves is None or moves < max_moves:
        best = best_relocation(instance, solution, objective, allow_emptying)
        if best is None:
            break
        _, v, a, b, positions = best
        solution.remove(a, v)
        solution.insert(b, v, positions)
        moves += 1
    return moves


def descend(instance: Instance, solution: Solution, objective,
            allow_emptying: bool = True, max_rounds: int = 1000) -> int:
    """Alternate 2-opt and relocation until neither improves."""
    total = 0
    for _ in range(max_rounds):
        moves = two_opt_intra(instance, solution, objective)
        moves += relocate_inter(instance, solution, objective, allow_emptying)
        total += moves
        if moves == 0:
            break
    return total


def restore_feasibility(instance: Instance, solution: Solution, alpha: float,
                        budget: int = 1000) -> tuple[Solution, bool]:
    """Hill-climb on ``F_p`` with 2-opt and relocation.

    Mutates ``solution``; on failure it holds the lowest-penalty state reached.
    """
    objective = PenaltyObjective(alpha)
    moves = 0
    while moves < budget:
        if penalty(instance, solution, alpha).feasible:
            return solution, True
        step = two_opt_intra(instance, solution, objective)
        # a single relocation per round so 2-opt can repair the routes it touches
        step += relocate_inter(instance, solution, objective, max_moves=1)
        moves += step
        if step == 0:
            break
    return solution, penalty(instance, solution, alpha).feasible


def reoptimize(instance: Instance, solution: Solution) -> Solution:
    """Distance descent that keeps every vehicle in use."""
    descend(instance, solution, DistanceObjective(), allow_emptying=False)
    return solution


def total_distance(instance: Instance, solution: Solution) -> int:
    return sum(route_distance(instance, r) for days in solution.routes for r in days)
