"""Exact minimum-vehicle search for small instances and an LP-format model export.

The search enumerates customer-to-vehicle partitions with symmetry breaking
(vehicle ``k`` is opened only after vehicle ``k - 1``), by iterative
deepening on the vehicle count. Whether a vehicle's customer set admits a
feasible route on a day is decided by a subset dynamic program over
``(visited set, last customer)`` that keeps the earliest service start; with
waiting allowed and no route-duration limit the earliest start dominates, so
the verdict is exact. Verdicts are memoized per day.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    ConVRPTWError,
    InfeasibleInstanceError,
    Instance,
    Solution,
    detours_never_help,
    evaluate_solution,
    route_feasible,
    vehicle_lower_bound,
)


class OracleLimitError(ConVRPTWError):
    """The instance is beyond the configured size of exhaustive search."""


@dataclass(frozen=True)
class OracleLimits:
    max_customers: int = 12
    max_days: int = 7
    max_nodes: int = 5_000_000
    time_limit: float | None = None  # seconds


@dataclass(frozen=True)
class OracleResult:
    min_vehicles: int
    witness: Solution
    explored_nodes: int
    elapsed: float


def _sequence(instance: Instance, day: int, customers: Sequence[int]) -> list[int] | None:
    """A feasible visiting order of ``customers`` on ``day``, or ``None``."""
    members = sorted(customers)
    if not members:
        return []
    if sum(instance._q[v][day] for v in members) > instance.capacity:
        return None
    t, s, l, u = instance._t, instance._s, instance._l, instance._u
    T = instance.horizon_end
    m = len(members)
    full = (1 << m) - 1
    # best[(mask, i)] = (earliest service start at members[i], predecessor index)
    best: dict[tuple[int, int], tuple[int, int]] = {}
    layer = {}
    for i, v in enumerate(members):
        a = max(l[v], t[0][v])
        if a <= u[v]:
            layer[1 << i, i] = (a, -1)
    best.update(layer)
    for _ in range(m - 1):
        nxt: dict[tuple[int, int], tuple[int, int]] = {}
        for (mask, i), (a, _) in layer.items():
            vi = members[i]
            ready = a + s[vi]
            rest = full & ~mask
            while rest:
                low = rest & -rest
                j = low.bit_length() - 1
                rest ^= low
                vj = members[j]
                b = ready + t[vi][vj]
                if b < l[vj]:
                    b = l[vj]
                if b > u[vj]:
                    continue
                key = (mask | low, j)
                old = nxt.get(key)
                if old is None or b < old[0]:
                    nxt[key] = (b, i)
        best.update(nxt)
        layer = nxt
        if not layer:
            return None
    end = None
    for i, v in enumerate(members):
        entry = best.get((full, i))
        if entry is not None and entry[0] + s[v] + t[v][0] <= T:
            if end is None or entry[0] + s[v] + t[v][0] < end[0]:
                end = (entry[0] + s[v] + t[v][0], i)
    if end is None:
        return None
    order, mask, i = [], full, end[1]
    while i >= 0:
        order.append(members[i])
        prev = best[mask, i][1]
        mask ^= 1 << i
        i = prev
    order.reverse()
    return order


def sequence_route(instance: Instance, day: int, customers: Iterable[int]) -> list[int] | None:
    """Exact search for a feasible route through ``customers`` on ``day``.

    Exponential in the number of customers; intended for at most a dozen.
    """
    route = _sequence(instance, day, list(customers))
    if route is not None:
        assert route_feasible(instance, day, route)
    return route


class RouteOracle:
    """Memoized day-route feasibility verdicts for customer sets."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.cache: list[dict[frozenset, list[int] | None]] = [
            {} for _ in range(instance.n_days)]

    def route(self, day: int, customers: frozenset) -> list[int] | None:
        cache = self.cache[day]
        if customers not in cache:
            cache[customers] = _sequence(self.instance, day, customers)
        return cache[customers]

    def feasible(self, members: Iterable[int]) -> bool:
        members = list(members)
        inst = self.instance
        for d in range(inst.n_days):
            active = frozenset(v for v in members if inst._q[v][d] > 0)
            if active and self.route(d, active) is None:
                return False
        return True

    def capacity_ok(self, members: Iterable[int]) -> bool:
        inst = self.instance
        members = list(members)
        return all(sum(inst._q[v][d] for v in members) <= inst.capacity
                   for d in range(inst.n_days))


def _search_order(instance: Instance) -> list[int]:
    # most constrained first: many active days, large total demand
    return sorted(instance.customers,
                  key=lambda v: (-len(instance.active_days(v)),
                                 -float(instance.demand[v].sum()), v))


def exact_min_vehicles(instance: Instance, limits: OracleLimits = OracleLimits()) -> OracleResult:
    """True minimum number of vehicles, with a feasible witness.

    Raises ``OracleLimitError`` rather than answering when the instance or
    the search exceeds ``limits``, and ``InfeasibleInstanceError`` when some
    customer cannot be served even by a dedicated vehicle.
    """
    start = time.perf_counter()
    n = instance.n_customers
    if n > limits.max_customers:
        raise OracleLimitError(f"{n} customers exceeds the limit of {limits.max_customers}")
    if instance.n_days > limits.max_days:
        raise OracleLimitError(f"{instance.n_days} days exceeds the limit of {limits.max_days}")
    for v in instance.customers:
        for d in instance.active_days(v):
            if not route_feasible(instance, d, [v]):
                raise InfeasibleInstanceError(v, d, f"no feasible route serves customer {instance.labels[v]} on day {d}")
    if n == 0:
        return OracleResult(0, Solution.empty(), 0, time.perf_counter() - start)

    oracle = RouteOracle(instance)
    monotone = detours_never_help(instance)
    order = _search_order(instance)
    nodes = 0

    def check_clock():
        if limits.time_limit is not None and time.perf_counter() - start > limits.time_limit:
            raise OracleLimitError(f"search exceeded {limits.time_limit}s")

    def partial_ok(members):
        # non-monotone metrics only allow capacity pruning until the set is final
        return oracle.feasible(members) if monotone else oracle.capacity_ok(members)

    def search(idx: int, groups: list[list[int]], m: int) -> list[list[int]] | None:
        nonlocal nodes
        nodes += 1
        if nodes > limits.max_nodes:
            raise OracleLimitError(f"search exceeded {limits.max_nodes} nodes")
        if nodes % 4096 == 0:
            check_clock()
        if idx == len(order):
            if monotone or all(oracle.feasible(g) for g in groups):
                return [list(g) for g in groups]
            return None
        v = order[idx]
        for k in range(len(groups)):
            groups[k].append(v)
            if partial_ok(groups[k]):
                found = search(idx + 1, groups, m)
                if found is not None:
                    groups[k].pop()
                    return found
            groups[k].pop()
        if len(groups) < m:
            groups.append([v])
            found = search(idx + 1, groups, m)
            groups.pop()
            if found is not None:
                return found
        return None

    for m in itertools.count(vehicle_lower_bound(instance)):
        groups = search(0, [], m)
        if groups is not None:
            break
    witness = Solution(routes=[[oracle.route(d, frozenset(v for v in g if instance._q[v][d] > 0))
                                if any(instance._q[v][d] > 0 for v in g) else []
                                for d in range(instance.n_days)]
                               for g in sorted(groups, key=min)])
    metrics = evaluate_solution(instance, witness)
    assert metrics.feasible and metrics.n_vehicles == m
    return OracleResult(m, witness, nodes, time.perf_counter() - start)


def _lp_terms(terms: Iterable[tuple[float, str]]) -> str:
    parts = []
    for coef, name in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        mag_text = "" if mag == 1 else f"{_lp_number(mag)} "
        parts.append(f"{sign} {mag_text}{name}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _lp_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def milp_rows(instance: Instance, n_vehicles: int | None = None) -> list[tuple[str, list, str, float]]:
    """Constraint rows ``(name, terms, sense, rhs)`` of the vehicle-minimization model.

    Times are integer deci-minutes and the big-M is the horizon end. The
    waiting term of the start-time equations is handled by the usual
    disjunctive linearization, so only the lower start-time rows are kept.
    """
    inst = instance
    N = range(inst.n_customers + 1)
    C = list(inst.customers)
    D = range(inst.n_days)
    K = range(inst.n_customers if n_vehicles is None else n_vehicles)
    T = inst.horizon_end
    t, s, q = inst._t, inst._s, inst._q
    w = [[1 if q[i][d] > 0 else 0 for d in D] for i in N]
    rows = []
    for i in C:
        for d in D:
            rows.append((f"c2_serve_{i}_{d}", [(1, f"y_{i}_{k}_{d}") for k in K], "=", w[i][d]))
    for k in K:
        for d in D:
            rows.append((f"c3_capacity_{k}_{d}",
                         [(q[i][d], f"y_{i}_{k}_{d}") for i in C if q[i][d] > 0], "<=", inst.capacity))
    for i in C:
        for k in K:
            for d in D:
                rows.append((f"c4_used_{i}_{k}_{d}", [(1, f"z_{k}"), (-1, f"y_{i}_{k}_{d}")], ">=", 0))
    for j in C:
        for k in K:
            for d in D:
                rows.append((f"c5_in_{j}_{k}_{d}",
                             [(1, f"x_{i}_{j}_{k}_{d}") for i in N if i != j] + [(-1, f"y_{j}_{k}_{d}")],
                             "=", 0))
                rows.append((f"c5_out_{j}_{k}_{d}",
                             [(1, f"x_{j}_{i}_{k}_{d}") for i in N if i != j] + [(-1, f"y_{j}_{k}_{d}")],
                             "=", 0))
    for k in K:
        for d in D:
            out = [(1, f"x_0_{j}_{k}_{d}") for j in C]
            back = [(-1, f"x_{i}_0_{k}_{d}") for i in C]
            rows.append((f"c6_depot_flow_{k}_{d}", out + back, "=", 0))
            rows.append((f"c6_depot_used_{k}_{d}", out + [(-1, f"z_{k}")], "<=", 0))
    for i in C:
        for k in K:
            for da, db in itertools.permutations(D, 2):
                rows.append((f"c7_consistency_{i}_{k}_{da}_{db}",
                             [(1, f"y_{i}_{k}_{da}"), (-1, f"y_{i}_{k}_{db}")],
                             ">=", w[i][da] + w[i][db] - 2))
    for i in N:
        for j in C:
            if i == j:
                continue
            for k in K:
                for d in D:
                    rows.append((f"c8_start_{i}_{j}_{k}_{d}",
                                 [(1, f"a_{i}_{d}"), (-1, f"a_{j}_{d}"),
                                  (s[i] + t[i][j] + T, f"x_{i}_{j}_{k}_{d}")], "<=", T))
    for i in C:
        for d in D:
            rows.append((f"c10_return_{i}_{d}", [(1, f"a_{i}_{d}")], "<=",
                         T - (s[i] + t[i][0]) * w[i][d]))
    # a day without active customers leaves capacity rows with no terms
    return [row for row in rows if row[1]]


def export_milp(instance: Instance, path, n_vehicles: int | None = None) -> Path:
    """Write the vehicle-minimization model in LP text format.

    ``n_vehicles`` sizes the fleet (default: one per customer). Variable
    names are ``x_i_j_k_d``, ``y_i_k_d``, ``z_k`` and ``a_i_d``; times are
    in deci-minutes. The depot start time ``a_0_d`` is fixed to 0.
    """
    inst = instance
    N = range(inst.n_customers + 1)
    C = list(inst.customers)
    D = range(inst.n_days)
    K = range(inst.n_customers if n_vehicles is None else n_vehicles)
    q, l, u = inst._q, inst._l, inst._u
    lines = [f"\\ vehicle minimization model for {inst.name or 'instance'}", "Minimize",
             " vehicles: " + _lp_terms((1, f"z_{k}") for k in K), "Subject To"]
    for name, terms, sense, rhs in milp_rows(inst, n_vehicles):
        lines.append(f" {name}: {_lp_terms(terms)} {sense} {_lp_number(rhs)}")
    lines.append("Bounds")
    for d in D:
        lines.append(f" a_0_{d} = 0")
    for i in C:
        for d in D:
            if q[i][d] > 0:
                lines.append(f" {l[i]} <= a_{i}_{d} <= {u[i]}")
            else:
                lines.append(f" a_{i}_{d} = 0")
    lines.append("Binaries")
    names = [f"z_{k}" for k in K]
    names += [f"y_{i}_{k}_{d}" for i in C for k in K for d in D]
    names += [f"x_{i}_{j}_{k}_{d}" for i in N for j in N if i != j for k in K for d in D]
    for chunk in range(0, len(names), 8):
        lines.append(" " + " ".join(names[chunk:chunk + 8]))
    lines.append("End")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
