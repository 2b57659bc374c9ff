"""Instances, solutions and the route schedule evaluator.

Times are held internally as integer deci-minutes and distances as integer
meters, so schedules are exactly reproducible. ``TIME_UNIT`` and
``DISTANCE_UNIT`` convert from the external units (minutes, kilometers).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

TIME_UNIT = 10  # deci-minutes per minute
DISTANCE_UNIT = 1000  # meters per kilometer


class ConVRPTWError(Exception):
    """Base class for solver errors."""


class InstanceError(ConVRPTWError, ValueError):
    """The instance data violates a model invariant."""


class InfeasibleInstanceError(ConVRPTWError):
    """A customer cannot be served even alone in a fresh vehicle."""

    def __init__(self, customer: int, day: int, message: str | None = None):
        self.customer = customer
        self.day = day
        super().__init__(
            message or f"customer {customer} has no feasible route on day {day}"
        )


class ContractError(ConVRPTWError, ValueError):
    """An operation was called with arguments violating its precondition."""


def to_time_units(minutes) -> np.ndarray:
    return np.rint(np.asarray(minutes, dtype=float) * TIME_UNIT).astype(np.int64)


def to_distance_units(km) -> np.ndarray:
    return np.rint(np.asarray(km, dtype=float) * DISTANCE_UNIT).astype(np.int64)


@dataclass(frozen=True, eq=False)
class Instance:
    """A multi-period routing instance; node 0 is the depot.

    ``demand`` has shape ``(n + 1, n_days)``. All time fields are integer
    deci-minutes, distances integer meters. Build from external units with
    :meth:`from_arrays`.
    """

    demand: np.ndarray
    service_time: np.ndarray
    tw_lower: np.ndarray
    tw_upper: np.ndarray
    distance: np.ndarray
    travel_time: np.ndarray
    capacity: float
    horizon_end: int
    name: str = ""
    source: str = ""
    labels: tuple[int, ...] | None = None
    coords: np.ndarray | None = None

    def __post_init__(self):
        demand = np.asarray(self.demand, dtype=float)
        if demand.ndim == 1:
            demand = demand[:, None]
        object.__setattr__(self, "demand", demand)
        for name in ("service_time", "tw_lower", "tw_upper", "distance", "travel_time"):
            arr = np.asarray(getattr(self, name))
            if arr.dtype.kind not in "iu":
                raise InstanceError(f"{name} must hold integer internal units")
            object.__setattr__(self, name, arr.astype(np.int64))
        object.__setattr__(self, "horizon_end", int(self.horizon_end))
        object.__setattr__(self, "capacity", float(self.capacity))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(range(demand.shape[0])))
        else:
            object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        for arr in (demand, self.service_time, self.tw_lower, self.tw_upper,
                    self.distance, self.travel_time):
            arr.setflags(write=False)
        # plain-list mirrors: element access on lists is much faster in loops
        object.__setattr__(self, "_t", self.travel_time.tolist())
        object.__setattr__(self, "_dist", self.distance.tolist())
        object.__setattr__(self, "_s", self.service_time.tolist())
        object.__setattr__(self, "_l", self.tw_lower.tolist())
        object.__setattr__(self, "_u", self.tw_upper.tolist())
        object.__setattr__(self, "_q", demand.tolist())
        validate_instance(self)

    @classmethod
    def from_arrays(
        cls,
        demand,
        service_time,
        time_windows,
        travel_time,
        capacity: float,
        horizon_end: float,
        distance=None,
        **metadata,
    ) -> "Instance":
        """Build an instance from minutes / kilometers.

        ``distance`` defaults to ``travel_time`` read as kilometers.
        """
        tw = np.asarray(time_windows, dtype=float)
        travel_time = np.asarray(travel_time, dtype=float)
        if distance is None:
            distance = travel_time
        return cls(
            demand=np.asarray(demand, dtype=float),
            service_time=to_time_units(service_time),
            tw_lower=to_time_units(tw[:, 0]),
            tw_upper=to_time_units(tw[:, 1]),
            distance=to_distance_units(distance),
            travel_time=to_time_units(travel_time),
            capacity=capacity,
            horizon_end=int(to_time_units(horizon_end)),
            **metadata,
        )

    @property
    def n_customers(self) -> int:
        return self.demand.shape[0] - 1

    @property
    def n_days(self) -> int:
        return self.demand.shape[1]

    @property
    def customers(self) -> range:
        return range(1, self.n_customers + 1)

    def is_active(self, customer: int, day: int) -> bool:
        return self._q[customer][day] > 0

    def active_days(self, customer: int) -> list[int]:
        row = self._q[customer]
        return [d for d in range(self.n_days) if row[d] > 0]

    def active_customers(self, day: int) -> list[int]:
        q = self._q
        return [i for i in self.customers if q[i][day] > 0]

    def index_of(self, label: int) -> int:
        try:
            return self.labels.index(int(label))
        except ValueError:
            raise KeyError(f"no node labelled {label!r} in instance {self.name!r}") from None

    def replace(self, **changes) -> "Instance":
        fields = dict(
            demand=self.demand, service_time=self.service_time,
            tw_lower=self.tw_lower, tw_upper=self.tw_upper,
            distance=self.distance, travel_time=self.travel_time,
            capacity=self.capacity, horizon_end=self.horizon_end,
            name=self.name, source=self.source, labels=self.labels,
            coords=self.coords,
        )
        fields.update(changes)
        return Instance(**fields)


def validate_instance(instance: Instance) -> None:
    """Raise :class:`InstanceError` if a hard invariant is violated."""
    n1 = instance.demand.shape[0]
    if n1 < 1:
        raise InstanceError("instance needs at least the depot node")
    for name in ("service_time", "tw_lower", "tw_upper"):
        if getattr(instance, name).shape != (n1,):
            raise InstanceError(f"{name} must have shape ({n1},)")
    for name in ("distance", "travel_time"):
        arr = getattr(instance, name)
        if arr.shape != (n1, n1):
            raise InstanceError(f"{name} must have shape ({n1}, {n1})")
        if (arr < 0).any():
            raise InstanceError(f"{name} has negative entries")
        if np.diagonal(arr).any():
            raise InstanceError(f"{name} must have a zero diagonal")
    if len(instance.labels) != n1 or len(set(instance.labels)) != n1:
        raise InstanceError("labels must be unique, one per node")
    if instance.capacity <= 0:
        raise InstanceError("capacity must be positive")
    if (instance.demand < 0).any():
        raise InstanceError("demands must be nonnegative")
    if instance.demand[0].any():
        raise InstanceError("the depot cannot have demand")
    over = np.argwhere(instance.demand > instance.capacity)
    if len(over):
        i, d = over[0]
        raise InstanceError(f"demand of customer {i} on day {d} exceeds capacity")
    T = instance.horizon_end
    lo, hi = instance.tw_lower, instance.tw_upper
    if (lo < 0).any() or (lo > hi).any() or (hi > T).any():
        bad = int(np.flatnonzero((lo < 0) | (lo > hi) | (hi > T))[0])
        raise InstanceError(f"time window of node {bad} is not within [0, T]")
    if instance.service_time[0] != 0:
        raise InstanceError("depot service time must be 0")
    if (instance.service_time < 0).any():
        raise InstanceError("service times must be nonnegative")
    if n1 > 1:
        never = np.flatnonzero(~(instance.demand[1:] > 0).any(axis=1))
        if len(never):
            raise InstanceError(f"customer {int(never[0]) + 1} has zero demand on all days")


def triangle_violations(matrix: np.ndarray, tol: int = 0) -> list[tuple[int, int, int]]:
    """Triples ``(i, j, k)`` with ``m[i, k] > m[i, j] + m[j, k] + tol``."""
    m = np.asarray(matrix)
    via = m[:, :, None] + m[None, :, :]  # via[i, j, k] = m[i,j] + m[j,k]
    bad = np.argwhere(m[:, None, :] > via + tol)
    return [(int(i), int(j), int(k)) for i, j, k in bad]


def detours_never_help(instance: Instance) -> bool:
    """Whether ``t[i, j] <= t[i, k] + s[k] + t[k, j]`` for every customer ``k``.

    Then dropping a customer from a feasible route keeps it feasible, so
    route feasibility is monotone under taking subsets.
    """
    t = instance.travel_time.astype(np.int64)
    s = instance.service_time.astype(np.int64)
    via = t[:, 1:, None] + s[None, 1:, None] + t[None, 1:, :]  # via[i, k, j]
    return bool((t <= via.min(axis=1)).all()) if instance.n_customers else True


@dataclass(frozen=True)
class Schedule:
    """Time-warp evaluation of one route on one day."""

    route: tuple[int, ...]
    service_start: tuple[int, ...]
    wait: tuple[int, ...]
    tw_violation: tuple[int, ...]
    load: float
    capacity_excess: float
    return_violation: int
    depot_return_time: int
    travel_time: int
    distance: int

    @property
    def time_warp(self) -> int:
        return sum(self.tw_violation) + self.return_violation

    @property
    def feasible(self) -> bool:
        return self.capacity_excess <= 0 and self.time_warp == 0


@dataclass(frozen=True)
class RouteCost:
    travel_distance: float  # km
    travel_time: float  # minutes


def _check_route(instance: Instance, day: int, route: Sequence[int]) -> None:
    n = instance.n_customers
    if not 0 <= day < instance.n_days:
        raise ContractError(f"day {day} out of range")
    seen = set()
    for v in route:
        if not 1 <= v <= n:
            raise ContractError(f"unknown customer id {v}")
        if v in seen:
            raise ContractError(f"customer {v} appears twice in the route")
        if instance._q[v][day] <= 0:
            raise ContractError(f"customer {v} is inactive on day {day}")
        seen.add(v)


def evaluate_route(instance: Instance, day: int, route: Sequence[int],
                   check: bool = True) -> Schedule:
    """Schedule a route departing the depot at time 0.

    Early arrivals wait for the window to open; late arrivals record the
    excess as violation and continue from the window close.
    """
    if check:
        _check_route(instance, day, route)
    t, dist, s, l, u, q = (instance._t, instance._dist, instance._s,
                           instance._l, instance._u, instance._q)
    starts, waits, viols = [], [], []
    prev, ready, load, tt, dd = 0, 0, 0.0, 0, 0
    for j in route:
        arrival = ready + t[prev][j]
        tt += t[prev][j]
        dd += dist[prev][j]
        w = l[j] - arrival if arrival < l[j] else 0
        start = arrival + w
        if start > u[j]:
            viols.append(start - u[j])
            start = u[j]
        else:
            viols.append(0)
        starts.append(start)
        waits.append(w)
        load += q[j][day]
        ready = start + s[j]
        prev = j
    back = ready + t[prev][0]
    tt += t[prev][0]
    dd += dist[prev][0]
    excess = load - instance.capacity
    return Schedule(
        route=tuple(route),
        service_start=tuple(starts),
        wait=tuple(waits),
        tw_violation=tuple(viols),
        load=load,
        capacity_excess=excess if excess > 0 else 0.0,
        return_violation=max(0, back - instance.horizon_end),
        depot_return_time=back,
        travel_time=tt,
        distance=dd,
    )


def route_cost(instance: Instance, route: Sequence[int]) -> RouteCost:
    if not route:
        return RouteCost(0.0, 0.0)
    t, dist = instance._t, instance._dist
    nodes = [0, *route, 0]
    tt = sum(t[a][b] for a, b in zip(nodes, nodes[1:]))
    dd = sum(dist[a][b] for a, b in zip(nodes, nodes[1:]))
    return RouteCost(dd / DISTANCE_UNIT, tt / TIME_UNIT)


def route_distance(instance: Instance, route: Sequence[int]) -> int:
    if not route:
        return 0
    dist = instance._dist
    total, prev = 0, 0
    for j in route:
        total += dist[prev][j]
        prev = j
    return total + dist[prev][0]


def route_penalty(instance: Instance, day: int, route: Sequence[int]) -> tuple[float, int]:
    """``(capacity excess, time warp)`` of a route; time warp in deci-minutes."""
    if not route:
        return 0.0, 0
    t, s, l, u, q = instance._t, instance._s, instance._l, instance._u, instance._q
    prev, ready, load, warp = 0, 0, 0.0, 0
    for j in route:
        start = ready + t[prev][j]
        if start < l[j]:
            start = l[j]
        elif start > u[j]:
            warp += start - u[j]
            start = u[j]
        load += q[j][day]
        ready = start + s[j]
        prev = j
    back = ready + t[prev][0]
    if back > instance.horizon_end:
        warp += back - instance.horizon_end
    excess = load - instance.capacity
    return (excess if excess > 0 else 0.0), warp


def route_feasible(instance: Instance, day: int, route: Sequence[int]) -> bool:
    excess, warp = route_penalty(instance, day, route)
    return excess == 0 and warp == 0


@dataclass(eq=False)
class Solution:
    """Customer-to-vehicle partition with one ordered route per vehicle and day.

    ``routes[k][d]`` lists the customers vehicle ``k`` visits on day ``d``.
    ``drivers[k]`` is a stable identifier that survives pruning, so
    assignments can be compared between solutions.
    """

    routes: list[list[list[int]]]
    drivers: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.routes = [[list(r) for r in days] for days in self.routes]
        if not self.drivers:
            self.drivers = list(range(len(self.routes)))
        if len(self.drivers) != len(self.routes):
            raise ContractError("one driver id per vehicle is required")

    @classmethod
    def empty(cls) -> "Solution":
        return cls(routes=[], drivers=[])

    @classmethod
    def from_assignment(cls, instance: Instance, vehicles: Iterable[Iterable[int]],
                        drivers: Sequence[int] | None = None) -> "Solution":
        """Routes visiting each vehicle's active customers in id order."""
        routes = []
        for members in vehicles:
            members = sorted(members)
            routes.append([[v for v in members if instance._q[v][d] > 0]
                           for d in range(instance.n_days)])
        return cls(routes=routes, drivers=list(drivers) if drivers else [])

    def copy(self) -> "Solution":
        return Solution(routes=[[list(r) for r in days] for days in self.routes],
                        drivers=list(self.drivers))

    @property
    def n_days(self) -> int:
        return len(self.routes[0]) if self.routes else 0

    def customers_of(self, k: int) -> set[int]:
        out: set[int] = set()
        for r in self.routes[k]:
            out.update(r)
        return out

    @property
    def vehicles(self) -> list[set[int]]:
        return [self.customers_of(k) for k in range(len(self.routes))]

    def assignment(self) -> dict[int, int]:
        """Customer -> vehicle index."""
        out = {}
        for k, days in enumerate(self.routes):
            for r in days:
                for v in r:
                    out[v] = k
        return out

    def driver_assignment(self) -> dict[int, int]:
        return {v: self.drivers[k] for v, k in self.assignment().items()}

    @property
    def n_vehicles(self) -> int:
        return sum(1 for days in self.routes if any(days))

    def visit_count(self, k: int) -> int:
        return sum(len(r) for r in self.routes[k])

    def add_vehicle(self, n_days: int, driver: int | None = None) -> int:
        if driver is None:
            driver = max(self.drivers, default=-1) + 1
        self.routes.append([[] for _ in range(n_days)])
        self.drivers.append(driver)
        return len(self.routes) - 1

    def remove_vehicle(self, k: int) -> list[list[int]]:
        self.drivers.pop(k)
        return self.routes.pop(k)

    def prune(self) -> "Solution":
        """Drop empty vehicles in place."""
        keep = [k for k, days in enumerate(self.routes) if any(days)]
        self.routes = [self.routes[k] for k in keep]
        self.drivers = [self.drivers[k] for k in keep]
        return self

    def insert(self, k: int, v: int, positions: dict[int, int]) -> None:
        for d, p in positions.items():
            self.routes[k][d].insert(p, v)

    def remove(self, k: int, v: int) -> dict[int, int]:
        """Remove ``v`` from every route of ``k``; returns former positions."""
        where = {}
        for d, r in enumerate(self.routes[k]):
            if v in r:
                where[d] = r.index(v)
                r.remove(v)
        return where

    def signature(self) -> tuple:
        return tuple(tuple(tuple(r) for r in days) for days in self.routes), tuple(self.drivers)


def check_solution(instance: Instance, solution: Solution, complete: bool = True) -> None:
    """Structural validation: person consistency and day coverage.

    With ``complete=False`` unassigned customers are allowed (partial plans).
    """
    D = instance.n_days
    owner: dict[int, int] = {}
    for k, days in enumerate(solution.routes):
        if len(days) != D:
            raise ContractError(f"vehicle {k} has {len(days)} day routes, expected {D}")
        members = solution.customers_of(k)
        for v in members:
            if not 1 <= v <= instance.n_customers:
                raise ContractError(f"unknown customer id {v}")
            if v in owner:
                raise ContractError(f"customer {v} is served by vehicles {owner[v]} and {k}")
            owner[v] = k
        for d, r in enumerate(days):
            if len(set(r)) != len(r):
                raise ContractError(f"repeated visit in vehicle {k} day {d}")
            expected = {v for v in members if instance._q[v][d] > 0}
            if set(r) != expected:
                raise ContractError(
                    f"vehicle {k} day {d} must visit exactly its active customers")
    if complete:
        missing = set(instance.customers) - owner.keys()
        if missing:
            raise ContractError(f"customers not assigned: {sorted(missing)}")


@dataclass(frozen=True)
class SolutionMetrics:
    n_vehicles: int
    travel_time: float  # minutes
    distance: float  # km
    visits: int
    late_visits: int
    lateness: float  # minutes
    ptw: float  # percent of visits with a window violation
    ltw: float  # lateness as percent of travel time
    feasible: bool


def evaluate_solution(instance: Instance, solution: Solution,
                      complete: bool = True) -> SolutionMetrics:
    check_solution(instance, solution, complete=complete)
    tt = dist = visits = late = lateness = 0
    feasible = True
    for days in solution.routes:
        for d, r in enumerate(days):
            if not r:
                continue
            sch = evaluate_route(instance, d, r, check=False)
            tt += sch.travel_time
            dist += sch.distance
            visits += len(r)
            late += sum(1 for x in sch.tw_violation if x > 0)
            lateness += sum(sch.tw_violation)
            feasible &= sch.feasible
    return SolutionMetrics(
        n_vehicles=solution.n_vehicles,
        travel_time=tt / TIME_UNIT,
        distance=dist / DISTANCE_UNIT,
        visits=visits,
        late_visits=late,
        lateness=lateness / TIME_UNIT,
        ptw=100.0 * late / visits if visits else 0.0,
        ltw=100.0 * lateness / tt if tt else 0.0,
        feasible=feasible,
    )


@dataclass(frozen=True)
class InsertionCheck:
    schedules: dict[int, Schedule]
    feasible: bool
    capacity_excess: float
    time_warp: int


def check_insertion(instance: Instance, solution: Solution, k: int, v: int,
                    positions: dict[int, int]) -> InsertionCheck:
    """Simulate inserting ``v`` into vehicle ``k`` without mutating anything.

    ``positions`` maps each active day of ``v`` to the index it is inserted
    at in that day's route.
    """
    if v in solution.assignment():
        raise ContractError(f"customer {v} is already assigned")
    days = instance.active_days(v)
    if set(positions) != set(days):
        raise ContractError(f"positions must cover exactly the active days {days}")
    schedules = {}
    for d in days:
        r = solution.routes[k][d]
        p = positions[d]
        if not 0 <= p <= len(r):
            raise ContractError(f"position {p} out of range on day {d}")
        schedules[d] = evaluate_route(instance, d, [*r[:p], v, *r[p:]])
    excess = sum(s.capacity_excess for s in schedules.values())
    warp = sum(s.time_warp for s in schedules.values())
    return InsertionCheck(schedules, all(s.feasible for s in schedules.values()),
                          excess, warp)


def vehicle_lower_bound(instance: Instance) -> int:
    """A valid lower bound on the number of vehicles.

    Maximum of the per-day capacity bound and the size of a largest set of
    customers that pairwise cannot share a vehicle. The second term is only
    used when :func:`detours_never_help`, since otherwise a pair that fails
    alone might still fit together with a third customer in between.
    """
    Q = instance.capacity
    cap = 0
    for d in range(instance.n_days):
        total = float(instance.demand[:, d].sum())
        cap = max(cap, int(np.ceil(total / Q - 1e-9)))
    if not detours_never_help(instance):
        return max(1, cap)
    g = nx.Graph()
    g.add_nodes_from(instance.customers)
    for i, j in itertools.combinations(instance.customers, 2):
        if not pair_compatible(instance, i, j):
            g.add_edge(i, j)
    clique = max((len(c) for c in nx.find_cliques(g)), default=1)
    return max(1, cap, clique)


def pair_compatible(instance: Instance, i: int, j: int) -> bool:
    """Whether customers ``i`` and ``j`` can share one vehicle on all days."""
    for d in range(instance.n_days):
        if instance._q[i][d] > 0 and instance._q[j][d] > 0:
            if not (route_feasible(instance, d, [i, j]) or route_feasible(instance, d, [j, i])):
                return False
    return True
