"""Solomon benchmark parsing, small-instance generation and native file formats.

The native instance and solution documents are JSON with sorted keys and a
``format``/``version`` header; see ``docs/formats.md`` for the field list.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (
    DISTANCE_UNIT,
    TIME_UNIT,
    ConVRPTWError,
    Instance,
    InstanceError,
    Solution,
    check_solution,
    to_distance_units,
    to_time_units,
    triangle_violations,
)

INSTANCE_FORMAT = "convrptw-instance"
SOLUTION_FORMAT = "convrptw-solution"
FORMAT_VERSION = 1


class ParseError(ConVRPTWError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TriangleWarning(UserWarning):
    """A loaded matrix has shortcuts through a third node."""


class SchemaError(ConVRPTWError, ValueError):
    """A native document is missing a field or has a wrong type."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class SolomonCustomer:
    id: int
    x: float
    y: float
    demand: float
    ready_time: float
    due_date: float
    service_time: float


@dataclass(frozen=True)
class SolomonInstance:
    name: str
    capacity: float
    vehicle_count: int
    depot: SolomonCustomer
    customers: tuple[SolomonCustomer, ...]


def _numbers(line: str, lineno: int, count: int) -> list[float]:
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"expected {count} fields, found {len(parts)}", lineno)
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"non-numeric field ({exc})", lineno) from None
    if not all(math.isfinite(v) for v in values):
        raise ParseError("non-finite value", lineno)
    return values


def parse_solomon(text: str) -> SolomonInstance:
    lines = text.splitlines()
    content = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not content:
        raise ParseError("empty file")
    name = content[0][1]
    pos = 1

    def expect(keyword: str) -> None:
        nonlocal pos
        if pos >= len(content) or not content[pos][1].upper().startswith(keyword):
            where = content[pos][0] if pos < len(content) else len(lines)
            raise ParseError(f"expected {keyword!r} section", where)
        pos += 1

    expect("VEHICLE")
    expect("NUMBER")
    if pos >= len(content):
        raise ParseError("missing vehicle data", len(lines))
    lineno, row = content[pos]
    number, capacity = _numbers(row, lineno, 2)
    pos += 1
    expect("CUSTOMER")
    expect("CUST")
    records = []
    for lineno, row in content[pos:]:
        vals = _numbers(row, lineno, 7)
        if vals[3] < 0:
            raise ParseError("negative demand", lineno)
        records.append(SolomonCustomer(int(vals[0]), *vals[1:]))
    if not records:
        raise ParseError("no customer records", len(lines))
    if records[0].id != 0:
        raise ParseError("first record must be the depot (id 0)", content[pos][0])
    return SolomonInstance(name=name, capacity=capacity, vehicle_count=int(number),
                           depot=records[0], customers=tuple(records[1:]))


def read_solomon(path) -> SolomonInstance:
    return parse_solomon(Path(path).read_text())


def bundled_solomon_names() -> list[str]:
    root = resources.files("convrptw") / "data" / "solomon"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt"))


def load_bundled_solomon(name: str) -> SolomonInstance:
    """One of the 56 classic 100-customer instances shipped with the package."""
    root = resources.files("convrptw") / "data" / "solomon"
    path = root / f"{name.upper()}.txt"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled Solomon instance {name!r}")
    return parse_solomon(path.read_text())


def solomon_class(name: str) -> str:
    """``'RC105'`` -> ``'RC1'``."""
    letters = name.rstrip("0123456789")
    digits = name[len(letters):]
    return (letters + digits[:1]).upper()


@dataclass(frozen=True)
class GeneratorConfig:
    customer_count: int = 10
    day_count: int = 5
    activity_probability: float = 0.7
    capacity_factor: float = 0.5
    rng_seed: int = 0
    customer_offset: int = 0  # skip this many customers of the source file

    def __post_init__(self):
        if self.customer_offset < 0:
            raise ValueError("customer_offset must be nonnegative")
        if not 0 < self.activity_probability <= 1:
            raise ValueError("activity_probability must be in (0, 1]")
        if self.customer_count < 1:
            raise ValueError("customer_count must be at least 1")
        if self.day_count < 1:
            raise ValueError("day_count must be at least 1")
        if self.capacity_factor <= 0:
            raise ValueError("capacity_factor must be positive")


def truncated_euclidean(xy: np.ndarray) -> np.ndarray:
    """Euclidean distances truncated to one decimal, as integer tenths."""
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    # guard against sqrt landing a hair below an exact tenth
    return np.floor(d * 10 + 1e-9).astype(np.int64)


def generate_convrptw(solomon: SolomonInstance, config: GeneratorConfig = GeneratorConfig()) -> Instance:
    """Multi-period instance from consecutive customers of a Solomon instance.

    The customers taken are ``customer_offset + 1 .. customer_offset + customer_count``
    in file order. Customers keep demand, coordinates, windows and service time; each is
    active on each day independently with ``activity_probability``, and a
    customer drawn inactive on every day gets one uniformly chosen day.
    """
    n, first = config.customer_count, config.customer_offset
    if first + n > len(solomon.customers):
        raise ValueError(f"{solomon.name} has only {len(solomon.customers)} customers, "
                         f"{first + n} requested")
    nodes = [solomon.depot, *solomon.customers[first:first + n]]
    rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed))
    active = rng.random((n, config.day_count)) < config.activity_probability
    forced = rng.integers(0, config.day_count, size=n)
    for i in range(n):
        if not active[i].any():
            active[i, forced[i]] = True
    base = np.array([c.demand for c in nodes[1:]], dtype=float)
    demand = np.zeros((n + 1, config.day_count))
    demand[1:] = np.where(active, base[:, None], 0.0)
    capacity = solomon.capacity * config.capacity_factor
    if (base > capacity).any():
        bad = nodes[1 + int(np.argmax(base > capacity))]
        raise InstanceError(f"customer {bad.id} demand {bad.demand} exceeds the reduced "
                            f"capacity {capacity}; raise capacity_factor")
    xy = np.array([(c.x, c.y) for c in nodes], dtype=float)
    tenths = truncated_euclidean(xy)
    return Instance(
        demand=demand,
        service_time=to_time_units([c.service_time for c in nodes]),
        tw_lower=to_time_units([c.ready_time for c in nodes]),
        tw_upper=to_time_units([c.due_date for c in nodes]),
        distance=tenths * (DISTANCE_UNIT // 10),
        travel_time=tenths * (TIME_UNIT // 10),
        capacity=capacity,
        horizon_end=int(to_time_units(solomon.depot.due_date)),
        name=f"{solomon.name}-n{n}-d{config.day_count}-s{config.rng_seed}"
             + (f"-o{first}" if first else ""),
        source=f"solomon:{solomon.name}",
        labels=[c.id for c in nodes],
        coords=xy,
    )


# -- native documents ---------------------------------------------------------

def _num(x: float):
    """Render integral floats as ints so documents are canonical."""
    x = float(x)
    return int(x) if x.is_integer() else x


def instance_to_dict(instance: Instance) -> dict:
    nodes = []
    for i in range(instance.n_customers + 1):
        node = {
            "label": instance.labels[i],
            "service_time": _num(instance.service_time[i] / TIME_UNIT),
            "time_window": [_num(instance.tw_lower[i] / TIME_UNIT),
                            _num(instance.tw_upper[i] / TIME_UNIT)],
            "demand": [_num(q) for q in instance.demand[i]],
        }
        if instance.coords is not None:
            node["xy"] = [_num(c) for c in instance.coords[i]]
        nodes.append(node)
    return {
        "format": INSTANCE_FORMAT,
        "version": FORMAT_VERSION,
        "name": instance.name,
        "source": instance.source,
        "capacity": _num(instance.capacity),
        "horizon_end": _num(instance.horizon_end / TIME_UNIT),
        "day_count": instance.n_days,
        "nodes": nodes,
        "distance_km": [[_num(x / DISTANCE_UNIT) for x in row] for row in instance.distance],
        "travel_time_min": [[_num(x / TIME_UNIT) for x in row] for row in instance.travel_time],
    }


def _get(doc: dict, key: str, kind, path: str):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field")
    value = doc[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise SchemaError(f"{path}.{key}" if path else key,
                          f"expected {getattr(kind, '__name__', kind)}")
    return value


def instance_from_dict(doc: dict) -> Instance:
    if _get(doc, "format", str, "") != INSTANCE_FORMAT:
        raise SchemaError("format", f"expected {INSTANCE_FORMAT!r}")
    if _get(doc, "version", int, "") != FORMAT_VERSION:
        raise SchemaError("version", f"unsupported version {doc['version']}")
    D = _get(doc, "day_count", int, "")
    nodes = _get(doc, "nodes", list, "")
    n1 = len(nodes)
    labels, service, lo, hi, demand, coords = [], [], [], [], [], []
    for i, node in enumerate(nodes):
        p = f"nodes[{i}]"
        labels.append(_get(node, "label", int, p))
        service.append(_get(node, "service_time", float, p))
        tw = _get(node, "time_window", list, p)
        if len(tw) != 2:
            raise SchemaError(f"{p}.time_window", "expected [lower, upper]")
        lo.append(tw[0])
        hi.append(tw[1])
        q = _get(node, "demand", list, p)
        if len(q) != D:
            raise SchemaError(f"{p}.demand", f"expected {D} daily values")
        demand.append(q)
        if "xy" in node:
            coords.append(node["xy"])
    dist = np.asarray(_get(doc, "distance_km", list, ""), dtype=float)
    tt = np.asarray(_get(doc, "travel_time_min", list, ""), dtype=float)
    for key, m in (("distance_km", dist), ("travel_time_min", tt)):
        if m.shape != (n1, n1):
            raise SchemaError(key, f"expected a {n1}x{n1} matrix")
    return Instance(
        demand=np.asarray(demand, dtype=float).reshape(n1, D),
        service_time=to_time_units(service),
        tw_lower=to_time_units(lo),
        tw_upper=to_time_units(hi),
        distance=to_distance_units(dist),
        travel_time=to_time_units(tt),
        capacity=_get(doc, "capacity", float, ""),
        horizon_end=int(to_time_units(_get(doc, "horizon_end", float, ""))),
        name=_get(doc, "name", str, ""),
        source=doc.get("source", ""),
        labels=labels,
        coords=np.asarray(coords, dtype=float) if len(coords) == n1 else None,
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_instance(instance: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(instance)))


def read_instance(path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), exc.lineno) from None
    return instance_from_dict(doc)


def solution_to_dict(instance: Instance, solution: Solution, **extra) -> dict:
    lab = instance.labels
    vehicles = []
    for k, days in enumerate(solution.routes):
        vehicles.append({
            "driver": solution.drivers[k],
            "customers": sorted(lab[v] for v in solution.customers_of(k)),
            "routes": [[lab[v] for v in r] for r in days],
        })
    doc = {
        "format": SOLUTION_FORMAT,
        "version": FORMAT_VERSION,
        "instance": instance.name,
        "day_count": instance.n_days,
        "vehicles": vehicles,
    }
    doc.update(extra)
    return doc


def solution_from_dict(doc: dict, instance: Instance, complete: bool = True) -> Solution:
    if _get(doc, "format", str, "") != SOLUTION_FORMAT:
        raise SchemaError("format", f"expected {SOLUTION_FORMAT!r}")
    if _get(doc, "version", int, "") != FORMAT_VERSION:
        raise SchemaError("version", f"unsupported version {doc['version']}")
    routes, drivers = [], []
    for k, veh in enumerate(_get(doc, "vehicles", list, "")):
        p = f"vehicles[{k}]"
        drivers.append(_get(veh, "driver", int, p))
        days = _get(veh, "routes", list, p)
        if len(days) != instance.n_days:
            raise SchemaError(f"{p}.routes", f"expected {instance.n_days} day routes")
        try:
            routes.append([[instance.index_of(x) for x in r] for r in days])
        except KeyError as exc:
            raise SchemaError(f"{p}.routes", str(exc)) from None
    sol = Solution(routes=routes, drivers=drivers)
    check_solution(instance, sol, complete=complete)
    return sol


def write_solution(instance: Instance, solution: Solution, path, **extra) -> None:
    Path(path).write_text(dumps(solution_to_dict(instance, solution, **extra)))


def read_solution_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), exc.lineno) from None


def read_solution(path, instance: Instance) -> Solution:
    return solution_from_dict(read_solution_document(path), instance)


def driver_map(doc: dict) -> dict[int, int]:
    """Customer label -> driver id, from a solution document alone."""
    if _get(doc, "format", str, "") != SOLUTION_FORMAT:
        raise SchemaError("format", f"expected {SOLUTION_FORMAT!r}")
    out: dict[int, int] = {}
    for k, veh in enumerate(_get(doc, "vehicles", list, "")):
        p = f"vehicles[{k}]"
        driver = _get(veh, "driver", int, p)
        for label in _get(veh, "customers", list, p):
            if label in out:
                raise SchemaError(f"{p}.customers", f"customer {label} appears in two vehicles")
            out[int(label)] = driver
    return out


def read_matrix(path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.split()])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ParseError(f"{path}: matrix is not square")
    return np.asarray(rows)


def load_matrices(instance: Instance, distance_path, time_path) -> Instance:
    """Replace the instance matrices by whitespace-separated files.

    Distances are read in kilometers, travel times in minutes.
    """
    dist = read_matrix(distance_path)
    tt = read_matrix(time_path)
    return with_matrices(instance, dist, tt)


def with_matrices(instance: Instance, distance_km, travel_time_min) -> Instance:
    dist = np.asarray(distance_km, dtype=float)
    tt = np.asarray(travel_time_min, dtype=float)
    n1 = instance.n_customers + 1
    for name, m in (("distance", dist), ("travel time", tt)):
        if m.shape != (n1, n1):
            raise InstanceError(f"{name} matrix is {m.shape}, instance needs ({n1}, {n1})")
        if (m < 0).any():
            raise InstanceError(f"{name} matrix has negative entries")
    out = instance.replace(distance=to_distance_units(dist), travel_time=to_time_units(tt))
    for name, m in (("distance", out.distance), ("travel time", out.travel_time)):
        bad = triangle_violations(m)
        if bad:
            i, j, k = bad[0]
            warnings.warn(f"{name} matrix breaks the triangle inequality {len(bad)} times, "
                          f"e.g. {i}->{k} is longer than {i}->{j}->{k}", TriangleWarning,
                          stacklevel=2)
    return out
