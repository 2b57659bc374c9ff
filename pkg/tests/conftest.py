from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from convrptw import GeneratorConfig, Instance, Solution, generate_convrptw, load_bundled_solomon

from reference import random_instance

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def line_instance(positions, windows, demand, service=None, capacity=10.0, horizon=100.0,
                  name="line") -> Instance:
    """Customers on a line at ``positions`` (depot at 0); travel time = |x - y| minutes."""
    xs = np.array([0.0, *positions])
    travel = np.abs(xs[:, None] - xs[None, :])
    demand = np.asarray(demand, dtype=float)
    if demand.ndim == 1:
        demand = demand[:, None]
    demand = np.vstack([np.zeros(demand.shape[1]), demand])
    service = [0, *(service if service is not None else [0] * len(positions))]
    return Instance.from_arrays(demand, service, [[0, horizon], *windows], travel,
                                capacity, horizon, name=name)


@pytest.fixture
def make_line():
    return line_instance


@pytest.fixture(scope="session")
def small_instances():
    """One generated default instance per Solomon class family."""
    out = {}
    for name in ("C101", "C201", "R101", "R201", "RC101", "RC201"):
        out[name] = generate_convrptw(load_bundled_solomon(name), GeneratorConfig(rng_seed=1))
    return out


@st.composite
def instances(draw, max_customers: int = 6, max_days: int = 3, tight: bool | None = None):
    n = draw(st.integers(1, max_customers))
    days = draw(st.integers(1, max_days))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    if tight is None:
        tight = draw(st.booleans())
    return random_instance(np.random.default_rng(seed), n, days, tight=tight)


@st.composite
def solutions(draw, instance: Instance):
    """Arbitrary person-consistent plans, usually infeasible."""
    n = instance.n_customers
    owner = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    groups = {}
    for v, k in zip(instance.customers, owner):
        groups.setdefault(k, []).append(v)
    routes = []
    for k in sorted(groups):
        days = []
        for d in range(instance.n_days):
            active = [v for v in groups[k] if instance.is_active(v, d)]
            days.append(list(draw(st.permutations(active))))
        routes.append(days)
    return Solution(routes=routes)


@st.composite
def instance_and_solution(draw, **kw):
    inst = draw(instances(**kw))
    return inst, draw(solutions(inst))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
