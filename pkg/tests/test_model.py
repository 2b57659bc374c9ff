import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convrptw.model import (
    ContractError,
    Instance,
    InstanceError,
    Solution,
    check_insertion,
    check_solution,
    detours_never_help,
    evaluate_route,
    evaluate_solution,
    pair_compatible,
    route_cost,
    route_feasible,
    route_penalty,
    triangle_violations,
    vehicle_lower_bound,
)

from conftest import instance_and_solution, instances, line_instance
from reference import ref_metrics, ref_order_exists, ref_schedule


def one_customer(t01=10.0, s=5.0, window=(15.0, 30.0), horizon=100.0, q=1.0, capacity=10.0):
    travel = [[0, t01], [t01, 0]]
    return Instance.from_arrays([[0], [q]], [0, s], [[0, horizon], list(window)], travel,
                                capacity, horizon)


class TestEvaluateRoute:
    def test_single_customer_waits_for_window(self):
        sch = evaluate_route(one_customer(), 0, [1])
        assert sch.service_start == (150,)  # 15 min
        assert sch.wait == (50,)
        assert sch.depot_return_time == 300
        assert sch.feasible

    def test_empty_route(self):
        sch = evaluate_route(one_customer(), 0, [])
        assert sch.feasible and sch.load == 0 and sch.travel_time == 0
        assert route_cost(one_customer(), []).travel_time == 0

    def test_late_arrival_warps_to_window_close(self):
        inst = line_instance([20, 30], [[0, 10], [0, 100]], [1, 1])
        sch = evaluate_route(inst, 0, [1, 2])
        assert sch.tw_violation == (100, 0)
        # propagation continues from the window close at 10 minutes
        assert sch.service_start == (100, 200)
        assert not sch.feasible

    def test_return_violation(self):
        inst = one_customer(t01=60, s=0, window=(0, 70), horizon=100)
        sch = evaluate_route(inst, 0, [1])
        assert sch.return_violation == 200
        assert not sch.feasible

    def test_three_customers_both_orders_by_hand(self):
        # windows force 1 before 2: going 2 first reaches 1 after it closes
        inst = line_instance([10, 20, 30], [[10, 15], [20, 40], [0, 100]], [1, 1, 1])
        forward = evaluate_route(inst, 0, [1, 2, 3])
        assert forward.service_start == (100, 200, 300) and forward.feasible
        backward = evaluate_route(inst, 0, [3, 2, 1])
        # 3 at 30, 2 at 40, 1 arrives at 50 > 15: late by 35 minutes
        assert backward.service_start == (300, 400, 150)
        assert backward.tw_violation == (0, 0, 350)
        assert not backward.feasible

    def test_all_orders_of_three_match_reference(self):
        rng = np.random.default_rng(3)
        from reference import random_instance
        for _ in range(50):
            inst = random_instance(rng, 3, 1)
            active = inst.active_customers(0)
            for perm in itertools.permutations(active):
                sch = evaluate_route(inst, 0, list(perm))
                ref = ref_schedule(inst, 0, perm)
                assert list(sch.service_start) == ref.starts
                assert sch.feasible == ref.feasible

    def test_capacity_excess(self):
        inst = line_instance([1, 2], [[0, 100], [0, 100]], [6, 6], capacity=10)
        sch = evaluate_route(inst, 0, [1, 2])
        assert sch.capacity_excess == 2 and not sch.feasible

    @pytest.mark.parametrize("route, match", [([3], "unknown"), ([1, 1], "twice"),
                                              ([2], "inactive")])
    def test_contract_errors(self, route, match):
        inst = line_instance([1, 2], [[0, 100], [0, 100]], [[1, 1], [1, 0]])
        with pytest.raises(ContractError, match=match):
            evaluate_route(inst, 1, route)

    @given(instances())
    def test_matches_reference_recursion(self, inst):
        for d in range(inst.n_days):
            route = inst.active_customers(d)
            sch = evaluate_route(inst, d, route)
            ref = ref_schedule(inst, d, route)
            assert list(sch.service_start) == ref.starts
            assert list(sch.tw_violation) == ref.late
            assert sch.depot_return_time == ref.back
            assert sch.feasible == ref.feasible
            assert route_feasible(inst, d, route) == ref.feasible
            c, w = route_penalty(inst, d, route)
            assert c == sch.capacity_excess and w == sch.time_warp

    @given(instances())
    def test_deterministic(self, inst):
        for d in range(inst.n_days):
            r = inst.active_customers(d)
            assert evaluate_route(inst, d, r) == evaluate_route(inst, d, list(r))

    @given(instances(tight=False))
    def test_starts_strictly_increase_on_feasible_routes(self, inst):
        for d in range(inst.n_days):
            r = inst.active_customers(d)
            sch = evaluate_route(inst, d, r)
            steps_positive = all(inst.service_time[a] + inst.travel_time[a, b] > 0
                                 for a, b in zip(r, r[1:]))
            if sch.time_warp == 0 and steps_positive:
                assert all(a < b for a, b in zip(sch.service_start, sch.service_start[1:]))

    @given(instances(), st.integers(0, 10), st.integers(1, 100))
    def test_longer_leg_never_starts_anyone_earlier(self, inst, leg, extra):
        d = 0
        r = inst.active_customers(d)
        if not r:
            return
        nodes = [0, *r]
        a, b = nodes[leg % len(r)], nodes[leg % len(r) + 1]
        t = inst.travel_time.copy()
        t[a, b] += extra
        slower = inst.replace(travel_time=t)
        before = evaluate_route(inst, d, r)
        after = evaluate_route(slower, d, r)
        raw_before = [s + v for s, v in zip(before.service_start, before.tw_violation)]
        raw_after = [s + v for s, v in zip(after.service_start, after.tw_violation)]
        assert all(x <= y for x, y in zip(raw_before, raw_after))


class TestEvaluateSolution:
    def test_feasible_plan_has_no_lateness(self):
        inst = line_instance([10, 20], [[0, 100], [0, 100]], [1, 1])
        m = evaluate_solution(inst, Solution(routes=[[[1, 2]]]))
        assert m.feasible and m.ptw == 0 and m.ltw == 0 and m.n_vehicles == 1

    def test_one_late_visit(self):
        # 0 -> 10 -> 20 -> 30 -> 0 is 60 minutes; the last visit is 3 minutes late
        inst = line_instance([10, 20, 30], [[0, 100], [0, 100], [0, 27]], [1, 1, 1])
        m = evaluate_solution(inst, Solution(routes=[[[1, 2, 3]]]))
        assert m.travel_time == 60
        assert m.ptw == pytest.approx(100 / 3)
        assert m.ltw == pytest.approx(5.0)
        assert not m.feasible

    @given(instance_and_solution(max_customers=10, max_days=5))
    def test_matches_per_visit_recount(self, pair):
        inst, sol = pair
        m = evaluate_solution(inst, sol)
        ref = ref_metrics(inst, sol)
        assert m.n_vehicles == ref["n_vehicles"]
        assert m.n_vehicles == sum(1 for k in range(len(sol.routes)) if sol.customers_of(k))
        assert m.travel_time == pytest.approx(ref["travel_time"])
        assert m.distance == pytest.approx(ref["distance"])
        assert m.ptw == pytest.approx(ref["ptw"])
        assert m.ltw == pytest.approx(ref["ltw"])

    def test_structural_errors(self):
        inst = line_instance([1, 2], [[0, 100], [0, 100]], [[1, 1], [1, 0]])
        with pytest.raises(ContractError, match="served by vehicles"):
            check_solution(inst, Solution(routes=[[[1], [1]], [[2, 1], []]]))
        with pytest.raises(ContractError, match="exactly its active"):
            check_solution(inst, Solution(routes=[[[1, 2], []]]))
        with pytest.raises(ContractError, match="not assigned"):
            check_solution(inst, Solution(routes=[[[1], [1]]]))
        check_solution(inst, Solution(routes=[[[1], [1]]]), complete=False)


class TestCheckInsertion:
    def test_empty_vehicle_generous_windows(self):
        inst = line_instance([5], [[0, 100]], [1])
        sol = Solution(routes=[[[]]])
        assert check_insertion(inst, sol, 0, 1, {0: 0}).feasible

    def test_capacity_excess_reported(self):
        inst = line_instance([5, 6], [[0, 100], [0, 100]], [[6, 6], [6, 1]], capacity=10)
        sol = Solution(routes=[[[1], [1]]])
        chk = check_insertion(inst, sol, 0, 2, {0: 1, 1: 0})
        assert not chk.feasible and chk.capacity_excess == 2
        assert sol.routes == [[[1], [1]]]  # untouched

    def test_position_out_of_range(self):
        inst = line_instance([5, 6], [[0, 100], [0, 100]], [1, 1])
        with pytest.raises(ContractError, match="out of range"):
            check_insertion(inst, Solution(routes=[[[1]]]), 0, 2, {0: 5})
        with pytest.raises(ContractError, match="already assigned"):
            check_insertion(inst, Solution(routes=[[[1]]]), 0, 1, {0: 0})

    def test_thousand_random_trials_match_mutation(self):
        from reference import random_instance
        rng = np.random.default_rng(11)
        for _ in range(1000):
            inst = random_instance(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)))
            v = int(rng.integers(1, inst.n_customers + 1))
            others = [c for c in inst.customers if c != v]
            routes = [[[c for c in rng.permutation(others) if inst.is_active(int(c), d)]
                       for d in range(inst.n_days)]]
            routes = [[[int(c) for c in r] for r in days] for days in routes]
            sol = Solution(routes=routes)
            positions = {d: int(rng.integers(0, len(routes[0][d]) + 1))
                         for d in inst.active_days(v)}
            chk = check_insertion(inst, sol, 0, v, positions)
            mutated = sol.copy()
            mutated.insert(0, v, positions)
            verdicts = [route_feasible(inst, d, mutated.routes[0][d]) for d in positions]
            assert chk.feasible == all(verdicts)
            for d in positions:
                assert chk.schedules[d] == evaluate_route(inst, d, mutated.routes[0][d])


class TestInstance:
    def test_rejects_demand_above_capacity(self):
        with pytest.raises(InstanceError, match="exceeds capacity"):
            line_instance([1], [[0, 10]], [11], capacity=10)

    def test_rejects_never_active_customer(self):
        with pytest.raises(InstanceError, match="zero demand on all days"):
            line_instance([1, 2], [[0, 10], [0, 10]], [[1, 1], [0, 0]])

    @pytest.mark.parametrize("window", [[5, 4], [-1, 4], [0, 101]])
    def test_rejects_bad_windows(self, window):
        with pytest.raises(InstanceError, match="time window"):
            line_instance([1], [window], [1], horizon=100)

    def test_rejects_nonzero_diagonal_and_negative_entries(self):
        inst = line_instance([1, 2], [[0, 10], [0, 10]], [1, 1])
        t = inst.travel_time.copy()
        t[1, 1] = 5
        with pytest.raises(InstanceError, match="diagonal"):
            inst.replace(travel_time=t)
        t[1, 1], t[1, 2] = 0, -1
        with pytest.raises(InstanceError, match="negative"):
            inst.replace(travel_time=t)

    def test_triangle_violations_listed(self):
        m = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
        bad = triangle_violations(m)
        assert (0, 1, 2) in bad and (2, 1, 0) in bad
        assert triangle_violations(m, tol=3) == []

    def test_labels_and_index(self):
        inst = line_instance([1, 2], [[0, 10], [0, 10]], [1, 1])
        inst = inst.replace(labels=[0, 17, 42])
        assert inst.index_of(42) == 2
        with pytest.raises(KeyError):
            inst.index_of(5)

    def test_arrays_are_read_only(self):
        inst = line_instance([1], [[0, 10]], [1])
        with pytest.raises(ValueError):
            inst.travel_time[0, 1] = 3


class TestLowerBound:
    def test_capacity_bound(self):
        inst = line_instance([1, 2, 3, 4], [[0, 100]] * 4, [5, 5, 5, 4], capacity=10)
        assert vehicle_lower_bound(inst) == 2

    def test_incompatible_pairs_give_clique_bound(self):
        # windows that cannot be chained on a line far apart
        inst = line_instance([40, -40, 0.5], [[40, 41], [40, 41], [40, 41]], [1, 1, 1])
        assert detours_never_help(inst)
        assert not pair_compatible(inst, 1, 2)
        assert vehicle_lower_bound(inst) == 3

    @given(instances(max_customers=5, max_days=2))
    @settings(max_examples=40)
    def test_never_above_brute_force_optimum(self, inst):
        from reference import ref_min_vehicles
        assert vehicle_lower_bound(inst) <= ref_min_vehicles(inst)

    @given(instances(max_customers=5, max_days=2))
    def test_pair_compatibility_matches_reference(self, inst):
        for i, j in itertools.combinations(inst.customers, 2):
            assert pair_compatible(inst, i, j) == all(
                ref_order_exists(inst, d, [i, j])
                for d in range(inst.n_days) if inst.is_active(i, d) and inst.is_active(j, d))
