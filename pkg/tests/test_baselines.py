import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_dag, small_catalog, uniform_catalog
from oracles import Instance, brute_force_heft, single_vm_costs
from udsched.baselines import (Bounds, gc_dynamic_estimate, gc_static, heft_dynamic_estimate,
                               heft_static, reference_assignments)
from udsched.resources import Pricing, default_catalog
from udsched.schedcore import (Placement, Problem, SchedulePlan, ScheduleError, Timeline,
                               TimingModel, plan_cost, plan_makespan)
from udsched.workflow import Edge, Task, WorkflowGraph, normalize_entries_exits

INSTANT = TimingModel(provisioning_seconds=0.0)


class TestHeftExamples:
    def test_chain_two_speeds(self):
        # [DERIVED] brute force over the 4 maps: both on the 2 MIPS VM -> 100 s
        g = WorkflowGraph([Task("t1", 100.0), Task("t2", 100.0)], [Edge("t1", "t2", 0.0)])
        prob = Problem(g, uniform_catalog([1.0, 2.0]), INSTANT)
        plan = heft_static(prob)
        assert plan_makespan(plan) == 100.0
        assert {p.vm.split(":")[0] for p in plan.placements} == {"v1"}
        inst = Instance.from_graph(g, prob.pool, provisioning=0.0)
        assert brute_force_heft(inst) == (100.0, 100.0)

    def test_single_task_fastest(self, catalog):
        prob = Problem(WorkflowGraph([Task("a", 50_000.0)]), catalog)
        (p,) = heft_static(prob).placements
        assert p.vm == "a1.4xlarge:R"

    def test_independent_pair_splits(self):
        g = normalize_entries_exits(WorkflowGraph([Task("t1", 500.0), Task("t2", 500.0)]))
        prob = Problem(g, uniform_catalog([100.0]), INSTANT)
        plan = heft_static(prob)
        assert plan_makespan(plan) == 5.0
        assert len({p.vm for p in plan.placements}) == 2

    def test_empty_pool(self, catalog):
        object.__setattr__(catalog, "pool", ())
        with pytest.raises(ScheduleError):
            Problem(WorkflowGraph([Task("a", 1.0)]), catalog)


class TestGcExamples:
    def test_single_task(self, catalog):
        prob = Problem(WorkflowGraph([Task("a", 10_000.0)]), catalog)
        plan = gc_static(prob)
        assert plan.placements[0].vm == "a1.medium:U"
        assert plan_cost(plan, catalog) == pytest.approx(0.005)

    def test_second_task_shares_cycle(self, catalog):
        g = WorkflowGraph([Task("a", 10_000.0), Task("b", 10_000.0)], [Edge("a", "b", 8.0)])
        plan = gc_static(Problem(g, catalog))
        assert [p.vm for p in plan.placements] == ["a1.medium:U"] * 2
        assert plan_cost(plan, catalog) == pytest.approx(0.005)

    def test_pseudo_adds_nothing(self, catalog):
        g = normalize_entries_exits(WorkflowGraph([Task("a", 10_000.0), Task("b", 10_000.0)]))
        plan = gc_static(Problem(g, catalog))
        assert {p.task for p in plan.placements} == {"a", "b"}
        assert plan_cost(plan, catalog) == pytest.approx(0.005)


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    g = normalize_entries_exits(random_dag(rng, int(rng.integers(1, 7))))
    cat = small_catalog(rng, int(rng.integers(1, 4)))
    return g, cat


class TestOracle:
    @given(st.integers(0, 2**32 - 1))
    def test_heft_matches_enumeration(self, seed):
        g, cat = _random_instance(seed)
        prob = Problem(g, cat)
        policy, best = brute_force_heft(Instance.from_graph(g, cat.pool))
        got = plan_makespan(heft_static(prob))
        assert got == policy
        assert got >= best

    @given(st.integers(0, 2**32 - 1))
    def test_gc_not_worse_than_single_vm(self, seed):
        g, cat = _random_instance(seed)
        cost = plan_cost(gc_static(Problem(g, cat)), cat)
        assert cost <= min(single_vm_costs(Instance.from_graph(g, cat.pool))) + 1e-12

    @given(st.integers(1, 10), st.integers(0, 5000))
    def test_deterministic(self, n, seed):
        g = normalize_entries_exits(random_dag(np.random.default_rng(seed), n))
        a, b = Problem(g, default_catalog()), Problem(g, default_catalog())
        assert heft_static(a) == heft_static(b) and gc_static(a) == gc_static(b)


class TestDynamic:
    @given(st.integers(1, 10), st.integers(0, 5000))
    def test_fresh_state_equals_static(self, n, seed):
        g = normalize_entries_exits(random_dag(np.random.default_rng(seed), n))
        prob = Problem(g, default_catalog())
        everything = range(prob.n)
        assert heft_dynamic_estimate(Timeline(prob), everything) == plan_makespan(heft_static(prob))
        assert gc_dynamic_estimate(Timeline(prob), everything) == pytest.approx(
            plan_cost(gc_static(prob), prob.catalog))

    def test_all_finished(self, catalog):
        g = WorkflowGraph([Task("a", 10_000.0)])
        prob = Problem(g, catalog)
        tl = Timeline(prob, now=500.0)
        tl.assign(0, 0, 100.0, 105.0)
        assert heft_dynamic_estimate(tl, []) == 105.0
        assert gc_dynamic_estimate(tl, []) == pytest.approx(0.0255)

    def test_mid_run_bounds(self, catalog):
        g = WorkflowGraph([Task("a", 10_000.0), Task("b", 10_000.0)], [Edge("a", "b", 8.0)])
        prob = Problem(g, catalog)
        tl = Timeline(prob, now=400.0)
        tl.assign(0, 1, 97.0, 147.0)
        tl.closed_cost = 0.01
        before = (tl.finish[:], tl.ready[:])
        assert heft_dynamic_estimate(tl, [1]) >= 400.0
        assert gc_dynamic_estimate(tl, [1]) >= 0.01
        assert (tl.finish, tl.ready) == before


class TestReferenceAssignments:
    def _plan(self, rows):
        return SchedulePlan([Placement(t, vm, pr, 0, 1, 0, 1) for t, vm, pr in rows])

    def test_definitions(self):
        heft = self._plan([("a", "x:R", Pricing.RELIABLE), ("b", "x:U", Pricing.UNRELIABLE)])
        gc = self._plan([("a", "x:R", Pricing.RELIABLE), ("b", "x:U", Pricing.UNRELIABLE)])
        refs = reference_assignments(heft, gc)
        assert refs.lam1 == {"a": 1, "b": 0}
        assert refs.lam2 == {"a": 0, "b": 1}

    def test_missing_task(self):
        heft = self._plan([("a", "x:R", Pricing.RELIABLE)])
        gc = self._plan([("b", "x:U", Pricing.UNRELIABLE)])
        with pytest.raises(ScheduleError):
            reference_assignments(heft, gc)

    def test_pseudo_excluded(self, catalog):
        g = normalize_entries_exits(WorkflowGraph([Task("a", 1e4), Task("b", 1e4)]))
        prob = Problem(g, catalog)
        refs = reference_assignments(heft_static(prob), gc_static(prob), g)
        assert set(refs.lam1) == {"a", "b"}


class TestBounds:
    def test_arithmetic(self):
        assert Bounds(100, 1, 0.5, 1).m_upper == 150
        assert Bounds(100, 0.02, 1, 3.0).c_upper == pytest.approx(0.08)

    @pytest.mark.parametrize("a,b", [(0, 1), (1, 0), (-1, 1)])
    def test_degenerate(self, a, b):
        with pytest.raises(ValueError):
            Bounds(100, 1, a, b)
