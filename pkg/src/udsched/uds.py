"""Uncertainty-driven scheduling policy.

For every ready task the policy predicts the final makespan and cost from
the current state (dynamic HEFT and GreedyCost over all undispatched tasks),
places both between their static lower bounds and the ``a``/``b`` scaled
upper bounds, asks the fuzzy controller for a pricing model indicator and
dispatches the task to the earliest-finishing VM of the chosen class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .baselines import (Bounds, ReferenceAssignments, gc_dynamic_estimate, gc_static,
                        heft_dynamic_estimate, heft_static, reference_assignments)
from .flc import FuzzyController, PmiDecision
from .resources import Pricing
from .schedcore import Problem, SchedulePlan, ScheduleError, plan_cost, plan_makespan, readiness
from .simulator import Choice, Simulation


@dataclass(frozen=True)
class UdsConfig:
    theta: float = 0.5
    a: float = 2.0
    b: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a and b must be positive")


@dataclass(frozen=True)
class DispatchDecision:
    task: str
    time: float
    norm_m: float
    norm_c: float
    pmi: float
    pricing: Pricing
    vm: str
    attempt: int
    m_curr: float
    c_curr: float


@dataclass(frozen=True)
class StaticReference:
    """Idealized static plans of a problem and the bounds derived from them."""

    heft: SchedulePlan
    gc: SchedulePlan
    m_lower: float
    c_lower: float
    refs: ReferenceAssignments

    def bounds(self, a: float, b: float) -> Bounds:
        return Bounds(self.m_lower, self.c_lower, a, b)


def static_reference(prob: Problem) -> StaticReference:
    heft = heft_static(prob)
    gc = gc_static(prob)
    return StaticReference(heft, gc, plan_makespan(heft), plan_cost(gc, prob.catalog),
                           reference_assignments(heft, gc, prob.graph))


def compute_bounds(prob: Problem, a: float, b: float) -> Bounds:
    return static_reference(prob).bounds(a, b)


def normalize_metric(value: float, lower: float, upper: float) -> float:
    if upper <= lower:
        raise ValueError("upper bound must exceed lower bound")
    x = (value - lower) / (upper - lower)
    return min(max(x, 0.0), 1.0)


# (task id, norm_m, norm_c, theta) -> PmiDecision
Decider = Callable[[str, float, float, float], PmiDecision]


def fuzzy_decider(controller: FuzzyController = FuzzyController()) -> Decider:
    def decide(task: str, norm_m: float, norm_c: float, theta: float) -> PmiDecision:
        return controller.decide(norm_m, norm_c, theta)
    return decide


class UdsPolicy:
    def __init__(self, config: UdsConfig = UdsConfig(), reference: Optional[StaticReference] = None,
                 decider: Optional[Decider] = None):
        self.config = config
        self.reference = reference
        self.decide = decider or fuzzy_decider()
        self.decisions: list[DispatchDecision] = []

    def bind(self, sim: Simulation) -> None:
        if self.reference is None:
            self.reference = static_reference(sim.prob)
        self.bounds = self.reference.bounds(self.config.a, self.config.b)
        self.decisions = []

    def select(self, task: int, sim: Simulation) -> Choice:
        return dispatch_ready_task(task, sim, self.bounds, self.config, self.decide, self.decisions)


def dispatch_ready_task(task: int, sim: Simulation, bounds: Bounds, config: UdsConfig,
                        decide: Decider = fuzzy_decider(),
                        log: Optional[list] = None) -> Choice:
    prob = sim.prob
    tl = sim.snapshot()
    waiting = sim.undispatched()
    m_curr = heft_dynamic_estimate(tl, waiting)
    c_curr = gc_dynamic_estimate(tl, waiting)
    norm_m = normalize_metric(m_curr, bounds.m_lower, bounds.m_upper)
    norm_c = normalize_metric(c_curr, bounds.c_lower, bounds.c_upper)
    tid = prob.ids[task]
    d = decide(tid, norm_m, norm_c, config.theta)
    want_reliable = d.pricing is Pricing.RELIABLE
    ests = tl.est_all(task)
    best = None
    for v, s in enumerate(ests):
        if prob.reliable[v] != want_reliable:
            continue
        key = (s + prob.dur[task][v], prob.price[v], v)
        if best is None or key < best:
            best = key
    if best is None:
        raise ScheduleError(f"no {d.pricing.value} VM in the pool")
    v = best[2]
    if log is not None:
        log.append(DispatchDecision(tid, sim.now, norm_m, norm_c, d.pmi, d.pricing,
                                    prob.pool[v].vm_id, sim.attempts[task] + 1, m_curr, c_curr))
    return Choice(v, ests[v], best[0])


def on_task_completion(task: int, sim: Simulation) -> list[int]:
    """Successors of a just-finished ``task`` whose inputs have all arrived
    somewhere by ``sim.now``, in readiness-then-id order."""
    prob = sim.prob
    out = []
    for s in prob.succs[task]:
        preds = prob.preds[s]
        if any(sim.aft[p] is None for p, _ in preds):
            continue
        at = readiness(prob, s, sim.aft, sim.where)
        if at <= sim.now:
            out.append((at, prob.ids[s], s))
    return [s for _, _, s in sorted(out)]
