"""HEFT and GreedyCost list schedulers.

Both run on a :class:`~udsched.schedcore.Timeline`. Started from an empty
timeline they give the idealized static plans (no interruptions, no
variation) that define the makespan and cost lower bounds; started from a
simulator snapshot they complete the remaining tasks hypothetically and
return the predicted final makespan / cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .resources import Pricing
from .schedcore import Problem, SchedulePlan, ScheduleError, Timeline, billing_cycles
from .workflow import WorkflowGraph


@dataclass(frozen=True)
class Bounds:
    m_lower: float
    c_lower: float
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("bound scalars a and b must be positive")
        if self.m_lower <= 0 or self.c_lower <= 0:
            raise ValueError("lower bounds must be positive")

    @property
    def m_upper(self) -> float:
        return self.m_lower + self.a * self.m_lower

    @property
    def c_upper(self) -> float:
        return self.c_lower + self.b * self.c_lower


def heft_fill(tl: Timeline, order: Iterable[int]) -> Timeline:
    """Place ``order`` (already in priority order) on the EFT-minimizing VM.

    Equal EFTs prefer the reliable VM, then the lower pool index.
    """
    prob = tl.prob
    dur, reliable = prob.dur, prob.reliable
    for t in order:
        if prob.pseudo[t]:
            tl.complete_pseudo(t)
            continue
        ests = tl.est_all(t)
        row = dur[t]
        best = None
        for v, s in enumerate(ests):
            key = (s + row[v], not reliable[v], v)
            if best is None or key < best:
                best = key
        v = best[2]
        tl.assign(t, v, ests[v], best[0])
    return tl


def gc_fill(tl: Timeline, order: Iterable[int]) -> Timeline:
    """Place ``order`` (topological) on the VM with the lowest marginal cost.

    Marginal cost is the hourly price times the billing cycles the placement
    adds to that VM's lease; ties go to the lower EFT, then the cheaper VM,
    then the lower pool index.
    """
    prob = tl.prob
    dur, price = prob.dur, prob.price
    cycle = prob.timing.billing_cycle
    for t in order:
        if prob.pseudo[t]:
            tl.complete_pseudo(t)
            continue
        ests = tl.est_all(t)
        row = dur[t]
        best = None
        for v, s in enumerate(ests):
            f = s + row[v]
            start = tl.lease_start[v]
            if start is None:
                added = billing_cycles(f - s, cycle)
            else:
                end = tl.lease_end[v]
                added = billing_cycles(max(end, f) - start, cycle) - billing_cycles(end - start, cycle)
            key = (price[v] * added, f, price[v], v)
            if best is None or key < best:
                best = key
        v = best[3]
        tl.assign(t, v, ests[v], best[1])
    return tl


def _static(prob: Problem, fill, order) -> SchedulePlan:
    if prob.m == 0:
        raise ScheduleError("empty VM pool")
    return fill(Timeline(prob), order).to_plan()


def heft_static(prob: Problem) -> SchedulePlan:
    """Classic HEFT over the whole mixed pool, append-only, p = 0."""
    return _static(prob, heft_fill, prob.heft_priority())


def gc_static(prob: Problem) -> SchedulePlan:
    """GreedyCost over the whole mixed pool in topological order, p = 0."""
    return _static(prob, gc_fill, range(prob.n))


def heft_dynamic_estimate(tl: Timeline, waiting: Iterable[int]) -> float:
    """Predicted final makespan if the not-yet-dispatched ``waiting`` tasks
    were scheduled by HEFT from the snapshot ``tl`` (which is not mutated)."""
    prob = tl.prob
    waiting = set(waiting)
    if not waiting:
        return tl.makespan()
    order = [t for t in prob.heft_priority() if t in waiting]
    return heft_fill(tl.copy(), order).makespan()


def gc_dynamic_estimate(tl: Timeline, waiting: Iterable[int]) -> float:
    """Incurred cost plus the cost GreedyCost would add completing ``waiting``."""
    waiting = set(waiting)
    if not waiting:
        return tl.cost()
    order = sorted(waiting)
    return gc_fill(tl.copy(), order).cost()


@dataclass(frozen=True)
class ReferenceAssignments:
    """Per real task: did ideal HEFT use a reliable VM (lam1), did ideal GC
    use an unreliable VM (lam2)."""

    lam1: dict[str, int]
    lam2: dict[str, int]


def reference_assignments(heft_plan: SchedulePlan, gc_plan: SchedulePlan,
                          graph: Optional[WorkflowGraph] = None) -> ReferenceAssignments:
    heft_on = {p.task: p for p in heft_plan.placements}
    gc_on = {p.task: p for p in gc_plan.placements}
    tasks = graph.real_tasks() if graph is not None else sorted(heft_on.keys() | gc_on.keys())
    lam1, lam2 = {}, {}
    for t in tasks:
        if t not in heft_on or t not in gc_on:
            raise ScheduleError(f"task {t!r} missing from a reference plan")
        lam1[t] = int(heft_on[t].pricing is Pricing.RELIABLE)
        lam2[t] = int(gc_on[t].pricing is Pricing.UNRELIABLE)
    return ReferenceAssignments(lam1, lam2)
