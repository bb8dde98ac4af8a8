"""Schedule data structures, EST/EFT arithmetic, billing and plan validation.

Times are seconds. Every duration the planners or the simulator use goes
through :meth:`TimingModel.quantize`, so planned and simulated timelines line
up exactly when nothing stochastic happens.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .resources import PoolVm, Pricing, VmCatalog, exec_time, transfer_time
from .workflow import WorkflowGraph, topological_order

_EPS = 1e-9


class ScheduleError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimingModel:
    bandwidth_mbps: float = 20.0
    slot_seconds: float = 1.0
    provisioning_seconds: float = 96.9
    billing_cycle: float = 3600.0

    def __post_init__(self):
        for name in ("bandwidth_mbps", "slot_seconds", "billing_cycle"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.provisioning_seconds < 0:
            raise ValueError("provisioning delay cannot be negative")

    def quantize(self, seconds: float) -> float:
        """Round a duration up to a whole number of slots."""
        if seconds <= 0:
            return 0.0
        return math.ceil(seconds / self.slot_seconds - _EPS) * self.slot_seconds

    @property
    def provisioning(self) -> float:
        return self.quantize(self.provisioning_seconds)


def billing_cycles(duration: float, cycle: float) -> int:
    if duration < 0:
        raise ValueError("negative billing duration")
    return max(1, math.ceil(duration / cycle - _EPS))


def vm_cost(first_start: float, last_finish: float, hourly_price: float, cycle: float = 3600.0) -> float:
    """Lease cost: price per started billing cycle, at least one cycle."""
    if last_finish < first_start:
        raise ValueError("last_finish precedes first_start")
    return hourly_price * billing_cycles(last_finish - first_start, cycle)


class Problem:
    """Graph, pool and timing compiled into index arrays.

    Tasks are indexed in deterministic topological order, pool VMs in catalog
    order. Both planners and the simulator work on these indices.
    """

    def __init__(self, graph: WorkflowGraph, catalog: VmCatalog, timing: TimingModel = TimingModel()):
        self.graph = graph
        self.catalog = catalog
        self.timing = timing
        self.pool: tuple[PoolVm, ...] = catalog.pool
        if not self.pool:
            raise ScheduleError("empty VM pool")
        self.ids: list[str] = topological_order(graph)
        self.index = {tid: i for i, tid in enumerate(self.ids)}
        n, m = len(self.ids), len(self.pool)
        self.n, self.m = n, m
        self.pseudo = [graph.tasks[t].pseudo for t in self.ids]
        self.demand = [graph.tasks[t].demand_mi for t in self.ids]
        q = timing.quantize
        self.raw_exec = [[exec_time(d, v.speed) for v in self.pool] for d in self.demand]
        self.dur = [[q(x) for x in row] for row in self.raw_exec]
        # preds[t] = [(p, quantized cross-VM transfer seconds)]
        self.preds: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        self.succs: list[list[int]] = [[] for _ in range(n)]
        for (s, d), e in graph.edges.items():
            si, di = self.index[s], self.index[d]
            self.preds[di].append((si, q(transfer_time(e.data_mbit, False, timing.bandwidth_mbps))))
            self.succs[si].append(di)
        for lst in self.preds:
            lst.sort()
        for lst in self.succs:
            lst.sort()
        self.entry = self.index[graph.entry]
        self.exit = self.index[graph.exit]
        self.price = [v.price for v in self.pool]
        self.reliable = [v.reliable for v in self.pool]
        self.vm_index = {v.vm_id: j for j, v in enumerate(self.pool)}
        self.real = [i for i in range(n) if not self.pseudo[i]]
        self._rank: Optional[list[float]] = None

    def upward_rank(self) -> list[float]:
        """HEFT upward rank: mean execution time plus the heaviest path of
        (transfer + rank) through successors."""
        if self._rank is None:
            rank = [0.0] * self.n
            for t in reversed(range(self.n)):
                w = sum(self.dur[t]) / self.m
                tail = 0.0
                for s in self.succs[t]:
                    c = next(tr for p, tr in self.preds[s] if p == t)
                    tail = max(tail, c + rank[s])
                rank[t] = w + tail
            self._rank = rank
        return self._rank

    def heft_priority(self) -> list[int]:
        rank = self.upward_rank()
        return sorted(range(self.n), key=lambda t: (-rank[t], t))


@dataclass
class Placement:
    task: str
    vm: str
    pricing: Pricing
    est: float
    eft: float
    ast: Optional[float] = None
    aft: Optional[float] = None
    attempt: int = 1
    lease: int = 1
    aborted_at: Optional[float] = None

    def __post_init__(self):
        if self.attempt < 1:
            raise ValueError("attempt counter starts at 1")

    @property
    def start(self) -> float:
        return self.ast if self.ast is not None else self.est

    @property
    def end(self) -> float:
        if self.aborted_at is not None:
            return self.aborted_at
        return self.aft if self.aft is not None else self.eft

    @property
    def completed(self) -> bool:
        """Not aborted and not still running (a plan entry without AST counts)."""
        return self.aborted_at is None and (self.aft is not None or self.ast is None)


@dataclass
class SchedulePlan:
    placements: list[Placement] = field(default_factory=list)
    slot_seconds: float = 1.0
    billing_cycle: float = 3600.0

    def by_task(self) -> dict[str, Placement]:
        """Completed placement per task."""
        return {p.task: p for p in self.placements if p.completed}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "vm", "pricing", "est", "eft", "ast", "aft", "attempt"])
        for p in self.placements:
            aft = p.aft if p.completed else None
            w.writerow([p.task, p.vm, p.pricing.value, _fmt(p.est), _fmt(p.eft),
                        _fmt(p.ast), _fmt(aft), p.attempt])
        return buf.getvalue()


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


@dataclass(frozen=True)
class BillingRecord:
    vm: str
    lease: int
    first_start: float
    last_finish: float
    cycles: int
    cost: float


def plan_makespan(plan: SchedulePlan) -> float:
    done = [p.end for p in plan.placements if p.completed]
    if not done:
        raise ScheduleError("plan has no completed placements")
    unfinished = {p.task for p in plan.placements} - {p.task for p in plan.placements if p.completed}
    if unfinished:
        raise ScheduleError(f"tasks without a finished placement: {sorted(unfinished)[:5]}")
    return max(done)


def billing_records(plan: SchedulePlan, catalog: VmCatalog) -> list[BillingRecord]:
    """One record per lease: billed from its first start to its last finish
    (or to the abort time of an attempt cut short by revocation)."""
    spans: dict[tuple[str, int], list[float]] = {}
    for p in plan.placements:
        key = (p.vm, p.lease)
        lo, hi = p.start, p.end
        if key in spans:
            span = spans[key]
            span[0], span[1] = min(span[0], lo), max(span[1], hi)
        else:
            spans[key] = [lo, hi]
    out = []
    for (vm, lease), (lo, hi) in sorted(spans.items()):
        price = catalog.vm(vm).price
        cycles = billing_cycles(hi - lo, plan.billing_cycle)
        out.append(BillingRecord(vm, lease, lo, hi, cycles, price * cycles))
    return out


def plan_cost(plan: SchedulePlan, catalog: VmCatalog) -> float:
    return math.fsum(r.cost for r in billing_records(plan, catalog))


@dataclass(frozen=True)
class Violation:
    kind: str  # "c1": VM overlap, "c2": task on two VMs at once
    first: Placement
    second: Placement

    def __str__(self) -> str:
        a, b = self.first, self.second
        return (f"{self.kind}: {a.task}@{a.vm}[{a.start:g},{a.end:g}) overlaps "
                f"{b.task}@{b.vm}[{b.start:g},{b.end:g})")


def _overlap(a: Placement, b: Placement) -> bool:
    return a.start < b.end and b.start < a.end


def validate_plan(plan: SchedulePlan) -> list[Violation]:
    """All c1 (one task per VM at a time) and c2 (one VM per task at a time)
    violations; an empty list means the plan is valid."""
    out = []
    by_vm = defaultdict(list)
    by_task = defaultdict(list)
    for p in plan.placements:
        by_vm[p.vm].append(p)
        by_task[p.task].append(p)
    for kind, groups in (("c1", by_vm), ("c2", by_task)):
        for group in groups.values():
            group = sorted(group, key=lambda p: (p.start, p.end))
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    if b.start >= a.end:
                        break
                    if _overlap(a, b):
                        out.append(Violation(kind, a, b))
    return out


def data_arrival(prob: Problem, t: int, finish, where) -> tuple[float, dict[int, float]]:
    """Input arrival time for task ``t``.

    Returns the arrival on a VM holding none of the inputs, and a map from each
    VM that produced some input to the arrival there (its local outputs need no
    transfer).
    """
    preds = prob.preds[t]
    cross = 0.0
    locs: dict[int, float] = {}
    for p, tr in preds:
        f = finish[p]
        if f is None:
            raise ScheduleError(f"predecessor {prob.ids[p]!r} of {prob.ids[t]!r} has no finish time")
        if f + tr > cross:
            cross = f + tr
        if where[p] >= 0:
            locs[where[p]] = 0.0
    for v in locs:
        arr = 0.0
        for p, tr in preds:
            a = finish[p] if where[p] == v else finish[p] + tr
            if a > arr:
                arr = a
        locs[v] = arr
    return cross, locs


def readiness(prob: Problem, t: int, finish, where) -> float:
    """Earliest time some VM holds every input of ``t``."""
    cross, locs = data_arrival(prob, t, finish, where)
    return min(cross, *locs.values()) if locs else cross


class Timeline:
    """Partial schedule used by the list-scheduling planners.

    Holds per-task finish times and locations and, per pool VM, the time its
    append-only queue drains. A VM with ``ready[v] is None`` has no live lease:
    using it costs a provisioning delay counted from the task's decision time.
    ``now`` is a lower bound on every new start.
    """

    __slots__ = ("prob", "now", "finish", "where", "ready", "lease_start", "lease_end",
                 "closed_cost", "placed")

    def __init__(self, prob: Problem, now: float = 0.0):
        self.prob = prob
        self.now = now
        self.finish: list[Optional[float]] = [None] * prob.n
        self.where: list[int] = [-1] * prob.n
        self.ready: list[Optional[float]] = [None] * prob.m
        self.lease_start: list[Optional[float]] = [None] * prob.m
        self.lease_end: list[Optional[float]] = [None] * prob.m
        self.closed_cost = 0.0
        self.placed: list[tuple[int, int, float, float]] = []

    def copy(self) -> "Timeline":
        tl = Timeline.__new__(Timeline)
        tl.prob, tl.now = self.prob, self.now
        tl.finish, tl.where = self.finish[:], self.where[:]
        tl.ready, tl.lease_start, tl.lease_end = self.ready[:], self.lease_start[:], self.lease_end[:]
        tl.closed_cost = self.closed_cost
        tl.placed = []
        return tl

    def data_ready(self, t: int) -> tuple[float, dict[int, float]]:
        return data_arrival(self.prob, t, self.finish, self.where)

    def decision_time(self, t: int) -> float:
        cross, locs = self.data_ready(t)
        return max(self.now, min([cross, *locs.values()]))

    def est_all(self, t: int) -> list[float]:
        """EST of task ``t`` on every pool VM."""
        cross, locs = self.data_ready(t)
        decide = max(self.now, min([cross, *locs.values()]))
        fresh = decide + self.prob.timing.provisioning
        now = self.now
        out = []
        for v, r in enumerate(self.ready):
            vm_ready = fresh if r is None else r
            data = locs.get(v, cross)
            out.append(max(now, vm_ready, data))
        return out

    def est(self, t: int, v: int) -> float:
        return self.est_all(t)[v]

    def eft(self, t: int, v: int) -> float:
        return self.est(t, v) + self.prob.dur[t][v]

    def complete_pseudo(self, t: int) -> float:
        f = 0.0
        for p, _ in self.prob.preds[t]:
            if self.finish[p] is None:
                raise ScheduleError(f"predecessor {self.prob.ids[p]!r} unfinished")
            f = max(f, self.finish[p])
        self.finish[t] = f
        return f

    def assign(self, t: int, v: int, est: float, eft: float) -> None:
        self.finish[t] = eft
        self.where[t] = v
        self.ready[v] = eft
        if self.lease_start[v] is None:
            self.lease_start[v] = est
            self.lease_end[v] = eft
        else:
            self.lease_end[v] = max(self.lease_end[v], eft)
        self.placed.append((t, v, est, eft))

    def lease_cost(self, v: int, end: Optional[float] = None) -> float:
        start = self.lease_start[v]
        if start is None:
            return 0.0
        end = self.lease_end[v] if end is None else end
        return self.prob.price[v] * billing_cycles(end - start, self.prob.timing.billing_cycle)

    def cost(self) -> float:
        return self.closed_cost + sum(self.lease_cost(v) for v in range(self.prob.m))

    def makespan(self) -> float:
        return max(f for f in self.finish if f is not None)

    def to_plan(self) -> SchedulePlan:
        prob = self.prob
        out = [Placement(prob.ids[t], prob.pool[v].vm_id, prob.pool[v].pricing, est, eft, est, eft)
               for t, v, est, eft in self.placed]
        return SchedulePlan(out, prob.timing.slot_seconds, prob.timing.billing_cycle)


def est(tl: Timeline, task: str, vm: str) -> float:
    """Earliest start of ``task`` on pool VM ``vm`` given the partial schedule."""
    return tl.est(tl.prob.index[task], tl.prob.vm_index[vm])


def eft(tl: Timeline, task: str, vm: str) -> float:
    t, v = tl.prob.index[task], tl.prob.vm_index[vm]
    return tl.est(t, v) + tl.prob.dur[t][v]

