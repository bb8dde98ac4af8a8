"""Discrete-event execution of a workflow on leased VMs.

Time advances in whole slots. Unreliable leases are interrupted with a
per-slot Bernoulli hazard while active and are revoked unconditionally once
they have been active for an hour. Revocation aborts the running attempt and
sends it, together with the lease's queued tasks, back to the scheduler at
the revocation instant; every dispatch opens a new attempt. A scheduling
*policy* decides, for each ready task, which pool VM receives it.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from .resources import (ONE_HOUR, Pricing, Variation, VmCatalog, VmInstance, VmState,
                        per_slot_hazard, sample_variation, slots_until_interruption)
from .schedcore import (Placement, Problem, SchedulePlan, ScheduleError, Timeline, TimingModel,
                        billing_cycles, data_arrival, plan_cost, readiness, validate_plan)
from .workflow import WorkflowGraph

logger = logging.getLogger(__name__)


class SimulationTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    slot_seconds: float = 1.0
    billing_cycle: float = 3600.0
    bandwidth_mbps: float = 20.0
    provisioning_seconds: float = 96.9
    variation: Variation = Variation()
    seed: int = 0
    max_sim_seconds: float = 30 * 24 * 3600.0
    lease_cap_seconds: float = ONE_HOUR

    @property
    def timing(self) -> TimingModel:
        return TimingModel(self.bandwidth_mbps, self.slot_seconds,
                           self.provisioning_seconds, self.billing_cycle)


class EventKind(enum.IntEnum):
    # value order is the processing order for simultaneous events
    REVOCATION = 0
    TASK_FINISH = 1
    PROVISION_COMPLETE = 2
    DATA_READY = 3


@dataclass(order=True)
class Event:
    time: float
    kind: EventKind
    key: str
    seq: int
    payload: object = field(compare=False, default=None)


class TaskState(enum.Enum):
    PENDING = 0     # some predecessor unfinished
    WAITING = 1     # predecessors done, inputs still in transfer
    READY = 2       # in the ready queue
    DISPATCHED = 3  # in a VM queue or running
    DONE = 4


@dataclass(frozen=True)
class Choice:
    vm: int
    est: float
    eft: float


class Policy(Protocol):
    def bind(self, sim: "Simulation") -> None: ...

    def select(self, task: int, sim: "Simulation") -> Optional[Choice]: ...


@dataclass
class _Queued:
    task: int
    est: float
    eft: float
    data_ready: float


@dataclass
class _Lease:
    inst: VmInstance
    v: int
    queue: deque = field(default_factory=deque)
    running: Optional[tuple[_Queued, Placement]] = None
    started: list[Placement] = field(default_factory=list)

    @property
    def key(self) -> str:
        return f"{self.inst.vm_id}#{self.inst.lease}"


@dataclass(frozen=True)
class Revocation:
    vm: str
    lease: int
    time: float
    cause: str  # "interruption" or "lease-cap"
    aborted: Optional[str]
    requeued: tuple[str, ...]


@dataclass
class SimResult:
    plan: SchedulePlan
    m_final: float
    c_final: float
    decisions: list = field(default_factory=list)
    attempts: dict[str, int] = field(default_factory=dict)
    revocations: list[Revocation] = field(default_factory=list)

    @property
    def retries(self) -> dict[str, int]:
        return {t: a - 1 for t, a in self.attempts.items()}


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent random stream keyed by a stable label."""
    return np.random.default_rng([seed & 0xFFFFFFFF, zlib.crc32(label.encode())])


class Simulation:
    def __init__(self, problem: Problem, policy: Policy, config: SimConfig = SimConfig()):
        if problem.timing != config.timing:
            raise ValueError("problem timing and simulation config disagree")
        self.prob = problem
        self.policy = policy
        self.config = config
        self.timing = config.timing
        n, m = problem.n, problem.m
        self.now = 0.0
        self.state = [TaskState.PENDING] * n
        self.aft: list[Optional[float]] = [None] * n
        self.where = [-1] * n
        self.queue: dict[int, float] = {}
        self.attempts = [0] * n
        self.leases: list[Optional[_Lease]] = [None] * m
        self.lease_count = [0] * m
        self.closed: list[_Lease] = []
        self.placements: list[Placement] = []
        self.revocations: list[Revocation] = []
        self._task_lease: dict[int, _Lease] = {}
        self._events: list[Event] = []
        self._seq = 0
        self._finished = False

    # -- event plumbing ---------------------------------------------------
    def _push(self, time: float, kind: EventKind, key: str, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._events, Event(time, kind, key, self._seq, payload))

    def run(self) -> SimResult:
        self.policy.bind(self)
        self._eligible(self.prob.entry)
        while not self._finished:
            self._dispatch_ready()
            if self._finished:
                break
            if not self._events:
                raise ScheduleError("simulation stalled with unfinished tasks and no pending events")
            self.now = self._events[0].time
            if self.now > self.config.max_sim_seconds:
                raise SimulationTimeout(
                    f"simulated time passed {self.config.max_sim_seconds:g} s; "
                    "check for a configuration that keeps revoking work")
            while self._events and self._events[0].time == self.now:
                ev = heapq.heappop(self._events)
                self._handle(ev)
        return self._result()

    def _handle(self, ev: Event) -> None:
        if ev.kind is EventKind.REVOCATION:
            lease, cause = ev.payload
            self._revoke(lease, cause)
        elif ev.kind is EventKind.TASK_FINISH:
            self._finish(*ev.payload)
        elif ev.kind is EventKind.PROVISION_COMPLETE:
            self._activate(ev.payload)
        else:
            t = ev.payload
            if self.state[t] is TaskState.WAITING:
                self._enqueue(t)
            elif self.state[t] is TaskState.DISPATCHED:
                self._try_start(self._task_lease[t])

    # -- task flow ----------------------------------------------------------
    def _eligible(self, t: int) -> None:
        """All predecessors of ``t`` are done."""
        self.state[t] = TaskState.WAITING
        at = readiness(self.prob, t, self.aft, self.where) if self.prob.preds[t] else self.now
        if at <= self.now:
            self._enqueue(t)
        else:
            self._push(at, EventKind.DATA_READY, self.prob.ids[t], t)

    def _enqueue(self, t: int) -> None:
        if self.prob.pseudo[t]:
            self._complete(t, -1)
        else:
            self.state[t] = TaskState.READY
            self.queue[t] = self.now

    def _complete(self, t: int, v: int) -> None:
        self.state[t] = TaskState.DONE
        self.aft[t] = self.now
        self.where[t] = v
        if t == self.prob.exit:
            self._finished = True
            return
        for s in self.prob.succs[t]:
            if self.state[s] is TaskState.PENDING and all(
                    self.state[p] is TaskState.DONE for p, _ in self.prob.preds[s]):
                self._eligible(s)

    def _dispatch_ready(self) -> None:
        progressed = True
        while progressed and self.queue and not self._finished:
            progressed = False
            ids = self.prob.ids
            for t in sorted(self.queue, key=lambda t: (self.queue[t], ids[t])):
                choice = self.policy.select(t, self)
                if choice is None:
                    continue
                del self.queue[t]
                self.dispatch(t, choice)
                progressed = True

    def dispatch(self, t: int, choice: Choice) -> None:
        v = choice.vm
        lease = self.leases[v]
        if lease is None:
            self.lease_count[v] += 1
            inst = VmInstance(self.prob.pool[v], self.lease_count[v], VmState.PROVISIONING,
                              requested_at=self.now)
            lease = _Lease(inst, v)
            self.leases[v] = lease
            self._push(self.now + self.timing.provisioning, EventKind.PROVISION_COMPLETE, lease.key, lease)
        self.attempts[t] += 1
        cross, locs = data_arrival(self.prob, t, self.aft, self.where)
        entry = _Queued(t, choice.est, choice.eft, locs.get(v, cross))
        lease.queue.append(entry)
        self.state[t] = TaskState.DISPATCHED
        self._task_lease[t] = lease
        self._try_start(lease)

    def _try_start(self, lease: _Lease) -> None:
        if lease.inst.state is not VmState.ACTIVE or lease.running is not None or not lease.queue:
            return
        head = lease.queue[0]
        if head.data_ready > self.now:
            self._push(head.data_ready, EventKind.DATA_READY, self.prob.ids[head.task], head.task)
            return
        lease.queue.popleft()
        t, v = head.task, lease.v
        attempt = self.attempts[t]
        label = f"variation/{self.prob.ids[t]}/{attempt}"
        factor = sample_variation(stream(self.config.seed, label), self.config.variation)
        duration = self.timing.quantize(self.prob.raw_exec[t][v] * factor)
        pl = Placement(self.prob.ids[t], lease.inst.vm_id, lease.inst.vm.pricing, head.est, head.eft,
                       ast=self.now, attempt=attempt, lease=lease.inst.lease)
        lease.running = (head, pl)
        lease.started.append(pl)
        self.placements.append(pl)
        self._push(self.now + duration, EventKind.TASK_FINISH, self.prob.ids[t], (lease, t, attempt))

    def _finish(self, lease: _Lease, t: int, attempt: int) -> None:
        if lease.running is None or lease.running[0].task != t or self.attempts[t] != attempt:
            return  # stale: the attempt was aborted by a revocation
        _, pl = lease.running
        pl.aft = self.now
        lease.running = None
        lease.inst.ready_at = self.now
        self._complete(t, lease.v)
        self._try_start(lease)

    # -- VM lifecycle ---------------------------------------------------------
    def _activate(self, lease: _Lease) -> None:
        inst = lease.inst
        if inst.state is not VmState.PROVISIONING:
            return
        inst.state = VmState.ACTIVE
        inst.active_since = inst.ready_at = self.now
        if inst.vm.pricing is Pricing.UNRELIABLE:
            slot = self.timing.slot_seconds
            hazard = per_slot_hazard(inst.vm.p_hourly, slot)
            k = slots_until_interruption(stream(self.config.seed, f"hazard/{lease.key}"), hazard)
            cap = self.now + self.config.lease_cap_seconds
            interrupt = self.now + k * slot
            if interrupt < cap:
                self._push(interrupt, EventKind.REVOCATION, lease.key, (lease, "interruption"))
            else:
                self._push(cap, EventKind.REVOCATION, lease.key, (lease, "lease-cap"))
        self._try_start(lease)

    def revoke(self, lease: _Lease, cause: str = "interruption") -> list[int]:
        """Revoke ``lease`` now; returns the tasks sent back to the ready queue."""
        if lease.inst.vm.pricing is Pricing.RELIABLE:
            raise ScheduleError(f"reliable VM {lease.inst.vm_id} cannot be revoked")
        return self._revoke(lease, cause)

    def _revoke(self, lease: _Lease, cause: str) -> list[int]:
        inst = lease.inst
        if self.leases[lease.v] is not lease or not inst.alive:
            return []
        inst.state = VmState.REVOKED
        inst.revoked_at = self.now
        self.leases[lease.v] = None
        self.closed.append(lease)
        back = []
        aborted = None
        if lease.running is not None:
            head, pl = lease.running
            pl.aborted_at = self.now
            aborted = head.task
            back.append(head.task)
            lease.running = None
        back.extend(q.task for q in lease.queue)
        lease.queue.clear()
        for t in back:
            self.state[t] = TaskState.READY
            self.queue[t] = self.now
            self._task_lease.pop(t, None)
        ids = self.prob.ids
        self.revocations.append(Revocation(
            inst.vm_id, inst.lease, self.now, cause,
            None if aborted is None else ids[aborted], tuple(ids[t] for t in back if t != aborted)))
        logger.debug("t=%g revoked %s (%s), requeued %d tasks", self.now, lease.key, cause, len(back))
        return back

    # -- policy-facing views ----------------------------------------------------
    def undispatched(self) -> list[int]:
        """Tasks not yet handed to a VM (including the one being decided)."""
        return [t for t, s in enumerate(self.state)
                if s is not TaskState.DISPATCHED and s is not TaskState.DONE]

    def snapshot(self) -> Timeline:
        """Planner view of the current state.

        Finished tasks keep their actual times. Dispatched work is projected
        with nominal durations from the current state of each lease.
        """
        prob, now = self.prob, self.now
        tl = Timeline(prob, now)
        for t in range(prob.n):
            if self.state[t] is TaskState.DONE:
                tl.finish[t] = self.aft[t]
                tl.where[t] = self.where[t]
        cycle = self.timing.billing_cycle
        closed = 0.0
        for lease in self.closed:
            if lease.started:
                lo = min(p.start for p in lease.started)
                hi = max(p.end for p in lease.started)
                closed += prob.price[lease.v] * billing_cycles(hi - lo, cycle)
        tl.closed_cost = closed
        for v, lease in enumerate(self.leases):
            if lease is None:
                continue
            inst = lease.inst
            if inst.state is VmState.PROVISIONING:
                free = inst.requested_at + self.timing.provisioning
            else:
                free = inst.ready_at
            start = min((p.start for p in lease.started), default=None)
            end = max((p.end for p in lease.started), default=None)
            if lease.running is not None:
                head, pl = lease.running
                free = max(pl.ast + prob.dur[head.task][v], now)
                tl.finish[head.task], tl.where[head.task] = free, v
                end = free if end is None else max(end, free)
            for q in lease.queue:
                s = max(free, q.data_ready, now)
                free = s + prob.dur[q.task][v]
                tl.finish[q.task], tl.where[q.task] = free, v
                if start is None:
                    start = s
                end = free if end is None else max(end, free)
            tl.ready[v] = free
            tl.lease_start[v] = start
            tl.lease_end[v] = end if end is not None else start
        return tl

    # -- result ---------------------------------------------------------------
    def _result(self) -> SimResult:
        plan = SchedulePlan(list(self.placements), self.timing.slot_seconds, self.timing.billing_cycle)
        problems = validate_plan(plan)
        if problems:
            raise ScheduleError("simulated plan violates constraints: " + "; ".join(map(str, problems[:3])))
        m_final = self.aft[self.prob.exit]
        c_final = plan_cost(plan, self.prob.catalog)
        attempts = {self.prob.ids[t]: self.attempts[t] for t in self.prob.real}
        decisions = list(getattr(self.policy, "decisions", []))
        return SimResult(plan, m_final, c_final, decisions, attempts, list(self.revocations))


class ReplayPolicy:
    """Dispatch every task to the VM a static plan gave it, keeping each VM's
    planned order."""

    def __init__(self, plan: SchedulePlan):
        self.plan = plan

    def bind(self, sim: Simulation) -> None:
        prob = sim.prob
        self._vm: dict[int, int] = {}
        self._before: dict[int, list[int]] = {}
        per_vm: dict[int, list[int]] = {}
        for p in self.plan.placements:
            t, v = prob.index[p.task], prob.vm_index[p.vm]
            self._vm[t] = v
            self._before[t] = list(per_vm.setdefault(v, []))
            per_vm[v].append(t)
        missing = [prob.ids[t] for t in prob.real if t not in self._vm]
        if missing:
            raise ScheduleError(f"plan does not place {missing[:5]}")

    def select(self, task: int, sim: Simulation) -> Optional[Choice]:
        done = (TaskState.DISPATCHED, TaskState.DONE)
        if any(sim.state[t] not in done for t in self._before[task]):
            return None
        v = self._vm[task]
        est = sim.snapshot().est(task, v)
        return Choice(v, est, est + sim.prob.dur[task][v])


def run_simulation(graph: WorkflowGraph | Problem, catalog: Optional[VmCatalog], policy: Policy,
                   config: SimConfig = SimConfig()) -> SimResult:
    """Execute ``policy`` on ``graph`` (normalized) over ``catalog``'s pool."""
    if isinstance(graph, Problem):
        prob = graph
    else:
        prob = Problem(graph, catalog, config.timing)
    return Simulation(prob, policy, config).run()
