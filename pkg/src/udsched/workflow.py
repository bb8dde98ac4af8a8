"""Workflow DAGs: representation, DAX parsing, pseudo-task normalization and
synthetic generators."""

from __future__ import annotations

import enum
import graphlib
import heapq
import os
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

PSEUDO_ENTRY = "__entry__"
PSEUDO_EXIT = "__exit__"


class WorkflowError(ValueError):
    """Base class for malformed workflows."""


class DaxParseError(WorkflowError):
    pass


class CycleError(WorkflowError):
    def __init__(self, message: str, member: str):
        super().__init__(message)
        self.member = member


class UnknownTaskError(WorkflowError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    demand_mi: float
    pseudo: bool = False

    def __post_init__(self):
        if self.demand_mi < 0:
            raise WorkflowError(f"task {self.id!r} has negative demand {self.demand_mi}")
        if self.pseudo and self.demand_mi != 0:
            raise WorkflowError(f"pseudo task {self.id!r} must have zero demand")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    data_mbit: float = 0.0

    def __post_init__(self):
        if self.src == self.dst:
            raise CycleError(f"task {self.src!r} depends on itself", self.src)
        if self.data_mbit < 0:
            raise WorkflowError(f"edge {self.src}->{self.dst} has negative data size")


class WorkflowGraph:
    """Immutable DAG of tasks with data-carrying edges.

    Construction validates ids, duplicate edges and acyclicity.
    """

    def __init__(self, tasks: Iterable[Task], edges: Iterable[Edge] = ()):
        self.tasks: dict[str, Task] = {}
        for t in tasks:
            if t.id in self.tasks:
                raise WorkflowError(f"duplicate task id {t.id!r}")
            self.tasks[t.id] = t
        self.edges: dict[tuple[str, str], Edge] = {}
        self._succ: dict[str, list[str]] = {tid: [] for tid in self.tasks}
        self._pred: dict[str, list[str]] = {tid: [] for tid in self.tasks}
        for e in edges:
            for end in (e.src, e.dst):
                if end not in self.tasks:
                    raise UnknownTaskError(f"edge {e.src}->{e.dst} references unknown task {end!r}")
            if (e.src, e.dst) in self.edges:
                raise WorkflowError(f"duplicate edge {e.src}->{e.dst}")
            self.edges[(e.src, e.dst)] = e
            self._succ[e.src].append(e.dst)
            self._pred[e.dst].append(e.src)
        for lst in (*self._succ.values(), *self._pred.values()):
            lst.sort()
        self._order = _kahn(self.tasks, self._succ, self._pred)

    def __len__(self) -> int:
        return len(self.tasks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WorkflowGraph):
            return NotImplemented
        return self.tasks == other.tasks and self.edges == other.edges

    def __repr__(self) -> str:
        return f"WorkflowGraph({len(self.tasks)} tasks, {len(self.edges)} edges)"

    def predecessors(self, tid: str) -> list[str]:
        return self._pred[tid]

    def successors(self, tid: str) -> list[str]:
        return self._succ[tid]

    def entries(self) -> list[str]:
        return [t for t in self._order if not self._pred[t]]

    def exits(self) -> list[str]:
        return [t for t in self._order if not self._succ[t]]

    @property
    def entry(self) -> str:
        entries = self.entries()
        if len(entries) != 1:
            raise WorkflowError(f"graph has {len(entries)} entry tasks; normalize it first")
        return entries[0]

    @property
    def exit(self) -> str:
        exits = self.exits()
        if len(exits) != 1:
            raise WorkflowError(f"graph has {len(exits)} exit tasks; normalize it first")
        return exits[0]

    def data(self, src: str, dst: str) -> float:
        return self.edges[(src, dst)].data_mbit

    def real_tasks(self) -> list[str]:
        return [t for t in self._order if not self.tasks[t].pseudo]


def _kahn(tasks, succ, pred) -> list[str]:
    indeg = {t: len(pred[t]) for t in tasks}
    heap = [t for t, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        t = heapq.heappop(heap)
        order.append(t)
        for s in succ[t]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, s)
    if len(order) != len(tasks):
        sorter = graphlib.TopologicalSorter({t: pred[t] for t in tasks})
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            cycle = exc.args[1]
            raise CycleError(f"dependency cycle through {' -> '.join(cycle)}", cycle[0]) from None
        raise AssertionError("unreachable: Kahn failed without a cycle")
    return order


def topological_order(graph: WorkflowGraph) -> list[str]:
    """Deterministic topological order, ties broken by ascending task id."""
    return list(graph._order)


def normalize_entries_exits(graph: WorkflowGraph) -> WorkflowGraph:
    """Give the graph a single entry and a single exit by adding zero-demand
    pseudo tasks joined with zero-data edges where needed."""
    if not graph.tasks:
        raise WorkflowError("cannot normalize an empty workflow")
    entries, exits = graph.entries(), graph.exits()
    if len(entries) == 1 and len(exits) == 1:
        return graph
    tasks = list(graph.tasks.values())
    edges = list(graph.edges.values())
    if len(entries) > 1:
        tasks.append(Task(PSEUDO_ENTRY, 0.0, pseudo=True))
        edges += [Edge(PSEUDO_ENTRY, t, 0.0) for t in entries]
    if len(exits) > 1:
        tasks.append(Task(PSEUDO_EXIT, 0.0, pseudo=True))
        edges += [Edge(t, PSEUDO_EXIT, 0.0) for t in exits]
    return WorkflowGraph(tasks, edges)


# --- DAX ------------------------------------------------------------------

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_dax(document: str, slowest_speed_mips: float) -> WorkflowGraph:
    """Parse the supported DAX subset.

    ``job@runtime`` is taken as seconds on the slowest VM and converted to MI
    with ``slowest_speed_mips``. Edge volume is the total size of files that the
    parent outputs and the child inputs; sizes are bytes, stored as megabits.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise DaxParseError(f"malformed DAX at line {line}, column {col}: {exc}") from None

    tasks: list[Task] = []
    outputs: dict[str, dict[str, float]] = {}
    inputs: dict[str, dict[str, float]] = {}
    deps: list[tuple[str, str]] = []
    for el in root:
        tag = _local(el.tag)
        if tag == "job":
            jid = el.get("id")
            if jid is None:
                raise DaxParseError("job element without id")
            try:
                runtime = float(el.get("runtime", "0"))
            except ValueError:
                raise DaxParseError(f"job {jid!r} has non-numeric runtime {el.get('runtime')!r}") from None
            tasks.append(Task(jid, runtime * slowest_speed_mips))
            outs, ins = outputs.setdefault(jid, {}), inputs.setdefault(jid, {})
            for use in el:
                if _local(use.tag) != "uses":
                    continue
                fname = use.get("file") or use.get("name")
                size = float(use.get("size", "0"))
                link = use.get("link", "")
                if link == "output":
                    outs[fname] = size
                elif link == "input":
                    ins[fname] = size
        elif tag == "child":
            cid = el.get("ref")
            for par in el:
                if _local(par.tag) == "parent":
                    deps.append((par.get("ref"), cid))

    known = {t.id for t in tasks}
    edges = []
    seen = set()
    for pid, cid in deps:
        for ref in (pid, cid):
            if ref not in known:
                raise UnknownTaskError(f"dependency references unknown job {ref!r}")
        if (pid, cid) in seen:
            continue
        seen.add((pid, cid))
        shared = outputs[pid].keys() & inputs[cid].keys()
        size_bytes = sum(inputs[cid][f] for f in shared)
        edges.append(Edge(pid, cid, size_bytes * 8 / 1e6))
    return WorkflowGraph(tasks, edges)


def to_dax(graph: WorkflowGraph, slowest_speed_mips: float) -> str:
    """Serialize to the DAX subset understood by :func:`parse_dax`."""
    root = ET.Element("adag", {"xmlns": "http://pegasus.isi.edu/schema/DAX", "version": "2.1"})
    files_out: dict[str, list[tuple[str, float]]] = defaultdict(list)
    files_in: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for (src, dst), e in graph.edges.items():
        name = f"{src}__{dst}.dat"
        size = e.data_mbit * 1e6 / 8
        files_out[src].append((name, size))
        files_in[dst].append((name, size))
    for tid in topological_order(graph):
        job = ET.SubElement(root, "job", {
            "id": tid, "runtime": repr(graph.tasks[tid].demand_mi / slowest_speed_mips)})
        for name, size in files_in[tid]:
            ET.SubElement(job, "uses", {"file": name, "link": "input", "size": repr(size)})
        for name, size in files_out[tid]:
            ET.SubElement(job, "uses", {"file": name, "link": "output", "size": repr(size)})
    for tid in topological_order(graph):
        preds = graph.predecessors(tid)
        if preds:
            child = ET.SubElement(root, "child", {"ref": tid})
            for p in preds:
                ET.SubElement(child, "parent", {"ref": p})
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


# --- synthetic workflows ---------------------------------------------------

class Pattern(str, enum.Enum):
    PIPELINE = "pipeline"
    FANOUT_FANIN = "fanout_fanin"
    AGGREGATION = "aggregation"
    DISTRIBUTION = "distribution"
    REDISTRIBUTION = "redistribution"


@dataclass(frozen=True)
class SyntheticConfig:
    demand_mi: tuple[float, float] = (1_000.0, 100_000.0)
    data_mbit: tuple[float, float] = (8.0, 800.0)


# Task demands 100x the default: a 100-task workflow then carries tens of
# hours of serial work on the slowest VM, so runs span several billing
# cycles and spot revocations actually bite.
HOUR_SCALE = SyntheticConfig(demand_mi=(1e5, 1e7))


def _structure(pattern: Pattern, n: int) -> list[tuple[int, int]]:
    if n == 1:
        return []
    if pattern is Pattern.PIPELINE or n == 2:
        return [(i, i + 1) for i in range(n - 1)]
    if pattern is Pattern.FANOUT_FANIN:
        mids = range(1, n - 1)
        return [(0, m) for m in mids] + [(m, n - 1) for m in mids]
    if pattern is Pattern.AGGREGATION:
        return [(i, n - 1) for i in range(n - 1)]
    if pattern is Pattern.DISTRIBUTION:
        return [(0, i) for i in range(1, n)]
    if pattern is Pattern.REDISTRIBUTION:
        k = n // 2
        return [(i, j) for i in range(k) for j in range(k, n)]
    raise ValueError(pattern)


def generate_synthetic(pattern: Pattern | str, n_tasks: int, seed: int,
                       config: SyntheticConfig = SyntheticConfig()) -> WorkflowGraph:
    """Random workflow with a fixed structural pattern.

    pipeline is a chain; fanout_fanin is one source feeding n-2 parallel tasks
    joined by a sink; aggregation is n-1 sources into one sink; distribution is
    one source into n-1 sinks; redistribution is two fully connected layers.
    """
    pattern = Pattern(pattern)
    if n_tasks < 1:
        raise WorkflowError("a synthetic workflow needs at least one task")
    rng = np.random.default_rng(seed)
    width = len(str(n_tasks - 1))
    ids = [f"t{i:0{width}d}" for i in range(n_tasks)]
    demands = rng.uniform(*config.demand_mi, size=n_tasks)
    pairs = _structure(pattern, n_tasks)
    sizes = rng.uniform(*config.data_mbit, size=len(pairs))
    tasks = [Task(ids[i], float(demands[i])) for i in range(n_tasks)]
    edges = [Edge(ids[i], ids[j], float(s)) for (i, j), s in zip(pairs, sizes)]
    return WorkflowGraph(tasks, edges)


def parse_workflow_source(source: str, seed: int, slowest_speed_mips: float,
                          config: SyntheticConfig = SyntheticConfig()) -> WorkflowGraph:
    """Resolve a ``pattern:n`` spec or a DAX path into a raw graph."""
    head, sep, tail = source.partition(":")
    if sep and head in {p.value for p in Pattern}:
        return generate_synthetic(head, int(tail), seed, config)
    if sep and tail.isdigit() and not os.path.exists(source):
        known = ", ".join(p.value for p in Pattern)
        raise WorkflowError(f"unknown synthetic pattern {head!r} (known: {known})")
    with open(source, encoding="utf-8") as fh:
        return parse_dax(fh.read(), slowest_speed_mips)

