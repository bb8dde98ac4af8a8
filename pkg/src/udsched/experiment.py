"""Seeded replications and parameter sweeps producing summary rows."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

from .flc import FuzzyController
from .metrics import report
from .resources import VmCatalog, default_catalog
from .schedcore import Problem
from .simulator import SimConfig, SimResult, run_simulation
from .uds import StaticReference, UdsConfig, UdsPolicy, fuzzy_decider, static_reference
from .workflow import SyntheticConfig, WorkflowGraph, normalize_entries_exits, parse_workflow_source

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("workflow", "theta", "a", "b", "rep", "seed", "m_final", "c_final",
                  "norm_m", "norm_c", "acc", "succ_r")


@dataclass(frozen=True)
class ExperimentSpec:
    workflows: tuple[str, ...]
    thetas: tuple[float, ...] = (0.5,)
    a_values: tuple[float, ...] = (2.0,)
    b_values: tuple[float, ...] = (2.0,)
    replications: int = 1
    seed: int = 0
    catalog: VmCatalog = field(default_factory=default_catalog)
    synthetic: SyntheticConfig = SyntheticConfig()
    sim: SimConfig = SimConfig()
    controller: FuzzyController = FuzzyController()

    def __post_init__(self):
        for name in ("workflows", "thetas", "a_values", "b_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} needs at least one value")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")

    def points(self):
        return itertools.product(self.workflows, self.thetas, self.a_values, self.b_values,
                                 range(self.replications))


def run_seed(master: int, workflow: str, theta: float, a: float, b: float, rep: int) -> int:
    label = f"{workflow}|theta={theta:g}|a={a:g}|b={b:g}|rep={rep}"
    return (master + zlib.crc32(label.encode())) % (2 ** 31)


def load_workflow(source: str, spec: ExperimentSpec) -> WorkflowGraph:
    raw = parse_workflow_source(source, spec.seed, spec.catalog.slowest_speed, spec.synthetic)
    return normalize_entries_exits(raw)


@dataclass
class RunOutcome:
    row: Optional[dict]
    trace: Optional[str] = None
    error: Optional[str] = None
    result: Optional[SimResult] = None


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def run_point(prob: Problem, ref: StaticReference, spec: ExperimentSpec, workflow: str,
              theta: float, a: float, b: float, rep: int, keep_result: bool = False) -> RunOutcome:
    seed = run_seed(spec.seed, workflow, theta, a, b, rep)
    sim = SimConfig(**{**spec.sim.__dict__, "seed": seed})
    policy = UdsPolicy(UdsConfig(theta, a, b), ref, fuzzy_decider(spec.controller))
    result = run_simulation(prob, None, policy, sim)
    m = report(result, ref.refs, ref.bounds(a, b))
    row = {"workflow": workflow, "theta": _fmt(theta), "a": _fmt(a), "b": _fmt(b), "rep": rep,
           "seed": seed, "m_final": _fmt(result.m_final), "c_final": _fmt(result.c_final),
           "norm_m": _fmt(m.norm_m_final), "norm_c": _fmt(m.norm_c_final), "acc": _fmt(m.acc),
           "succ_r": _fmt(m.succ_r)}
    return RunOutcome(row, result.plan.to_csv(), result=result if keep_result else None)


@lru_cache(maxsize=8)
def _prepared(source: str, spec: ExperimentSpec):
    prob = Problem(load_workflow(source, spec), spec.catalog, spec.sim.timing)
    return prob, static_reference(prob)


def _worker(args) -> RunOutcome:
    spec, workflow, theta, a, b, rep, keep = args
    try:
        prob, ref = _prepared(workflow, spec)
        return run_point(prob, ref, spec, workflow, theta, a, b, rep, keep)
    except Exception as exc:  # one bad run must not sink the sweep
        logger.warning("run %s theta=%g a=%g b=%g rep=%d failed: %s", workflow, theta, a, b, rep, exc)
        return RunOutcome(None, error=f"{workflow} theta={theta:g} a={a:g} b={b:g} rep={rep}: {exc}")


def sweep(spec: ExperimentSpec, jobs: int = 1, keep_results: bool = False) -> list[RunOutcome]:
    """Run the full cross product; outcomes come back in sweep order."""
    tasks = [(spec, *p, keep_results) for p in spec.points()]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_worker, tasks, chunksize=4))
    return [_worker(t) for t in tasks]


def _sort_key(row: dict):
    return (row["workflow"], float(row["theta"]), float(row["a"]), float(row["b"]), row["rep"])


def summary_csv(outcomes: Sequence[RunOutcome]) -> str:
    rows = sorted((o.row for o in outcomes if o.row is not None), key=_sort_key)
    buf = io.StringIO()
    w = csv.DictWriter(buf, SUMMARY_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
