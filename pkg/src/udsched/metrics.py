"""Evaluation metrics: FLC accuracy, normalized makespan/cost, success rate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .baselines import Bounds, ReferenceAssignments
from .resources import Pricing


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    norm_m_final: float
    norm_c_final: float
    succ_r: float
    delta: int


def correct_decisions(decisions: Iterable, refs: ReferenceAssignments,
                      score: str = "first") -> tuple[int, int]:
    """(correct, scored) decision counts.

    A reliable choice is correct where ideal HEFT used a reliable VM, an
    unreliable choice where ideal GreedyCost used an unreliable VM. With
    ``score="first"`` only each task's first decision counts; ``"all"`` scores
    every decision including retries.
    """
    if score not in ("first", "all"):
        raise ValueError("score must be 'first' or 'all'")
    if score == "first":
        first = {}
        for d in decisions:
            if d.task not in first or d.attempt < first[d.task].attempt:
                first[d.task] = d
        decisions = first.values()
    correct = scored = 0
    for d in decisions:
        if d.task not in refs.lam1:
            raise KeyError(f"no reference assignment for task {d.task!r}")
        if d.pricing is Pricing.RELIABLE:
            correct += refs.lam1[d.task] == 1
        else:
            correct += refs.lam2[d.task] == 1
        scored += 1
    return correct, scored


def accuracy(decisions: Sequence, refs: ReferenceAssignments, score: str = "first") -> float:
    """Percentage of correct pricing decisions over the real tasks."""
    delta, scored = correct_decisions(decisions, refs, score)
    total = len(refs.lam1) if score == "first" else scored
    return 100.0 * delta / total if total else 100.0


def normalized_finals(m_final: float, c_final: float, bounds: Bounds) -> tuple[float, float]:
    if bounds.m_lower <= 0 or bounds.c_lower <= 0:
        raise ValueError("lower bounds must be positive")
    return m_final / bounds.m_lower, c_final / bounds.c_lower


def success_rate(result) -> float:
    """Percentage of real tasks that completed on their first attempt."""
    attempts = result.attempts
    if not attempts:
        return 100.0
    return 100.0 * sum(1 for a in attempts.values() if a == 1) / len(attempts)


def report(result, refs: ReferenceAssignments, bounds: Bounds, score: str = "first") -> MetricsReport:
    delta, _ = correct_decisions(result.decisions, refs, score)
    norm_m, norm_c = normalized_finals(result.m_final, result.c_final, bounds)
    return MetricsReport(accuracy(result.decisions, refs, score), norm_m, norm_c,
                         success_rate(result), delta)
