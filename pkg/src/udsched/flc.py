"""Mamdani fuzzy controller producing the pricing model indicator (PMI).

Inputs are the normalized makespan and cost distances, output is an
indicator in [0, 1]; values at or above the threshold select a reliable VM.
Inference uses min conjunction, clipped consequents, max aggregation and
centroid defuzzification on a midpoint grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .resources import Pricing

GRID_POINTS = 1001


class Term(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class TriangularMf:
    left: float
    peak: float
    right: float

    def __post_init__(self):
        if not self.left <= self.peak <= self.right:
            raise ValueError(f"triangle points out of order: {self}")
        if self.left == self.right:
            raise ValueError("degenerate triangle with zero support")

    def __call__(self, x):
        return membership(self, x)


def membership(mf: TriangularMf, x):
    """Triangle value at ``x``; a vertical side (left == peak or peak == right)
    acts as a shoulder. Works on scalars and numpy arrays."""
    x = np.asarray(x, dtype=float)
    up = (np.ones_like(x) if mf.peak == mf.left
          else (x - mf.left) / (mf.peak - mf.left))
    down = (np.ones_like(x) if mf.right == mf.peak
            else (mf.right - x) / (mf.right - mf.peak))
    mu = np.where(x <= mf.peak, up, down)
    mu = np.where((x < mf.left) | (x > mf.right), 0.0, mu)
    mu = np.clip(mu, 0.0, 1.0)
    return float(mu) if mu.ndim == 0 else mu


@dataclass(frozen=True)
class Partition:
    low: TriangularMf = TriangularMf(0.0, 0.0, 0.5)
    medium: TriangularMf = TriangularMf(0.0, 0.5, 1.0)
    high: TriangularMf = TriangularMf(0.5, 1.0, 1.0)

    def __getitem__(self, term: Term) -> TriangularMf:
        return getattr(self, Term(term).value)


@dataclass(frozen=True)
class Rule:
    makespan: Optional[Term]  # None = any value
    cost: Optional[Term]
    output: Term


DEFAULT_RULES = (
    Rule(Term.LOW, None, Term.LOW),
    Rule(Term.MEDIUM, Term.LOW, Term.HIGH),
    Rule(Term.MEDIUM, Term.MEDIUM, Term.MEDIUM),
    Rule(Term.MEDIUM, Term.HIGH, Term.LOW),
    Rule(Term.HIGH, None, Term.HIGH),
)


@dataclass(frozen=True)
class FuzzyRuleBase:
    rules: tuple[Rule, ...] = DEFAULT_RULES


@dataclass(frozen=True)
class Aggregate:
    """Aggregated output membership sampled on the midpoint grid."""

    x: np.ndarray
    mu: np.ndarray
    strengths: tuple[float, ...] = field(default=())


def grid(points: int = GRID_POINTS) -> np.ndarray:
    return (np.arange(points) + 0.5) / points


def firing_strengths(norm_m: float, norm_c: float, rulebase: FuzzyRuleBase = FuzzyRuleBase(),
                     inputs: Partition = Partition()) -> list[float]:
    out = []
    for r in rulebase.rules:
        s = 1.0
        if r.makespan is not None:
            s = min(s, membership(inputs[r.makespan], norm_m))
        if r.cost is not None:
            s = min(s, membership(inputs[r.cost], norm_c))
        out.append(s)
    return out


def infer(norm_m: float, norm_c: float, rulebase: FuzzyRuleBase = FuzzyRuleBase(),
          inputs: Partition = Partition(), output: Partition = Partition(),
          points: int = GRID_POINTS) -> Aggregate:
    x = grid(points)
    strengths = firing_strengths(norm_m, norm_c, rulebase, inputs)
    mu = np.zeros_like(x)
    for r, s in zip(rulebase.rules, strengths):
        if s > 0.0:
            mu = np.maximum(mu, np.minimum(s, membership(output[r.output], x)))
    return Aggregate(x, mu, tuple(strengths))


def defuzzify_centroid(agg: Aggregate) -> float:
    area = agg.mu.sum()
    if area <= 0.0:
        raise ValueError("aggregated membership is identically zero")
    return float(np.dot(agg.x, agg.mu) / area)


@dataclass(frozen=True)
class PmiDecision:
    pmi: float
    pricing: Pricing
    theta: float


@dataclass(frozen=True)
class FuzzyController:
    rulebase: FuzzyRuleBase = FuzzyRuleBase()
    inputs: Partition = Partition()
    output: Partition = Partition()
    points: int = GRID_POINTS

    def pmi(self, norm_m: float, norm_c: float) -> float:
        m = min(max(norm_m, 0.0), 1.0)
        c = min(max(norm_c, 0.0), 1.0)
        return defuzzify_centroid(infer(m, c, self.rulebase, self.inputs, self.output, self.points))

    def decide(self, norm_m: float, norm_c: float, theta: float) -> PmiDecision:
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        pmi = self.pmi(norm_m, norm_c)
        pricing = Pricing.RELIABLE if pmi >= theta else Pricing.UNRELIABLE
        return PmiDecision(pmi, pricing, theta)


def flc_eval(norm_m: float, norm_c: float, theta: float,
             controller: FuzzyController = FuzzyController()) -> PmiDecision:
    return controller.decide(norm_m, norm_c, theta)
