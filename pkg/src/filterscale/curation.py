"""Compute-aware choice among prefix-union filtering strategies."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DomainError, UtilityParams
from .mixture import MixtureSpec, Pool, eval_mixture_loss, mixture_floor, mixture_normalizer


@dataclass(frozen=True)
class BucketLadder:
    """Quality buckets ordered best to worst."""

    buckets: tuple[Pool, ...]
    metric_name: str = "error"

    def __post_init__(self):
        object.__setattr__(self, "buckets", tuple(self.buckets))
        if not self.buckets:
            raise DomainError("ladder needs at least one bucket")
        mags = [abs(q.params.b) for q in self.buckets]
        if any(m2 > m1 for m1, m2 in zip(mags, mags[1:])):
            warnings.warn(f"utility magnitude increases down the ladder: {mags}", stacklevel=3)

    @classmethod
    def of(cls, buckets, metric_name: str = "error") -> "BucketLadder":
        return cls(tuple(Pool(i, p, n) for i, p, n in buckets), metric_name)


@dataclass(frozen=True)
class Crossover:
    budget_interval: tuple[float, float]
    from_strategy: str
    to_strategy: str


@dataclass(frozen=True)
class StrategyReport:
    strategies: tuple[str, ...]
    budgets: tuple[float, ...]
    per_strategy_error: np.ndarray
    best_strategy_per_budget: tuple[str, ...]
    crossovers: tuple[Crossover, ...]


def strategy_name(spec: MixtureSpec) -> str:
    return "+".join(q.pool_id for q in spec.pools)


def enumerate_strategies(ladder: BucketLadder) -> list[MixtureSpec]:
    """Best bucket alone, best two, ..., the whole ladder."""
    return [MixtureSpec(ladder.buckets[:k]) for k in range(1, len(ladder.buckets) + 1)]


def _crossovers(budgets: Sequence[float], best: Sequence[str]) -> tuple[Crossover, ...]:
    return tuple(Crossover((budgets[j - 1], budgets[j]), best[j - 1], best[j])
                 for j in range(1, len(best)) if best[j] != best[j - 1])


def predict_report(ladder: BucketLadder, budgets: Sequence[float],
                   a: float | None = None) -> StrategyReport:
    """Predicted error of every strategy at every budget.

    ``a`` defaults to the ladder's shared normaliser; each strategy uses the
    size-weighted floor of its buckets. Ties go to the smaller strategy.
    """
    budgets = tuple(float(b) for b in budgets)
    if not budgets or any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise DomainError("budgets must be a non-empty strictly ascending list")
    strategies = enumerate_strategies(ladder)
    if a is None:
        a = mixture_normalizer(MixtureSpec(ladder.buckets))
    errors = np.array([[eval_mixture_loss(s, a, mixture_floor(s), n) for n in budgets]
                       for s in strategies])
    names = tuple(strategy_name(s) for s in strategies)
    best = tuple(names[i] for i in np.argmin(errors, axis=0))
    return StrategyReport(names, budgets, errors, best, _crossovers(budgets, best))


def crossover_budgets(report: StrategyReport) -> list[tuple[float, float]]:
    return [c.budget_interval
            for c in _crossovers(report.budgets, report.best_strategy_per_budget)]


def ladder_from_params(entries: Sequence[tuple[str, UtilityParams, float]],
                       metric_name: str = "error") -> BucketLadder:
    return BucketLadder.of(entries, metric_name)
