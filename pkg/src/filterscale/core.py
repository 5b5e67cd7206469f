"""Single-pool scaling law with utility decay under repetition.

The loss after ``n`` samples drawn from a pool of size ``N`` is

    y = a * n_1**b_1 * prod_{j=2..k} (m_j / n_{j-1})**b_j + d

where ``n_j = j * N`` are epoch boundaries, ``m_j`` equals ``n_j`` for completed
epochs and the running sample count for a partial final epoch, and the
exponent decays geometrically, ``b_j = b * delta**(j-1)`` with
``delta = 0.5**(1/tau)``.

Sample counts are unit-agnostic: the shared normaliser ``a`` absorbs the unit,
so the same unit must be used for fitting and prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a scaling-law operation."""


@dataclass(frozen=True)
class UtilityParams:
    """Scaling constants of one data pool."""

    a: float
    b: float
    d: float
    tau: float

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"normaliser a must be positive, got {self.a}")
        if not self.b < 0:
            raise DomainError(f"utility exponent b must be negative, got {self.b}")
        if not self.d >= 0:
            raise DomainError(f"irreducible error d must be nonnegative, got {self.d}")
        if not self.tau > 0:
            raise DomainError(f"half-life tau must be positive, got {self.tau}")

    @property
    def delta(self) -> float:
        return delta_from_tau(self.tau)


def epoch_count(pool_size: float, total_samples: float) -> int:
    """Index of the epoch that contains ``total_samples`` (1-based).

    A count landing on an epoch boundary (to 1e-12 relative) belongs to the
    epoch it completes.
    """
    q = total_samples / pool_size
    r = round(q)
    if r >= 1 and abs(q - r) <= 1e-12 * r:
        return int(r)
    return max(1, math.ceil(q))


@dataclass(frozen=True)
class EpochSchedule:
    """Training on ``total_samples`` draws from a pool of ``pool_size``."""

    pool_size: float
    total_samples: float

    def __post_init__(self):
        if not self.pool_size > 0:
            raise DomainError(f"pool_size must be positive, got {self.pool_size}")
        if not self.total_samples > 0:
            raise DomainError(f"total_samples must be positive, got {self.total_samples}")

    @property
    def current_epoch(self) -> int:
        return epoch_count(self.pool_size, self.total_samples)

    @property
    def epoch_boundaries(self) -> list[float]:
        return [j * self.pool_size for j in range(1, self.current_epoch + 1)]

    def log_increments(self) -> np.ndarray:
        return log_increments(self.pool_size, self.total_samples)


def delta_from_tau(tau: float) -> float:
    if not tau > 0:
        raise DomainError(f"half-life tau must be positive, got {tau}")
    return 0.5 ** (1.0 / tau)


def utility_at_epoch(b: float, tau: float, epoch: int) -> float:
    """Exponent in effect during ``epoch`` (1-based); epoch 1 is undecayed."""
    if epoch < 1:
        raise DomainError(f"epoch must be >= 1, got {epoch}")
    if not tau > 0:
        raise DomainError(f"half-life tau must be positive, got {tau}")
    return b * 0.5 ** ((epoch - 1) / tau)


def instantaneous_utility(y: float, n: float, b: float) -> float:
    """Rate of change of the loss per sample, ``dy/dn = (y / n) * b``."""
    if not n > 0:
        raise DomainError(f"samples seen must be positive, got {n}")
    return y / n * b


def delta_powers(delta: float, k: int) -> np.ndarray:
    """``[1, delta, delta**2, ..., delta**(k-1)]`` by repeated multiplication."""
    factors = np.full(k, delta, dtype=np.float64)
    factors[0] = 1.0
    return np.cumprod(factors)


def decayed_exponents(b: float, delta: float, k: int) -> np.ndarray:
    return b * delta_powers(delta, k)


def log_increments(pool_size: float, total_samples: float) -> np.ndarray:
    """Per-epoch log sample ratios ``[log n_1, log(n_2/n_1), ..., log(m_k/n_{k-1})]``."""
    k = epoch_count(pool_size, total_samples)
    if k == 1:
        return np.log(np.array([total_samples], dtype=np.float64))
    ends = pool_size * np.arange(1, k + 1, dtype=np.float64)
    ends[-1] = total_samples
    starts = pool_size * np.arange(1, k, dtype=np.float64)
    ratios = np.empty(k)
    ratios[0] = pool_size
    ratios[1:] = ends[1:] / starts
    return np.log(ratios)


def loss_from_exponents(a: float, d: float, exponents: Sequence[float],
                        increments: Sequence[float]) -> float:
    """``a * exp(sum_j exponents[j] * increments[j]) + d``, summed in epoch order."""
    if len(increments) == 0:
        raise DomainError("empty schedule")
    if len(exponents) < len(increments):
        raise DomainError("fewer exponents than epochs")
    acc = np.float64(0.0)
    for j in range(len(increments)):
        acc += exponents[j] * increments[j]
    return float(a * np.exp(acc) + d)


def eval_loss(params: UtilityParams, schedule: EpochSchedule) -> float:
    incs = schedule.log_increments()
    exps = decayed_exponents(params.b, params.delta, len(incs))
    return loss_from_exponents(params.a, params.d, exps, incs)


def eval_losses(params: UtilityParams, pool_size: float,
                totals: Sequence[float]) -> np.ndarray:
    """Vector of ``eval_loss`` over several sample budgets."""
    return np.array([eval_loss(params, EpochSchedule(pool_size, n)) for n in totals])
