"""Scaling curves for uniform mixtures of data pools.

Mixing pools stretches each pool's half-life in proportion to how much the
combined pool outgrows it (``tau_hat = (N_hat / N) * tau``), and the mixture's
exponent at each epoch is the size-weighted mean of the constituents' decayed
exponents. Plugging that exponent schedule into the single-pool closed form
over the combined size gives the mixture loss.

The effective-data formulations (data decays instead of utility, or both
decay) are provided for comparison.
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable

import numpy as np

from .core import (
    DomainError,
    UtilityParams,
    decayed_exponents,
    delta_from_tau,
    delta_powers,
    epoch_count,
    log_increments,
    loss_from_exponents,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pool:
    pool_id: str
    params: UtilityParams
    size: float

    def __post_init__(self):
        if not self.size > 0:
            raise DomainError(f"pool {self.pool_id!r}: size must be positive, got {self.size}")


@dataclass(frozen=True)
class MixtureSpec:
    """Pools sampled uniformly at random into one training stream.

    ``tau_exponent`` generalises the half-life rescaling to
    ``(N_hat / N) ** tau_exponent``; 1 is the contrastive-pair argument, 0
    disables rescaling.
    """

    pools: tuple[Pool, ...]
    tau_exponent: float = 1.0
    sampling: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(self.pools))
        if not self.pools:
            raise DomainError("a mixture needs at least one pool")
        ids = [p.pool_id for p in self.pools]
        if len(set(ids)) != len(ids):
            raise DomainError(f"duplicate pool ids in mixture: {ids}")
        if self.sampling != "uniform":
            raise DomainError(f"unsupported sampling mode {self.sampling!r}")

    @classmethod
    def of(cls, pools: Iterable[tuple[str, UtilityParams, float]], **kw) -> "MixtureSpec":
        return cls(tuple(Pool(i, p, n) for i, p, n in pools), **kw)

    @property
    def p(self) -> int:
        return len(self.pools)

    @property
    def combined_size(self) -> float:
        return math.fsum(pool.size for pool in self.pools)

    def with_tau_exponent(self, k: float) -> "MixtureSpec":
        return replace(self, tau_exponent=k)

    @cached_property
    def params(self) -> "MixtureParams":
        return MixtureParams.from_spec(self)


@dataclass(frozen=True)
class MixtureParams:
    """Per-pool rescaled decay, in canonical (pool_id-sorted) order."""

    pool_ids: tuple[str, ...]
    b: tuple[float, ...]
    sizes: tuple[float, ...]
    tau_hat: tuple[float, ...]
    delta_hat: tuple[float, ...]
    N_hat: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_spec(cls, spec: MixtureSpec) -> "MixtureParams":
        pools = sorted(spec.pools, key=lambda q: q.pool_id)
        n_hat = spec.combined_size
        tau_hat = tuple(rescale_tau(q.params.tau, q.size, n_hat, spec.tau_exponent)
                        for q in pools)
        return cls(
            pool_ids=tuple(q.pool_id for q in pools),
            b=tuple(q.params.b for q in pools),
            sizes=tuple(q.size for q in pools),
            tau_hat=tau_hat,
            delta_hat=tuple(delta_from_tau(t) for t in tau_hat),
            N_hat=n_hat,
        )

    @property
    def p(self) -> int:
        return len(self.b)

    @property
    def equal_sizes(self) -> bool:
        return all(s == self.sizes[0] for s in self.sizes)

    def weighted_mean(self, values) -> float:
        if self.equal_sizes:
            return math.fsum(values) / self.p
        return math.fsum(s * v for s, v in zip(self.sizes, values)) / self.N_hat

    def b_eff_table(self, k: int) -> np.ndarray:
        """Effective exponent for epochs 1..k."""
        cached = self._cache.get("b_eff")
        if cached is not None and len(cached) >= k:
            return cached[:k]
        per_pool = [decayed_exponents(b, dl, k) for b, dl in zip(self.b, self.delta_hat)]
        table = np.array([self.weighted_mean([col[j] for col in per_pool]) for j in range(k)])
        self._cache["b_eff"] = table
        return table

    def b_eff(self, epoch: int) -> float:
        if epoch < 1:
            raise DomainError(f"epoch must be >= 1, got {epoch}")
        return float(self.b_eff_table(epoch)[epoch - 1])


def rescale_tau(tau: float, own_size: float, combined_size: float,
                exponent: float = 1.0) -> float:
    """Half-life of a pool once merged into a larger one."""
    if combined_size < own_size:
        raise DomainError(f"combined size {combined_size} is smaller than pool size {own_size}")
    if not tau > 0:
        raise DomainError(f"half-life tau must be positive, got {tau}")
    ratio = combined_size / own_size
    # integer multiples of the pool size map to exact integer ratios
    r = round(ratio)
    if abs(ratio - r) <= 4 * sys.float_info.epsilon * r:
        ratio = float(r)
    if exponent != 1.0:
        ratio = ratio ** exponent
    return ratio * tau


def effective_utility(spec: MixtureSpec, epoch: int) -> float:
    return spec.params.b_eff(epoch)


def mixture_normalizer(spec: MixtureSpec) -> float:
    """Shared ``a`` of the pools (size-weighted mean, with a warning, if they differ)."""
    values = [q.params.a for q in spec.pools]
    if all(v == values[0] for v in values):
        return values[0]
    logger.warning("pools carry different normalisers %s; using their size-weighted mean", values)
    mp = spec.params
    by_id = {q.pool_id: q.params.a for q in spec.pools}
    return mp.weighted_mean([by_id[i] for i in mp.pool_ids])


def mixture_floor(spec: MixtureSpec) -> float:
    """Size-weighted mean irreducible error of the pools."""
    mp = spec.params
    by_id = {q.pool_id: q.params.d for q in spec.pools}
    return mp.weighted_mean([by_id[i] for i in mp.pool_ids])


def eval_mixture_loss(spec: MixtureSpec, a: float, d: float, total_samples: float) -> float:
    if not total_samples > 0:
        raise DomainError(f"total_samples must be positive, got {total_samples}")
    mp = spec.params
    incs = log_increments(mp.N_hat, total_samples)
    return loss_from_exponents(a, d, mp.b_eff_table(len(incs)), incs)


def eval_mixture_losses(spec: MixtureSpec, a: float, d: float, totals) -> np.ndarray:
    return np.array([eval_mixture_loss(spec, a, d, n) for n in totals])


# --- effective-data formulations -------------------------------------------


@dataclass(frozen=True)
class EffectiveDataState:
    """Unique samples ``eta``, samples ``gamma`` into epoch ``k``, decay ``delta``."""

    eta: float
    gamma: float
    delta: float
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"epoch index must be >= 1, got {self.k}")
        if not 0 <= self.gamma <= self.eta:
            raise DomainError(f"need 0 <= gamma <= eta, got gamma={self.gamma}, eta={self.eta}")
        if not 0 < self.delta <= 1:
            raise DomainError(f"decay must lie in (0, 1], got {self.delta}")


def n_effective(state: EffectiveDataState) -> float:
    powers = delta_powers(state.delta, state.k)
    return float(state.eta * math.fsum(powers[:-1]) + state.gamma * powers[-1])


def b_eff_effective_data(b1: float, delta1: float, b2: float, delta2: float) -> float:
    """Exponent of a two-bucket mix when effective data, not utility, decays."""
    for dl in (delta1, delta2):
        if not 0 < dl <= 1:
            raise DomainError(f"decay must lie in (0, 1], got {dl}")
    return (delta1 * b1 + delta2 * b2) / (delta1 + delta2)


def _f3_exponents(mp: MixtureParams, k: int) -> np.ndarray:
    pw = [delta_powers(dl, k) for dl in mp.delta_hat]
    out = np.empty(k)
    for j in range(k):
        num = mp.weighted_mean([b * col[j] for b, col in zip(mp.b, pw)])
        den = mp.weighted_mean([col[j] for col in pw])
        out[j] = num / den
    return out


def _f3_effective_totals(mp: MixtureParams, total_samples: float, k: int) -> np.ndarray:
    """Combined effective data at the end of epochs 1..k-1 and at ``total_samples``."""
    if k == 1:
        return np.array([total_samples], dtype=np.float64)
    gamma = total_samples - (k - 1) * mp.N_hat
    pw = [delta_powers(dl, k) for dl in mp.delta_hat]
    out = np.empty(k)
    for j in range(1, k):
        out[j - 1] = math.fsum(n * math.fsum(col[:j]) for n, col in zip(mp.sizes, pw))
    out[k - 1] = out[k - 2] + math.fsum(n / mp.N_hat * gamma * col[k - 1]
                                        for n, col in zip(mp.sizes, pw))
    return out


def eval_loss_f3(spec: MixtureSpec, a: float, d: float, total_samples: float) -> float:
    """Mixture loss when both utility and effective data decay.

    Effective data per pool accrues at ``delta_hat_i**(j-1)`` per sample in
    epoch ``j``; the exponent of epoch ``j`` is the effective-data-weighted mean
    of the pools' ``b``.
    """
    if not total_samples > 0:
        raise DomainError(f"total_samples must be positive, got {total_samples}")
    mp = spec.params
    k = epoch_count(mp.N_hat, total_samples)
    n_eff = _f3_effective_totals(mp, total_samples, k)
    incs = np.log(np.concatenate(([n_eff[0]], n_eff[1:] / n_eff[:-1])))
    return loss_from_exponents(a, d, _f3_exponents(mp, k), incs)


def step_log_ratios(spec: MixtureSpec, n0: float, epoch: int) -> tuple[float, float]:
    """``log(y1 / y0)`` for one sample taken at state ``n0`` during ``epoch``.

    Returns the decayed-utility value ``b_eff * log(1 + 1/n0)`` and the
    decaying-data value ``b_w * log(1 + delta_eff/n0)``, where ``b_w`` is the
    effective-data-weighted exponent and ``delta_eff`` the mean per-sample
    effective data. Both agree to O(1/n0) relative.
    """
    if not n0 > 0:
        raise DomainError(f"n0 must be positive, got {n0}")
    mp = spec.params
    utility = mp.b_eff(epoch) * math.log1p(1.0 / n0)
    dpow = [delta_powers(dl, epoch)[-1] for dl in mp.delta_hat]
    delta_eff = mp.weighted_mean(dpow)
    b_w = _f3_exponents(mp, epoch)[-1]
    data = b_w * math.log1p(delta_eff / n0)
    return utility, data
