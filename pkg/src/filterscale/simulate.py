"""Independent oracles for the closed-form laws.

The integrators march the per-sample law ``dy/dn = (y - d) / n * b`` forward in
``u = log n`` with classical RK4, holding the exponent fixed over each step.
They never evaluate the epoch-product formula: the exponent of every step is
looked up from the epoch (and, for mixtures, the pool) that step draws from.

The curve is anchored at ``n_start = min(1, step_fraction * N)`` with the
classical value ``a * n_start**b + d``; at one sample this is ``a + d``
whatever the exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import EpochSchedule, UtilityParams, eval_loss
from .fitting import PoolObservations
from .mixture import MixtureSpec, rescale_tau


class ConfigurationError(ValueError):
    """Simulation settings that cannot resolve the requested run."""


@dataclass(frozen=True)
class SimConfig:
    step_fraction: float = 1e-3
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.step_fraction <= 1:
            raise ConfigurationError(
                f"step_fraction must lie in (0, 1] to resolve an epoch, got {self.step_fraction}")
        if not self.noise_sigma >= 0:
            raise ConfigurationError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")

    @property
    def oracle_grade(self) -> bool:
        return self.step_fraction <= 0.01


@dataclass(frozen=True)
class Trajectory:
    samples_seen: np.ndarray
    y: np.ndarray

    def value_at(self, n: float) -> float:
        """Value at a node of the integration grid."""
        i = int(np.searchsorted(self.samples_seen, n))
        for j in (i - 1, i):
            if 0 <= j < self.samples_seen.size and math.isclose(self.samples_seen[j], n,
                                                                rel_tol=1e-12):
                return float(self.y[j])
        raise KeyError(f"{n} is not a node of this trajectory")

    @property
    def endpoint(self) -> tuple[float, float]:
        return float(self.samples_seen[-1]), float(self.y[-1])


def _epochs_of(nodes: np.ndarray, pool_size: float) -> np.ndarray:
    q = nodes / pool_size
    r = np.round(q)
    on_boundary = (r >= 1) & (np.abs(q - r) <= 1e-12 * r)
    return np.maximum(1, np.where(on_boundary, r, np.ceil(q))).astype(np.int64)


def _node_grid(pool_size: float, total: float, step_fraction: float, n_start: float,
               checkpoints: Sequence[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Integration nodes and the epoch of each interval between them.

    Log-spaced nodes in the first epoch, ``1/step_fraction`` evenly spaced
    nodes per later epoch; epoch boundaries and checkpoints are always nodes.
    """
    first_end = min(pool_size, total)
    parts = [np.array([n_start])]
    if first_end > n_start:
        span = math.log(first_end / n_start)
        m = max(1, math.ceil(span / step_fraction))
        seg = n_start * np.exp(np.linspace(0.0, span, m + 1)[1:])
        seg[-1] = first_end
        parts.append(seg)
    k = int(_epochs_of(np.array([total]), pool_size)[0])
    per_epoch = max(1, math.ceil(1.0 / step_fraction - 1e-9))
    for j in range(2, k + 1):
        seg = pool_size * ((j - 1) + np.arange(1, per_epoch + 1) / per_epoch)
        seg[-1] = j * pool_size
        if j == k:
            seg = np.append(seg[seg < total], total)
        parts.append(seg)
    nodes = np.concatenate(parts)
    extra = [c for c in checkpoints if n_start < c < total]
    if extra:
        nodes = np.unique(np.concatenate([nodes, extra]))
        keep = np.ones(nodes.size, dtype=bool)
        keep[1:] = np.diff(nodes) > 1e-12 * nodes[1:]
        nodes = nodes[keep]
    return nodes, _epochs_of(nodes[1:], pool_size)


def _anchor(pool_size: float, cfg: SimConfig, total: float) -> float:
    n_start = min(1.0, cfg.step_fraction * pool_size)
    if total < n_start:
        raise ConfigurationError(f"budget {total} is below the first integration node {n_start}")
    return n_start


def integrate_single(params: UtilityParams, pool_size: float, total_samples: float,
                     cfg: SimConfig | None = None,
                     checkpoints: Sequence[float] = ()) -> Trajectory:
    cfg = cfg or SimConfig()
    n_start = _anchor(pool_size, cfg, total_samples)
    nodes, epochs = _node_grid(pool_size, total_samples, cfg.step_fraction, n_start, checkpoints)
    beta = params.b * 0.5 ** ((epochs - 1) / params.tau)
    h = np.log(nodes[1:] / nodes[:-1])
    z0 = params.a * n_start ** params.b
    z = kernels.rk4_product(z0, beta, h)
    return Trajectory(nodes, z + params.d)


def integrate_mixture(spec: MixtureSpec, a: float, d: float, total_samples: float,
                      cfg: SimConfig | None = None,
                      checkpoints: Sequence[float] = ()) -> Trajectory:
    """Round-robin over pools: each step is split into one sub-step per pool.

    Sub-steps are proportional to pool size, so every pool advances through
    its own data at the same fraction per step, and the pools are visited in
    the order they are listed.
    """
    cfg = cfg or SimConfig()
    pools = spec.pools
    n_hat = math.fsum(q.size for q in pools)
    n_start = _anchor(n_hat, cfg, total_samples)
    nodes, epochs = _node_grid(n_hat, total_samples, cfg.step_fraction, n_start, checkpoints)

    sizes = np.array([q.size for q in pools])
    cuts = np.cumsum(sizes) / n_hat
    cuts[-1] = 1.0
    lo, hi = nodes[:-1, None], nodes[1:, None]
    sub = lo + cuts[None, :] * (hi - lo)
    sub[:, -1] = nodes[1:]
    starts = np.concatenate([nodes[:-1, None], sub[:, :-1]], axis=1)
    h = np.log(sub / starts).ravel()

    b = np.array([q.params.b for q in pools])
    tau_hat = np.array([rescale_tau(q.params.tau, q.size, n_hat, spec.tau_exponent)
                        for q in pools])
    beta = (b[None, :] * 0.5 ** ((epochs[:, None] - 1) / tau_hat[None, :])).ravel()

    b_start = float(np.dot(sizes, b) / n_hat)
    z0 = a * n_start ** b_start
    z = kernels.rk4_product(z0, beta, h)[:: len(pools)]
    return Trajectory(nodes, z + d)


def _noisy(values: np.ndarray, cfg: SimConfig) -> np.ndarray:
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.seed)
        values = values + rng.normal(0.0, cfg.noise_sigma, size=values.size)
    return np.clip(values, 0.0, 1.0)


def _check_budgets(budgets):
    budgets = [float(x) for x in budgets]
    if not budgets or any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be a non-empty strictly ascending list")
    return budgets


def generate_observations(params: UtilityParams, pool_size: float, budgets: Sequence[float],
                          cfg: SimConfig | None = None,
                          pool_id: str = "synthetic") -> PoolObservations:
    """Closed-form curve sampled at ``budgets`` plus seeded Gaussian noise."""
    cfg = cfg or SimConfig()
    budgets = _check_budgets(budgets)
    clean = np.array([eval_loss(params, EpochSchedule(pool_size, n)) for n in budgets])
    return PoolObservations(pool_id, pool_size, budgets, _noisy(clean, cfg))


def generate_mixture_observations(spec: MixtureSpec, a: float, d: float,
                                  budgets: Sequence[float], cfg: SimConfig | None = None,
                                  pool_id: str = "merged") -> PoolObservations:
    """Merged-pool log produced by the round-robin integrator."""
    cfg = cfg or SimConfig()
    budgets = _check_budgets(budgets)
    traj = integrate_mixture(spec, a, d, budgets[-1], cfg, checkpoints=budgets)
    clean = np.array([traj.value_at(n) for n in budgets])
    return PoolObservations(pool_id, spec.combined_size, budgets, _noisy(clean, cfg))
