"""Exhaustive grid-search estimation of scaling constants.

The normaliser ``a`` is shared by all pools; ``b``, ``tau`` and ``d`` are
fitted per pool. For every candidate ``a`` each pool is minimised
independently and the per-pool minima are summed; the ``a`` with the lowest
total wins. Ties go to the lexicographically smallest grid index of
``(a, b, tau, d)``, which keeps the result independent of evaluation order.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    DomainError,
    EpochSchedule,
    UtilityParams,
    delta_from_tau,
    delta_powers,
    eval_loss,
    log_increments,
)
from .mixture import MixtureSpec, eval_mixture_loss, mixture_floor, mixture_normalizer

DEFAULT_D_VALUES = (0.01, 0.02, 0.05, 0.10, 0.2)


class SearchError(RuntimeError):
    """The grid search could not produce a minimiser."""


@dataclass(frozen=True)
class PoolObservations:
    """Measured error of a model trained on one pool, at several budgets."""

    pool_id: str
    pool_size: float
    samples_seen: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        n = np.array(self.samples_seen, dtype=np.float64)
        e = np.array(self.errors, dtype=np.float64)
        if n.ndim != 1 or n.shape != e.shape:
            raise DomainError(f"pool {self.pool_id!r}: samples and errors must be equal-length 1-d")
        if n.size == 0:
            raise DomainError(f"pool {self.pool_id!r}: no observations")
        if not self.pool_size > 0:
            raise DomainError(f"pool {self.pool_id!r}: pool size must be positive")
        if np.any(n <= 0):
            raise DomainError(f"pool {self.pool_id!r}: samples_seen must be positive")
        if np.any(np.diff(n) <= 0):
            raise DomainError(f"pool {self.pool_id!r}: samples_seen must be strictly increasing")
        if np.any((e < 0) | (e > 1)) or not np.all(np.isfinite(e)):
            raise DomainError(f"pool {self.pool_id!r}: errors must lie in [0, 1]")
        n.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "samples_seen", n)
        object.__setattr__(self, "errors", e)

    @classmethod
    def from_points(cls, pool_id: str, pool_size: float, points) -> "PoolObservations":
        points = list(points)
        return cls(pool_id, pool_size, [p[0] for p in points], [p[1] for p in points])

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.samples_seen.tolist(), self.errors.tolist()))

    def __len__(self):
        return self.samples_seen.size


_VERSION_RE = re.compile(
    r"a=lin:(?P<alo>[^:]+):(?P<ahi>[^:]+):(?P<an>\d+);"
    r"b=geom:(?P<blo>[^:]+):(?P<bhi>[^:]+):(?P<bn>\d+);"
    r"tau=int:(?P<tlo>\d+):(?P<thi>\d+);"
    r"d=(?P<d>[^;]*)$"
)


@dataclass(frozen=True, eq=False)
class ParamGrid:
    """Discrete search space. Every axis is sorted ascending."""

    a_values: np.ndarray
    b_values: np.ndarray
    tau_values: np.ndarray
    d_values: np.ndarray
    version: str

    @classmethod
    def build(cls, a_range=(0.001, 1.0), a_points=100, b_range=(0.005, 0.5), b_points=100,
              tau_range=(1, 50), d_values=DEFAULT_D_VALUES) -> "ParamGrid":
        """``a`` linear, ``|b|`` geometric, ``tau`` integer steps, ``d`` as given.

        ``b_range`` is given as magnitudes; the stored values are negative.
        """
        alo, ahi = map(float, a_range)
        blo, bhi = map(float, b_range)
        tlo, thi = map(int, tau_range)
        if alo <= 0 or blo <= 0 or tlo <= 0 or any(v < 0 for v in d_values):
            raise DomainError("grid bounds must be positive (d nonnegative)")
        a = np.linspace(alo, ahi, a_points) if a_points > 1 else np.full(a_points, alo)
        b = -np.geomspace(bhi, blo, b_points) if b_points > 1 else np.full(b_points, -blo)
        tau = np.arange(tlo, thi + 1, dtype=np.float64)
        d = np.array(sorted(float(v) for v in d_values))
        version = (f"a=lin:{alo!r}:{ahi!r}:{a_points};b=geom:{blo!r}:{bhi!r}:{b_points};"
                   f"tau=int:{tlo}:{thi};d={','.join(repr(float(v)) for v in d)}")
        return cls(a, b, tau, d, version)

    @classmethod
    def default(cls) -> "ParamGrid":
        return cls.build()

    @classmethod
    def from_version(cls, version: str) -> "ParamGrid":
        m = _VERSION_RE.match(version)
        if not m:
            raise DomainError(f"unrecognised grid version {version!r}")
        d = [float(v) for v in m["d"].split(",") if v]
        return cls.build((float(m["alo"]), float(m["ahi"])), int(m["an"]),
                         (float(m["blo"]), float(m["bhi"])), int(m["bn"]),
                         (int(m["tlo"]), int(m["thi"])), d)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.a_values.size, self.b_values.size, self.tau_values.size, self.d_values.size)

    def check_nonempty(self):
        if min(self.shape) == 0:
            raise SearchError(f"empty search grid (sizes a,b,tau,d = {self.shape})")


@dataclass(frozen=True)
class PoolFit:
    b: float
    tau: float
    d: float
    l2_loss: float


@dataclass(frozen=True)
class FitResult:
    a: float
    per_pool: dict[str, PoolFit]
    total_l2_loss: float
    grid_version: str

    def params(self, pool_id: str) -> UtilityParams:
        try:
            f = self.per_pool[pool_id]
        except KeyError:
            raise DomainError(f"pool {pool_id!r} not in fit result") from None
        return UtilityParams(self.a, f.b, f.d, f.tau)


def l2_fit_loss(params: UtilityParams, obs: PoolObservations) -> float:
    acc = 0.0
    for n, err in obs.points:
        r = eval_loss(params, EpochSchedule(obs.pool_size, n)) - err
        acc += r * r
    return acc


def reducible_table(obs: PoolObservations, b_values, tau_values) -> np.ndarray:
    """``E[b, tau, p] = exp(sum_j b * delta**(j-1) * log_ratio_j)`` at unit ``a``.

    Arithmetic mirrors ``core.loss_from_exponents`` term for term, so
    ``a * E + d`` is bit-identical to ``eval_loss``.
    """
    incs = [log_increments(obs.pool_size, n) for n in obs.samples_seen]
    k = max(len(v) for v in incs)
    L = np.zeros((len(incs), k))
    for p, v in enumerate(incs):
        L[p, :len(v)] = v
    b = np.asarray(b_values, dtype=np.float64)
    dpow = np.array([delta_powers(delta_from_tau(t), k) for t in tau_values]).reshape(-1, k)
    acc = np.zeros((b.size, dpow.shape[0], L.shape[0]))
    for j in range(k):
        ex = b[:, None] * dpow[None, :, j]
        acc += ex[:, :, None] * L[None, None, :, j]
    return np.exp(acc)


@dataclass
class _PoolTable:
    """Per-pool minimum over (b, d) for every (a, tau)."""

    best: np.ndarray
    arg: np.ndarray
    nd: int
    _rows: dict = field(default_factory=dict)

    def select(self, ia: int, it: int | None = None) -> tuple[int, int, int, float]:
        """Lexicographically smallest (b, tau, d) among the minimisers at ``a`` index ``ia``."""
        key = (ia, it)
        if key in self._rows:
            return self._rows[key]
        row = self.best[ia]
        if it is None:
            m = row.min()
            if not math.isfinite(m):
                raise SearchError("no finite loss on the grid")
            cands = np.flatnonzero(row == m)
            it = min(cands, key=lambda t: (self.arg[ia, t] // self.nd, t, self.arg[ia, t] % self.nd))
        flat = int(self.arg[ia, it])
        out = (flat // self.nd, int(it), flat % self.nd, float(row[it]))
        self._rows[key] = out
        return out


def _pool_table(obs: PoolObservations, a_values, grid: ParamGrid) -> _PoolTable:
    E = reducible_table(obs, grid.b_values, grid.tau_values)
    best, arg = kernels.grid_losses(E, obs.errors, np.asarray(a_values, dtype=np.float64),
                                    grid.d_values)
    return _PoolTable(best, arg, grid.d_values.size)


def _pool_fit(grid: ParamGrid, sel) -> PoolFit:
    ib, it, jd, loss = sel
    return PoolFit(float(grid.b_values[ib]), float(grid.tau_values[it]),
                   float(grid.d_values[jd]), loss)


def fit_single_pool(obs: PoolObservations, a_fixed: float,
                    grid: ParamGrid | None = None) -> PoolFit:
    """Best (b, tau, d) for one pool at a fixed normaliser."""
    grid = grid or ParamGrid.default()
    grid.check_nonempty()
    table = _pool_table(obs, [a_fixed], grid)
    return _pool_fit(grid, table.select(0))


def fit_joint(all_obs: Sequence[PoolObservations], grid: ParamGrid | None = None, *,
              shared_tau: bool = False, n_jobs: int = 1) -> FitResult:
    """Shared ``a`` with per-pool (b, tau, d).

    ``shared_tau`` constrains all pools to one half-life. ``n_jobs`` spreads
    pools over threads; the result does not depend on it.
    """
    grid = grid or ParamGrid.default()
    all_obs = list(all_obs)
    if not all_obs:
        raise DomainError("need at least one pool to fit")
    ids = [o.pool_id for o in all_obs]
    if len(set(ids)) != len(ids):
        raise DomainError(f"duplicate pool ids: {ids}")
    grid.check_nonempty()

    def work(obs):
        return _pool_table(obs, grid.a_values, grid)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            tables = list(ex.map(work, all_obs))
    else:
        tables = [work(o) for o in all_obs]

    na, _, nt, _ = grid.shape
    if shared_tau:
        totals = np.array([[math.fsum(t.best[ia, it] for t in tables) for it in range(nt)]
                           for ia in range(na)])
        totals = np.where(np.isnan(totals), np.inf, totals)
        flat = int(np.argmin(totals))
        if not math.isfinite(totals.flat[flat]):
            raise SearchError("no finite loss on the grid")
        ia, it = divmod(flat, nt)
        sels = [t.select(ia, it) for t in tables]
    else:
        totals = np.empty(na)
        for ia in range(na):
            try:
                totals[ia] = math.fsum(t.select(ia)[3] for t in tables)
            except SearchError:
                totals[ia] = np.inf
        ia = int(np.argmin(totals))
        if not math.isfinite(totals[ia]):
            raise SearchError("no finite loss on the grid")
        sels = [t.select(ia) for t in tables]

    per_pool = {o.pool_id: _pool_fit(grid, s) for o, s in zip(all_obs, sels)}
    return FitResult(
        a=float(grid.a_values[ia]),
        per_pool=per_pool,
        total_l2_loss=math.fsum(p.l2_loss for p in per_pool.values()),
        grid_version=grid.version,
    )


def sweep_k_exponent(merged_obs: PoolObservations, spec: MixtureSpec,
                     k_grid: Sequence[float], a: float | None = None,
                     d: float | None = None) -> list[tuple[float, float]]:
    """L2 loss of mixture predictions when half-lives scale as ``(N_hat/N)**k``."""
    if len(k_grid) == 0:
        raise DomainError("k grid is empty")
    a = mixture_normalizer(spec) if a is None else a
    d = mixture_floor(spec) if d is None else d
    out = []
    for k in sorted(float(v) for v in k_grid):
        sk = spec.with_tau_exponent(k)
        acc = 0.0
        for n, err in merged_obs.points:
            r = eval_mixture_loss(sk, a, d, n) - err
            acc += r * r
        out.append((k, acc))
    return out
