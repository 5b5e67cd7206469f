"""Hot numeric loops.

Each kernel exists twice: a plain-loop version that numba compiles, and a
vectorised numpy version. ``grid_losses`` and ``rk4_product`` resolve to one of
them at import time (see ``_backend``); both variants stay importable so they
can be compared directly.
"""

import numpy as np

from ._backend import HAVE_NUMBA, USE_NUMBA, njit

# Largest |beta * h| taken in a single RK4 stage; bigger steps are subdivided.
RK4_MAX_STAGE = 1e-2


def _grid_losses_loop(E, y, a_grid, d_grid):
    nb, nt, npts = E.shape
    na = a_grid.shape[0]
    nd = d_grid.shape[0]
    best = np.full((na, nt), np.inf)
    arg = np.zeros((na, nt), dtype=np.int64)
    for ia in range(na):
        a = a_grid[ia]
        for ib in range(nb):
            for it in range(nt):
                for jd in range(nd):
                    d = d_grid[jd]
                    acc = 0.0
                    for p in range(npts):
                        r = a * E[ib, it, p] + d - y[p]
                        acc += r * r
                    # strict < keeps the first (lowest b, then d index) on ties
                    if acc < best[ia, it]:
                        best[ia, it] = acc
                        arg[ia, it] = ib * nd + jd
    return best, arg


def grid_losses_numpy(E, y, a_grid, d_grid):
    """Squared-error table minimised over (b, d) for every (a, tau).

    ``E[b, tau, p]`` holds the reducible term ``exp(log y_red)`` of point ``p``
    at unit normaliser. Returns ``best[a, tau]`` and the flat ``b * nd + d``
    index achieving it.
    """
    E = np.asarray(E, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a_grid = np.asarray(a_grid, dtype=np.float64)
    d_grid = np.asarray(d_grid, dtype=np.float64)
    nb, nt, npts = E.shape
    nd = d_grid.shape[0]
    best = np.empty((a_grid.shape[0], nt))
    arg = np.empty((a_grid.shape[0], nt), dtype=np.int64)
    rows = np.arange(nt)
    for ia, a in enumerate(a_grid):
        acc = np.zeros((nb, nt, nd))
        for p in range(npts):
            r = (a * E[:, :, p])[:, :, None] + d_grid[None, None, :] - y[p]
            acc += r * r
        flat = acc.transpose(1, 0, 2).reshape(nt, nb * nd)
        flat = np.where(np.isnan(flat), np.inf, flat)
        idx = np.argmin(flat, axis=1)
        best[ia] = flat[rows, idx]
        arg[ia] = idx
    return best, arg


def _rk4_product_loop(z0, beta, h):
    n = beta.shape[0]
    z = np.empty(n + 1)
    z[0] = z0
    cur = z0
    for s in range(n):
        b = beta[s]
        span = abs(b * h[s])
        m = 1
        if span > RK4_MAX_STAGE:
            m = int(np.ceil(span / RK4_MAX_STAGE))
        hh = h[s] / m
        for _ in range(m):
            k1 = b * cur
            k2 = b * (cur + 0.5 * hh * k1)
            k3 = b * (cur + 0.5 * hh * k2)
            k4 = b * (cur + hh * k3)
            cur = cur + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        z[s + 1] = cur
    return z


def rk4_product_numpy(z0, beta, h):
    """Integrate dz/du = beta_s * z with classical RK4 over steps ``h``.

    ``beta`` is constant within each step. Returns z at every step boundary,
    including the initial value.
    """
    beta = np.asarray(beta, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    span = np.abs(beta * h)
    m = np.maximum(1, np.ceil(span / RK4_MAX_STAGE)).astype(np.int64)
    x = beta * (h / m)
    # RK4 applied to a linear constant-coefficient step is this polynomial
    growth = 1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)))
    growth = np.power(growth, m)
    out = np.empty(beta.shape[0] + 1)
    out[0] = z0
    out[1:] = z0 * np.cumprod(growth)
    return out


if HAVE_NUMBA:
    grid_losses_numba = njit(_grid_losses_loop)
    rk4_product_numba = njit(_rk4_product_loop)
else:  # pragma: no cover
    grid_losses_numba = None
    rk4_product_numba = None

if USE_NUMBA:
    grid_losses = grid_losses_numba
    rk4_product = rk4_product_numba
else:
    grid_losses = grid_losses_numpy
    rk4_product = rk4_product_numpy
