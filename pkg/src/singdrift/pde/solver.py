"""Forward Cauchy and backward terminal solvers for dv/dt = Lap v - b.grad v + source.

Diffusion is backward Euler, diagonalised exactly by the type-I sine transform
(the eigenbasis of the Dirichlet Laplacian on the vertex grid).  Advection is
explicit first-order upwind, applied before the diffusion solve in each step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.fft import dstn, idstn
from scipy.ndimage import map_coordinates

from ..errors import InvalidParameter, RejectedSingularField, StabilityViolation
from ..fields.core import DriftField, jitter_off_locus
from ..rawblock import RawBlock
from .grid import SpaceTimeGrid

CFL_LIMIT = 0.5

ScalarFn = Callable[[np.ndarray], np.ndarray]
SourceFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class GridSolution:
    """Saved time levels of a grid solve, ordered by increasing physical time."""

    grid: SpaceTimeGrid
    times: np.ndarray
    levels: np.ndarray  # (n_saved, *grid.shape)
    sup_history: np.ndarray  # sup |v| after every step, in marching order (index 0 = data)
    boundary_leak: float
    direction: str = "forward"
    field_id: str = "custom"
    meta: dict = field(default_factory=dict)

    def level(self, k: int) -> np.ndarray:
        return self.levels[k]

    @property
    def initial(self) -> np.ndarray:
        """Data the solve started from (initial or terminal datum)."""
        return self.levels[0] if self.direction == "forward" else self.levels[-1]

    @property
    def final(self) -> np.ndarray:
        return self.levels[-1] if self.direction == "forward" else self.levels[0]

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise InvalidParameter(f"time {t} is not a saved level")
        return k

    def gradient(self, k: int) -> np.ndarray:
        """Centered differences with the Dirichlet zero padding, shape (d, *grid.shape)."""
        return centered_gradient(self.levels[k], self.grid.h_x)

    def interpolate(self, k: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        padded = np.pad(self.levels[k], 1)
        coords = ((x.reshape(-1, self.grid.d) + self.grid.half_width) / self.grid.h_x).T
        vals = map_coordinates(padded, coords, order=1, mode="constant", cval=0.0)
        return vals.reshape(x.shape[:-1])

    def to_block(self) -> RawBlock:
        g = self.grid
        d = g.d
        dt = float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0
        return RawBlock(
            "grid-solution",
            self.levels,
            (float(self.times[0]),) + (-g.half_width + g.h_x,) * d,
            (dt,) + (g.h_x,) * d,
            {"grid": g.to_record(), "times": self.times.tolist(), "direction": self.direction, "field_id": self.field_id},
        )


def centered_gradient(v: np.ndarray, h: float) -> np.ndarray:
    vp = np.pad(v, 1)
    d = v.ndim
    out = np.empty((d,) + v.shape)
    core = [slice(1, -1)] * d
    for i in range(d):
        lo, hi = list(core), list(core)
        lo[i], hi[i] = slice(0, -2), slice(2, None)
        out[i] = (vp[tuple(hi)] - vp[tuple(lo)]) / (2 * h)
    return out


class _GridDrift:
    """Drift sampled on the grid; spatial samples cached for separable fields."""

    def __init__(self, b: DriftField, grid: SpaceTimeGrid):
        if b.sup_bound is None:
            raise RejectedSingularField(
                f"field {b.field_id} is not declared bounded; only mollified or bounded fields enter the solver"
            )
        if b.d != grid.d:
            raise InvalidParameter("drift and grid dimensions differ")
        self.b = b
        self.grid = grid
        self.zero = b.field_id == "zero" or b.sup_bound == 0.0
        self.pts = None
        self.static = None
        self.tf = None
        if self.zero:
            return
        pts = grid.points()
        if b.stationary:
            self.static = np.moveaxis(np.asarray(b(0.0, pts)), -1, 0)
        elif b.separable is not None:
            self.tf = b.separable[0]
            self.static = np.moveaxis(np.asarray(b.separable[1](pts)), -1, 0)
        else:
            self.pts = pts
        if self.static is not None:
            self.pos = np.maximum(self.static, 0.0)
            self.neg = np.minimum(self.static, 0.0)
            self.static_max = float(np.sqrt(np.max(np.sum(self.static**2, axis=0))))

    def parts(self, t: float):
        """(positive part, negative part, time scale, sup |b|) at time t."""
        if self.static is not None:
            s = 1.0 if self.tf is None else float(self.tf(np.asarray(t)))
            if s >= 0:
                return self.pos, self.neg, s, abs(s) * self.static_max
            return self.neg, self.pos, s, abs(s) * self.static_max
        vals = np.moveaxis(np.asarray(self.b(t, self.pts)), -1, 0)
        return np.maximum(vals, 0.0), np.minimum(vals, 0.0), 1.0, float(np.sqrt(np.max(np.sum(vals**2, axis=0))))


def _upwind(v: np.ndarray, pos: np.ndarray, neg: np.ndarray, h: float) -> np.ndarray:
    """sum_i b_i D_i v with one-sided differences taken against the flow."""
    d = v.ndim
    vp = np.pad(v, 1)
    out = np.zeros_like(v)
    core = [slice(1, -1)] * d
    for i in range(d):
        lo, hi = list(core), list(core)
        lo[i], hi[i] = slice(0, -2), slice(2, None)
        out += pos[i] * (v - vp[tuple(lo)])
        out += neg[i] * (vp[tuple(hi)] - v)
    out /= h
    return out


def _laplace_multiplier(grid: SpaceTimeGrid) -> np.ndarray:
    n = grid.intervals
    lam1 = (4.0 / grid.h_x**2) * np.sin(np.pi * np.arange(1, n) / (2 * n)) ** 2
    lam = np.zeros(grid.shape)
    for i in range(grid.d):
        shape = [1] * grid.d
        shape[i] = n - 1
        lam = lam + lam1.reshape(shape)
    return 1.0 / (1.0 + grid.h_t * lam)


def _boundary_max(v: np.ndarray) -> float:
    m = 0.0
    for i in range(v.ndim):
        m = max(m, float(np.abs(np.take(v, 0, axis=i)).max()), float(np.abs(np.take(v, -1, axis=i)).max()))
    return m


def sample_on_grid(f, grid: SpaceTimeGrid) -> np.ndarray:
    if callable(f):
        vals = np.asarray(f(grid.points()), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    if vals.shape != grid.shape:
        raise InvalidParameter(f"data has shape {vals.shape}, grid needs {grid.shape}")
    if not np.all(np.isfinite(vals)):
        raise InvalidParameter("data must be finite on the grid")
    return vals


def product_source(f_field: DriftField | None, h: Callable[[float, np.ndarray], np.ndarray], cell: float) -> SourceFn:
    """(t, x) -> |f(t, x)| h(t, x); samples on the singular locus of f are shifted by half a cell."""

    def src(t, x):
        hv = np.asarray(h(t, x), dtype=float)
        if f_field is None:
            return hv
        tj, xj, _ = jitter_off_locus(t, x, f_field.locus, cell)
        return np.sqrt(f_field.norm_sq(tj, xj)) * hv

    return src


def _march(
    drift: _GridDrift,
    v0: np.ndarray,
    grid: SpaceTimeGrid,
    source: SourceFn | None,
    phys_time: Callable[[int], float],
    workers: int,
):
    grid.check_time_step()
    mult = _laplace_multiplier(grid)
    ht, hx = grid.h_t, grid.h_x
    pts = grid.points() if source is not None else None
    v = v0.copy()
    saved_idx, saved = [0], [v.copy()]
    sup_hist = np.empty(grid.steps + 1)
    sup_hist[0] = float(np.abs(v).max())
    leak = _boundary_max(v)
    for k in range(grid.steps):
        t = phys_time(k)
        rhs = v
        if not drift.zero:
            pos, neg, s, bmax = drift.parts(t)
            cfl = bmax * ht / hx
            if cfl > CFL_LIMIT:
                raise StabilityViolation(f"advection CFL number {cfl:.3f} exceeds {CFL_LIMIT} at t={t:.4g}")
            if s != 0.0:
                rhs = v - (ht * abs(s)) * _upwind(v, pos, neg, hx)
        if source is not None:
            rhs = rhs + ht * np.asarray(source(phys_time(k + 1), pts), dtype=float)
        v = idstn(dstn(rhs, type=1, workers=workers) * mult, type=1, workers=workers)
        sup_hist[k + 1] = float(np.abs(v).max())
        leak = max(leak, _boundary_max(v))
        if (k + 1) % grid.save_every == 0 or k + 1 == grid.steps:
            saved_idx.append(k + 1)
            saved.append(v.copy())
    return np.array(saved_idx), np.stack(saved), sup_hist, leak


def solve_forward_cauchy(
    b: DriftField,
    f,
    grid: SpaceTimeGrid,
    source: SourceFn | None = None,
    workers: int = 1,
) -> GridSolution:
    """(d/dt - Lap + b.grad) v = source on [t0, T], v(t0) = f, v = 0 on the box boundary."""
    drift = _GridDrift(b, grid)
    v0 = sample_on_grid(f, grid)
    times_all = grid.times()
    idx, levels, sup_hist, leak = _march(drift, v0, grid, source, lambda k: float(times_all[k]), workers)
    scale = max(float(np.abs(v0).max()), 1e-300)
    return GridSolution(grid, times_all[idx], levels, sup_hist, leak / scale if leak else 0.0, "forward", b.field_id)


def solve_backward_terminal(
    b: DriftField,
    f,
    grid: SpaceTimeGrid,
    r: float | None = None,
    source: SourceFn | None = None,
    workers: int = 1,
) -> GridSolution:
    """(d/dt + Lap - b.grad) w = -source on [t0, r], w(r) = f; marched in reversed time."""
    r = grid.T if r is None else r
    g = grid if r == grid.T else grid.with_(T=r)
    drift = _GridDrift(b, g)
    w0 = sample_on_grid(f, g)
    phys = g.times()[::-1]  # physical time r - k h_t
    idx, levels, sup_hist, leak = _march(drift, w0, g, source, lambda k: float(phys[k]), workers)
    scale = max(float(np.abs(w0).max()), float(np.abs(levels).max()), 1e-300)
    times = phys[idx][::-1]
    return GridSolution(g, times, levels[::-1].copy(), sup_hist, leak / scale if leak else 0.0, "backward", b.field_id)
