"""Quadrature rules for integrands with integrable point, shell and time singularities.

Every rule here is a composite midpoint rule, so nodes never land on the
focus of a grading (the singular locus); this is the half-cell jitter of
the lab applied at construction time.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import roots_jacobi


def midpoint(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h, np.full(n, h)


def graded_nodes(
    lo: float, hi: float, focus: float | None, per_octave: int, octaves: int
) -> tuple[np.ndarray, np.ndarray]:
    """Composite midpoint rule on [lo, hi], dyadically refined toward ``focus``.

    Cells adjacent to the focus shrink geometrically by a factor 2 per octave,
    each octave carrying ``per_octave`` midpoint nodes; the innermost cell
    keeps ``per_octave`` nodes too.  With ``focus`` outside [lo, hi] (or None)
    the rule is uniform with ``per_octave * octaves`` nodes.
    """
    if hi <= lo:
        return np.empty(0), np.empty(0)
    if focus is None or focus < lo or focus > hi:
        return midpoint(lo, hi, per_octave * octaves)
    xs, ws = [], []
    for sign, length in ((1.0, hi - focus), (-1.0, focus - lo)):
        if length <= 0:
            continue
        edges = length * 2.0 ** -np.arange(octaves + 1)
        edges = np.append(edges, 0.0)
        for outer, inner in zip(edges[:-1], edges[1:]):
            x, w = midpoint(inner, outer, per_octave)
            xs.append(focus + sign * x)
            ws.append(w)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    order = np.argsort(x)
    return x[order], w[order]


def sphere_area(d: int) -> float:
    return 2.0 * np.pi ** (d / 2) / gamma_fn(d / 2)


@lru_cache(maxsize=64)
def sphere_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{d-1}: Gauss-Jacobi in each polar cosine, uniform azimuth.

    Returns directions (M, d) and weights summing to |S^{d-1}|.  Exact for
    polynomials of degree < 2n in each polar variable.
    """
    if d < 2:
        raise ValueError("sphere_rule needs d >= 2")
    phi = (np.arange(2 * n) + 0.5) * np.pi / n
    dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    weights = np.full(2 * n, np.pi / n)
    for k in range(3, d + 1):
        # S^{k-1} = {(u, sqrt(1-u^2) w') : w' in S^{k-2}}, measure (1-u^2)^{(k-3)/2} du dw'
        alpha = (k - 3) / 2.0
        u, wu = roots_jacobi(n, alpha, alpha)
        s = np.sqrt(1.0 - u**2)
        dirs = np.concatenate(
            [np.column_stack([np.full(len(dirs), ui), si * dirs]) for ui, si in zip(u, s)]
        )
        weights = np.concatenate([wi * weights for wi in wu])
    dirs.setflags(write=False)
    weights.setflags(write=False)
    return dirs, weights


def ball_points(
    center: np.ndarray,
    r: np.ndarray,
    wr: np.ndarray,
    sphere_n: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Tensor (radius x direction) nodes around ``center`` with volume weights."""
    d = len(center)
    dirs, wd = sphere_rule(d, sphere_n)
    pts = center + r[:, None, None] * dirs[None, :, :]
    w = (wr * r ** (d - 1))[:, None] * wd[None, :]
    return pts.reshape(-1, d), w.reshape(-1)


def tensor_points(axes: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    w = np.prod(np.stack([g.reshape(-1) for g in wgrid], axis=1), axis=1)
    return pts, w
