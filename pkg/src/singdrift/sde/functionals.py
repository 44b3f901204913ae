"""Path functionals: Krylov-type occupation bounds, drift integrals, moduli, marginals, stickiness, duality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import ks_2samp

from ..errors import InvalidParameter, TimeUnavailable
from ..fields.core import DriftField, FormBoundCertificate, jitter_off_locus
from ..pde.grid import SpaceTimeGrid
from ..pde.monitors import check_q
from ..pde.solver import product_source, solve_backward_terminal
from .simulate import PathEnsemble, SimConfig, simulate_euler


@dataclass
class FunctionalReport:
    functional: str
    field_id: str
    m: int | None
    h_t: float
    N: int
    lhs: float
    rhs: float
    ratio: float
    stderr: float
    extra: dict = field(default_factory=dict)

    CSV_COLUMNS = ("functional", "field_id", "m", "h_t", "N", "lhs", "rhs", "ratio", "stderr")

    def to_row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_COLUMNS}


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def _path_time_integral(ens: PathEnsemble, integrand: Callable, window: tuple[float, float] | None = None):
    """Per-path trapezoid of integrand(t, X_t) over recorded times inside the window."""
    times = ens.times
    lo, hi = (times[0], times[-1]) if window is None else window
    sel = np.nonzero((times >= lo - 1e-12) & (times <= hi + 1e-12))[0]
    if len(sel) < 2:
        raise TimeUnavailable(f"window [{lo}, {hi}] holds fewer than two recorded times")
    vals = np.empty((ens.N, len(sel)))
    for j, k in enumerate(sel):
        vals[:, j] = integrand(float(times[k]), ens.paths[:, k])
    dt = np.diff(times[sel])
    return np.sum(0.5 * (vals[:, 1:] + vals[:, :-1]) * dt, axis=1)


def _field_magnitude(f: DriftField, cell: float) -> Callable:
    def mag(t, X):
        tj, Xj, _ = jitter_off_locus(t, X, f.locus, cell)
        return np.sqrt(f.norm_sq(tj, Xj))

    return mag


def spacetime_lattice_norm(
    integrand: Callable[[float, np.ndarray], np.ndarray],
    d: int,
    T: float,
    half_width: float = 4.0,
    cells: int = 64,
    time_cells: int = 32,
    locus=None,
) -> float:
    """Midpoint lattice integral of integrand(t, x) over [0, T] x [-L, L]^d (samples jittered off ``locus``)."""
    h = 2 * half_width / cells
    ax = -half_width + (np.arange(cells) + 0.5) * h
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    ht = T / time_cells
    total = 0.0
    for t in (np.arange(time_cells) + 0.5) * ht:
        if locus is not None:
            _, p, _ = jitter_off_locus(t, pts, locus, h)
        else:
            p = pts
        total += float(np.sum(integrand(t, p))) * h**d * ht
    return total


def krylov_functional(
    ens: PathEnsemble,
    f_field: DriftField,
    h: Callable[[float, np.ndarray], np.ndarray],
    q: float,
    cert: FormBoundCertificate | None,
    lattice_cells: int = 64,
    half_width: float = 4.0,
) -> FunctionalReport:
    """E int_0^T |f h|(t, X_t) dt against (int int |f|^2 |h|^q)^(1/q)."""
    check_q(q, ens.d, cert)
    if f_field.field_id == "zero":
        return FunctionalReport("krylov", ens.field_id, ens.m, ens.cfg.h_t, ens.N, 0.0, 0.0, 0.0, 0.0, {"q": q})
    fmag = _field_magnitude(f_field, 2 * half_width / lattice_cells)
    per_path = _path_time_integral(ens, lambda t, X: fmag(t, X) * np.abs(h(t, X)))
    lhs = float(np.mean(per_path))
    stderr = float(np.std(per_path, ddof=1) / math.sqrt(ens.N)) if ens.N > 1 else 0.0
    T = float(ens.times[-1])
    norm = spacetime_lattice_norm(
        lambda t, x: f_field.norm_sq(t, x) * np.abs(h(t, x)) ** q,
        ens.d, T, half_width, lattice_cells, locus=f_field.locus,
    )  # fmt: skip
    rhs = norm ** (1.0 / q)
    return FunctionalReport("krylov", ens.field_id, ens.m, ens.cfg.h_t, ens.N, lhs, rhs, _ratio(lhs, rhs), stderr, {"q": q})


def expected_drift_integral(
    ens: PathEnsemble,
    b_k: DriftField,
    cert: FormBoundCertificate,
    window: tuple[float, float],
) -> FunctionalReport:
    """E int_s^r |b_k(t, X_t)| dt against F(r - s) = (r - s) + sup window integral of g."""
    s, r = window
    if not (ens.times[0] - 1e-12 <= s < r <= ens.times[-1] + 1e-12):
        raise InvalidParameter("window must lie inside the ensemble horizon")
    if b_k.field_id == "zero":
        lhs, stderr = 0.0, 0.0
    else:
        mag = _field_magnitude(b_k, ens.cfg.h_t)
        per_path = _path_time_integral(ens, mag, window)
        lhs = float(np.mean(per_path))
        stderr = float(np.std(per_path, ddof=1) / math.sqrt(ens.N)) if ens.N > 1 else 0.0
    F = cert.F(r - s, float(ens.times[-1]))
    return FunctionalReport(
        "drift_integral", ens.field_id, ens.m, ens.cfg.h_t, ens.N, lhs, F, _ratio(lhs, F), stderr,
        {"s": s, "r": r, "lhs_per_length": lhs / (r - s)},
    )  # fmt: skip


def drift_integral_pde(
    b_m: DriftField,
    b_k: DriftField,
    window: tuple[float, float],
    grid: SpaceTimeGrid,
):
    """Backward solve of (d/dt + Lap - b_m.grad) w = -|b_k| on [s, r], w(r) = 0; returns the solution."""
    s, r = window
    g = grid.with_(t0=s, T=r)
    src = product_source(b_k, lambda t, x: np.ones(x.shape[:-1]), g.h_x)
    return solve_backward_terminal(b_m, np.zeros(g.shape), g, r, source=src)


def modulus_of_continuity(
    ens: PathEnsemble,
    beta: float,
    h_steps: int,
    cert: FormBoundCertificate | None = None,
) -> FunctionalReport:
    """E sup_{t, a <= h} |X_{t+a} - X_t|^beta with the fitted constant of the F~(h)^beta bound.

    ``h_steps`` counts recorded steps.  ``ratio`` is C~^beta = (1 - beta) LHS / F~(h)^beta;
    ``extra`` also carries C~ fitted against F~(h) without the power.
    """
    if not 0 < beta < 1:
        raise InvalidParameter("beta must lie in (0, 1)")
    n_rec = len(ens.times)
    if not 1 <= h_steps < n_rec:
        raise InvalidParameter("h must be a positive multiple of the recorded step inside the horizon")
    X = ens.paths
    sup = np.zeros(ens.N)
    for j in range(1, h_steps + 1):
        dx = X[:, j:] - X[:, :-j]
        sup = np.maximum(sup, np.max(np.sqrt(np.sum(dx * dx, axis=2)), axis=1))
    vals = sup**beta
    lhs = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(ens.N)) if ens.N > 1 else 0.0
    h = h_steps * ens.h_rec
    T = float(ens.times[-1])
    F = cert.F(h, T) if cert is not None else h
    Ft = math.sqrt(h) + F
    rhs = Ft**beta / (1 - beta)
    c_beta = _ratio(lhs, rhs)
    printed = (1 - beta) * lhs / Ft
    return FunctionalReport(
        "modulus", ens.field_id, ens.m, ens.cfg.h_t, ens.N, lhs, rhs, c_beta, stderr,
        {"beta": beta, "h": h, "F_tilde": Ft, "C_tilde": c_beta ** (1 / beta), "C_tilde_unpowered": printed ** (1 / beta)},
    )  # fmt: skip


def marginal_distance(e1: PathEnsemble, e2: PathEnsemble, t: float) -> float:
    """Max over coordinates of the two-sample KS statistic between the time-t marginals."""
    k1, k2 = e1.index_of(t), e2.index_of(t)
    if k1 is None or k2 is None:
        raise TimeUnavailable(f"time {t} not recorded in both ensembles")
    if e1 is e2:
        return 0.0
    a, b = e1.paths[:, k1], e2.paths[:, k2]
    return float(max(ks_2samp(a[:, i], b[:, i]).statistic for i in range(a.shape[1])))


def occupation_near_origin(ens: PathEnsemble, radius: float, window: tuple[float, float] | None = None) -> float:
    """Mean over paths of the fraction of window time spent in |x| < radius."""
    if not radius > 0:
        raise InvalidParameter("radius must be positive")
    inside = lambda t, X: (np.sqrt(np.sum(X * X, axis=-1)) < radius).astype(float)
    lo, hi = (float(ens.times[0]), float(ens.times[-1])) if window is None else window
    per_path = _path_time_integral(ens, inside, (lo, hi))
    return float(np.mean(per_path) / (hi - lo))


def duality_check(
    x,
    f: Callable[[np.ndarray], np.ndarray],
    T: float,
    b_m: DriftField,
    grid: SpaceTimeGrid,
    cfg: SimConfig,
    grid_budget: float,
    ens: PathEnsemble | None = None,
) -> FunctionalReport:
    """Monte Carlo E f(X_T) against the backward solve w(0, x); pass iff gap <= 3 stderr + grid budget."""
    x = np.asarray(x, dtype=float)
    if ens is None:
        ens = simulate_euler(b_m, x, cfg)
    kT = ens.index_of(T)
    if kT is None:
        raise TimeUnavailable(f"time {T} not recorded")
    vals = np.asarray(f(ens.paths[:, kT]), dtype=float)
    mc = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(ens.N)) if ens.N > 1 else 0.0
    g = grid.with_(t0=0.0, T=T)
    w = solve_backward_terminal(b_m, f, g, T)
    pde = float(w.interpolate(0, x[None, :])[0])
    gap = abs(mc - pde)
    budget = 3 * stderr + grid_budget
    return FunctionalReport(
        "duality", b_m.field_id, cfg.m, cfg.h_t, ens.N, mc, pde, _ratio(mc, pde), stderr,
        {"gap": gap, "budget": budget, "grid_budget": grid_budget, "pass": bool(gap <= budget),
         "boundary_leak": w.boundary_leak},
    )  # fmt: skip
