"""Monitored a priori bounds on grid solutions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import InsufficientSamples, InvalidParameter, POutOfRange, QOutOfRange
from ..fields.constants import admissible_q_interval, lp_threshold
from ..fields.core import DriftField, FormBoundCertificate
from .grid import SpaceTimeGrid, Weight
from .solver import GridSolution, centered_gradient, sample_on_grid, solve_forward_cauchy

GRADIENT_FLOOR = 1e-30


def gaussian(center=None, var: float = 0.25, amplitude: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """x -> amplitude exp(-|x - center|^2 / (2 var))."""

    def f(x):
        x = np.asarray(x, dtype=float)
        c = np.zeros(x.shape[-1]) if center is None else np.asarray(center, dtype=float)
        return amplitude * np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * var))

    return f


def heat_gaussian(d: int, var0: float, t: float, center=None, shift=None) -> Callable[[np.ndarray], np.ndarray]:
    """Exact heat evolution of an unnormalised Gaussian, optionally translated by ``shift``."""
    s = var0 + 2.0 * t
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if shift is not None:
        c = c + np.asarray(shift, dtype=float)
    return gaussian(c, s, (var0 / s) ** (d / 2))


def max_relative_error(v: np.ndarray, exact: np.ndarray) -> float:
    return float(np.abs(v - exact).max() / np.abs(exact).max())


@dataclass
class EnergyReport:
    field_id: str
    m: int | None
    q: float
    kappa: float
    theta: float
    lhs_v: float
    lhs_grad: float
    lhs_flux: float
    rhs_source: float
    rhs_grad_f: float
    rhs_f: float
    grid: dict = field(default_factory=dict)

    @property
    def lhs(self) -> float:
        return self.lhs_v + self.lhs_grad + self.lhs_flux

    @property
    def rhs(self) -> float:
        return self.rhs_source + self.rhs_grad_f + self.rhs_f

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)

    CSV_COLUMNS = (
        "field_id", "m", "q", "kappa", "theta",
        "lhs_v", "lhs_grad", "lhs_flux", "rhs_source", "rhs_grad_f", "rhs_f", "ratio",
        "half_width", "intervals", "steps", "T",
    )  # fmt: skip

    def to_row(self) -> dict:
        row = {k: v for k, v in asdict(self).items() if k != "grid"}
        row["ratio"] = self.ratio
        for k in ("half_width", "intervals", "steps", "T"):
            row[k] = self.grid.get(k)
        return {k: row[k] for k in self.CSV_COLUMNS}


def _weighted_sum(vals: np.ndarray, rho: np.ndarray, vol: float) -> float:
    return float(np.sum(vals * rho) * vol)


def _trapezoid(y: Sequence[float], x: Sequence[float]) -> float:
    y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def check_q(q: float, d: int, cert: FormBoundCertificate | None) -> None:
    delta = cert.delta if cert is not None else 0.0
    lo, hi = admissible_q_interval(d, delta)
    if not lo < q < hi:
        raise QOutOfRange(f"q = {q} outside ]{lo:g}, {hi:g}[ for delta = {delta:g}")


def energy_report(
    v: GridSolution,
    q: float,
    weight: Weight,
    source: Callable[[float, np.ndarray], np.ndarray] | None,
    f,
    cert: FormBoundCertificate | None,
    m: int | None = None,
    source_time_nodes: int = 64,
) -> EnergyReport:
    """Weighted-norm terms of the q-energy bound; ``source`` is (t, x) -> |f| h."""
    g = v.grid
    check_q(q, g.d, cert)
    weight.validate(g.d)
    pts = g.points()
    rho = weight(pts)
    vol = g.cell_volume
    lhs_v = lhs_grad = 0.0
    flux = []
    for k in range(len(v.times)):
        lvl = v.levels[k]
        grad = centered_gradient(lvl, g.h_x)
        gmag = np.sqrt(np.sum(grad * grad, axis=0))
        lhs_v = max(lhs_v, _weighted_sum(np.abs(lvl) ** q, rho, vol))
        lhs_grad = max(lhs_grad, _weighted_sum(gmag**q, rho, vol))
        pw = np.where(gmag > GRADIENT_FLOOR, gmag, 0.0) ** (q / 2)
        gpw = centered_gradient(pw, g.h_x)
        flux.append(_weighted_sum(np.sum(gpw * gpw, axis=0), rho, vol))
    lhs_flux = _trapezoid(flux, v.times)

    rhs_source = 0.0
    if source is not None:
        rhs_source = _source_norm(source, pts, rho, vol, float(v.times[0]), float(v.times[-1]), source_time_nodes, q)
    f0 = sample_on_grid(f, g)
    fgrad = centered_gradient(f0, g.h_x)
    rhs_grad_f = _weighted_sum(np.sqrt(np.sum(fgrad * fgrad, axis=0)) ** q, rho, vol)
    rhs_f = _weighted_sum(np.abs(f0) ** q, rho, vol)
    return EnergyReport(
        v.field_id, m, q, weight.kappa, weight.theta,
        lhs_v, lhs_grad, lhs_flux, rhs_source, rhs_grad_f, rhs_f, g.to_record(),
    )  # fmt: skip


def _source_norm(source, pts, rho, vol, t0, t1, nodes, q) -> float:
    """int int |f|^2 |h|^q rho dx dt by midpoint in time.

    Sources exposing ``factors`` give (|f|, h); a bare callable is read as |f| with h = 1.
    """
    parts = getattr(source, "factors", None)
    ht = (t1 - t0) / nodes
    total = 0.0
    for t in t0 + (np.arange(nodes) + 0.5) * ht:
        if parts is not None:
            fmag, hv = parts(t, pts)
        else:
            fmag, hv = np.asarray(source(t, pts), dtype=float), 1.0
        total += _weighted_sum(fmag**2 * np.abs(hv) ** q, rho, vol) * ht
    return total


class FactoredSource:
    """Source |f(t,x)| h(t,x) that also exposes its two factors for the energy bound."""

    def __init__(self, f_field: DriftField | None, h: Callable, cell: float):
        from ..fields.core import jitter_off_locus

        self.f_field = f_field
        self.h = h
        self.cell = cell
        self._jitter = jitter_off_locus

    def factors(self, t, x):
        hv = np.asarray(self.h(t, x), dtype=float)
        if self.f_field is None:
            return np.ones_like(hv), hv
        tj, xj, _ = self._jitter(t, x, self.f_field.locus, self.cell)
        return np.sqrt(self.f_field.norm_sq(tj, xj)), hv

    def __call__(self, t, x):
        fm, hv = self.factors(t, x)
        return fm * hv


# ----------------------------------------------------------------------------


@dataclass
class FellerReport:
    ms: list
    gaps: list
    sup_f: float
    max_principle_ok: bool
    finals_sup: list

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:]))


def feller_convergence(
    schedule: Sequence[DriftField],
    f,
    grid: SpaceTimeGrid,
    ms: Sequence[int] | None = None,
    slack: float = 1e-10,
) -> FellerReport:
    """Sup-norm gaps between final states of consecutive schedule members."""
    if len(schedule) < 3:
        raise InvalidParameter("feller_convergence needs at least 3 schedule levels")
    f0 = sample_on_grid(f, grid)
    sup_f = float(np.abs(f0).max())
    finals, ok = [], True
    for b in schedule:
        sol = solve_forward_cauchy(b, f0, grid)
        finals.append(sol.final)
        ok = ok and bool(np.all(sol.sup_history <= sup_f + slack))
    gaps = [float(np.abs(b - a).max()) for a, b in zip(finals, finals[1:])]
    return FellerReport(list(ms) if ms is not None else list(range(len(schedule))), gaps, sup_f, ok,
                        [float(np.abs(x).max()) for x in finals])


def lp_norm(v: np.ndarray, p: float, vol: float) -> float:
    return float((np.sum(np.abs(v) ** p) * vol) ** (1.0 / p))


def lp_contraction_check(v: GridSolution, p: float, cert: FormBoundCertificate, slack: float = 0.05):
    """(lhs, rhs, pass) for the L^p quasi-contraction of a homogeneous solve."""
    delta = cert.delta
    lo = lp_threshold(delta)
    if not p > lo:
        raise POutOfRange(f"p = {p} must exceed 2/(2 - sqrt(delta)) = {lo:.4g}")
    vol = v.grid.cell_volume
    rhs = lp_norm(v.initial, p, vol)
    lhs = 0.0
    G = cert.G(v.times)
    for k, t in enumerate(v.times):
        if delta > 0:
            damp = math.exp(-float(G[k]) / (p * math.sqrt(delta)))
        else:
            damp = 1.0 if float(G[k]) == 0.0 else 0.0
        lhs = max(lhs, lp_norm(v.levels[k], p, vol) * damp)
    return lhs, rhs, bool(lhs <= rhs * (1 + slack))


def smoothing_exponent_fit(
    runs: Sequence[GridSolution],
    p: float,
    q: float,
    t_min: float | None = None,
    times: Sequence[float] | None = None,
) -> float:
    """Slope of log ||u(t)||_q / ||f||_p against log(t - s).

    Without ``times``, every run is read at every saved time and the envelope
    (max over runs) is fitted; a single run gives the plain ratio.  With
    ``times``, run j is read only at times[j].  For Gaussian data whose
    variance is proportional to the elapsed time this matched family follows
    the heat scaling exactly, including p = q.
    """
    if p > q:
        raise InvalidParameter("need p <= q")
    if not runs:
        raise InsufficientSamples("no runs")
    base = runs[0]
    s = float(base.times[0])
    vol = base.grid.cell_volume
    ratio = lambda r, t: lp_norm(r.levels[r.index_of(t)], q, vol) / lp_norm(r.initial, p, vol)
    if times is not None:
        if len(times) != len(runs):
            raise InvalidParameter("times must pair one time with each run")
        pairs = [(float(t), ratio(r, t)) for r, t in zip(runs, times) if t_min is None or t - s >= t_min]
    else:
        ts = [float(t) for t in base.times[1:] if t_min is None or t - s >= t_min]
        pairs = [(t, max(ratio(r, t) for r in runs)) for t in ts]
    if len(pairs) < 4:
        raise InsufficientSamples(f"need at least 4 time points, have {len(pairs)}")
    ts, env = zip(*pairs)
    slope, _ = np.polyfit(np.log(np.asarray(ts) - s), np.log(np.asarray(env)), 1)
    return float(slope)


def zero_drift_calibration(grid: SpaceTimeGrid, var0: float = 0.25) -> float:
    """Max relative sup error of the solver against the exact heat Gaussian on ``grid``."""
    from ..fields.core import zero_field

    sol = solve_forward_cauchy(zero_field(grid.d), gaussian(None, var0), grid)
    exact = heat_gaussian(grid.d, var0, grid.T - grid.t0)(grid.points())
    return max_relative_error(sol.final, exact)
