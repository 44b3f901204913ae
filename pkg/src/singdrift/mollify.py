"""Bounded smooth approximations b_m = c_m * heat_smooth(truncate(b, m), eps_m) preserving the form-bound."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.ndimage import gaussian_filter, map_coordinates
from scipy.special import ndtr

from .errors import InvalidParameter, ScheduleFailure, UnboundedInput
from .fields.constants import sobolev_constant
from .fields.core import NO_LOCUS, DriftField, FormBoundCertificate, jitter_off_locus
from .rawblock import RawBlock

FILTER_TRUNCATE = 4.0


@dataclass(frozen=True)
class LatticeSpec:
    """Sampling lattice for smoothed fields.

    The spatial lattice is cell-centred on [-half_width, half_width]^d.  Fields
    that are not separable in time get a coarser 4-D lattice over
    [0, horizon] with ``time_cells`` cells.
    """

    half_width: float = 4.0
    cells: int = 128
    unsteady_cells: int = 40
    time_cells: int = 40
    horizon: float = 2.0
    eps_floor: float = 1e-8

    def __post_init__(self):
        if self.half_width <= 0 or self.cells < 4 or self.unsteady_cells < 4 or self.time_cells < 4:
            raise InvalidParameter("lattice needs positive half-width and at least 4 cells per axis")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.cells


@dataclass(frozen=True)
class MollifierSchedule:
    m: int
    eps_m: float
    gamma_m: float
    c_m: float
    C_S: float
    r: float
    delta: float
    delta_m: float

    def to_record(self) -> dict:
        return asdict(self)


def scaling_factor(delta: float, gamma: float, C_S: float) -> tuple[float, float]:
    """(c_m, delta_m) with delta_m = (sqrt(delta) + sqrt(C_S gamma^2))^2 and c_m = delta / delta_m."""
    delta_m = (math.sqrt(delta) + math.sqrt(C_S * gamma * gamma)) ** 2
    return delta / delta_m, delta_m


def default_gamma_rule(gamma0: float = 0.5) -> Callable[[int], float]:
    return lambda m: gamma0 / m


def default_eps_cap(m: int) -> float:
    """Upper end of the bisection bracket; strictly decreasing in m."""
    return 1.0 / (m * m)


# ----------------------------------------------------------------------------
# truncation


def truncate(b: DriftField, m: int) -> DriftField:
    """1_m b: zero wherever |b| > m, |x| > m, t > m or t < 0."""
    if m < 1:
        raise InvalidParameter("truncation level m must be >= 1")
    if b.field_id == "zero":
        return b
    m2 = float(m) ** 2

    def space_ok(x, ms):
        return np.isfinite(ms) & (ms <= m2) & (np.sum(x * x, axis=-1) <= m2)

    def time_ok(t, shape):
        tt = np.broadcast_to(np.asarray(t, dtype=float), shape)
        return (tt >= 0.0) & (tt <= m)

    def mag(t, x):
        ms = b.norm_sq(t, x)
        ok = space_ok(x, ms) & time_ok(t, ms.shape)
        return np.where(ok, ms, 0.0)

    def fn(t, x):
        ms = b.norm_sq(t, x)
        ok = space_ok(x, ms) & time_ok(t, ms.shape)
        return np.where(ok[..., None], b(t, x), 0.0)

    separable = None
    if b.stationary:

        def spatial(x):
            x = np.asarray(x, dtype=float)
            ms = b.norm_sq(0.0, x)
            return np.where(space_ok(x, ms)[..., None], b(0.0, x), 0.0)

        def time_factor(t):
            t = np.asarray(t, dtype=float)
            return ((t >= 0.0) & (t <= m)).astype(float)

        separable = (time_factor, spatial)

    sup = float(m) if b.sup_bound is None else min(float(m), b.sup_bound)
    return DriftField(
        d=b.d,
        fn=fn,
        locus=NO_LOCUS,
        certificate=b.certificate,
        sup_bound=sup,
        stationary=False,
        field_id=b.field_id,
        params={**b.params, "truncation": m},
        separable=separable,
        steep_locus=b.locus if not b.locus.is_empty else b.steep_locus,
        time_support=(0.0, float(m)),
        magnitude_sq=mag,
    )


# ----------------------------------------------------------------------------
# lattices


def _centres(lo: float, h: float, n: int) -> np.ndarray:
    return lo + (np.arange(n) + 0.5) * h


@dataclass(frozen=True, eq=False)
class SpatialLattice:
    """Vector samples on a cell-centred lattice; multilinear interpolation inside the window."""

    values: np.ndarray  # (d, n, ..., n)
    lo: float
    h: float

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def hi(self) -> float:
        return self.lo + self.n * self.h

    def inside(self, x: np.ndarray) -> np.ndarray:
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def interpolate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.d)
        coords = ((flat - self.lo) / self.h - 0.5).T
        out = np.empty_like(flat)
        for k in range(self.d):
            out[:, k] = map_coordinates(self.values[k], coords, order=1, mode="nearest")
        return out.reshape(x.shape)

    def sup_norm(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.values**2, axis=0))))

    def to_block(self, metadata: dict | None = None) -> RawBlock:
        d = self.d
        return RawBlock(
            "vector-lattice",
            self.values,
            (0.0,) + (self.lo + 0.5 * self.h,) * d,
            (1.0,) + (self.h,) * d,
            metadata or {},
        )


@dataclass(frozen=True, eq=False)
class SpaceTimeLattice:
    values: np.ndarray  # (d, nt, n, ..., n)
    lo: float
    h: float
    t_lo: float
    h_t: float

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def t_hi(self) -> float:
        return self.t_lo + self.values.shape[1] * self.h_t

    @property
    def hi(self) -> float:
        return self.lo + self.values.shape[2] * self.h

    def inside(self, t, x) -> np.ndarray:
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1) & (t >= self.t_lo) & (t <= self.t_hi)

    def interpolate(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1]).reshape(-1)
        flat = x.reshape(-1, self.d)
        coords = np.vstack([((t - self.t_lo) / self.h_t - 0.5)[None, :], ((flat - self.lo) / self.h - 0.5).T])
        out = np.empty_like(flat)
        for k in range(self.d):
            out[:, k] = map_coordinates(self.values[k], coords, order=1, mode="nearest")
        return out.reshape(x.shape)

    def sup_norm(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.values**2, axis=0))))

    def to_block(self, metadata: dict | None = None) -> RawBlock:
        d = self.d
        return RawBlock(
            "vector-spacetime-lattice",
            self.values,
            (0.0, self.t_lo + 0.5 * self.h_t) + (self.lo + 0.5 * self.h,) * d,
            (1.0, self.h_t) + (self.h,) * d,
            metadata or {},
        )


def _sample_spatial(spatial: Callable, d: int, lo: float, h: float, n: int) -> np.ndarray:
    axes = [_centres(lo, h, n)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.asarray(spatial(grid), dtype=float)
    return np.moveaxis(vals, -1, 0).copy()


def smoothed_time_indicator(lo: float, hi: float, eps: float) -> Callable:
    """Heat-smoothed indicator of [lo, hi]: Phi((t-lo)/s) - Phi((t-hi)/s), s = sqrt(2 eps)."""
    s = math.sqrt(2.0 * eps)
    return lambda t: ndtr((np.asarray(t, dtype=float) - lo) / s) - ndtr((np.asarray(t, dtype=float) - hi) / s)


@dataclass(frozen=True, eq=False)
class _SeparableSource:
    """Padded lattice samples of a separable bounded field, reused across bisection steps."""

    raw: np.ndarray
    pad: int
    spec: LatticeSpec
    d: int

    @property
    def core(self) -> np.ndarray:
        p = self.pad
        sl = (slice(None),) + (slice(p, self.raw.shape[1] - p),) * self.d
        return self.raw[sl]

    def smooth(self, eps: float) -> np.ndarray:
        sig = math.sqrt(2.0 * eps) / self.spec.spacing if eps > 0 else 0.0
        if int(FILTER_TRUNCATE * sig + 0.5) == 0:
            return self.core.copy()
        out = np.empty_like(self.raw)
        for k in range(self.d):
            gaussian_filter(self.raw[k], sig, output=out[k], mode="constant", truncate=FILTER_TRUNCATE)
        p = self.pad
        sl = (slice(None),) + (slice(p, self.raw.shape[1] - p),) * self.d
        return out[sl]


def _pad_cells(eps_max: float, h: float) -> int:
    return int(math.ceil(FILTER_TRUNCATE * math.sqrt(2.0 * eps_max) / h)) + 1


def _separable_source(f: DriftField, spec: LatticeSpec, eps_max: float) -> _SeparableSource:
    h = spec.spacing
    pad = _pad_cells(eps_max, h)
    n = spec.cells + 2 * pad
    raw = _sample_spatial(f.separable[1], f.d, -spec.half_width - pad * h, h, n)
    return _SeparableSource(raw, pad, spec, f.d)


def _lattice_norm(v: np.ndarray, r: float, cell_volume: float) -> float:
    mag = np.sqrt(np.sum(v * v, axis=0))
    return float((np.sum(mag**r) * cell_volume) ** (1.0 / r))


def _time_norms(lo: float, hi: float, eps: float, r: float) -> tuple[float, float]:
    """(||tau_eps||_{L^r(0,inf)}, ||tau_eps - tau||_{L^r(0,inf)}) for tau = 1_[lo,hi]."""
    tau_e = smoothed_time_indicator(lo, hi, eps)
    s = math.sqrt(2.0 * eps)
    end = hi + 12 * s
    pts = sorted({max(lo, 0.0), hi})
    a, _ = integrate.quad(lambda t: abs(float(tau_e(t))) ** r, 0.0, end, points=pts, limit=400)
    ind = lambda t: 1.0 if lo <= t <= hi else 0.0
    b = 0.0
    for c in pts:
        seg_lo, seg_hi = max(0.0, c - 12 * s), c + 12 * s
        v, _ = integrate.quad(lambda t: abs(float(tau_e(t)) - ind(t)) ** r, seg_lo, seg_hi, points=[c], limit=200)
        b += v
    return a ** (1.0 / r), b ** (1.0 / r)


# ----------------------------------------------------------------------------
# smoothed fields


def _lattice_drift(
    source: DriftField,
    scale: float,
    lattice,
    time_factor: Callable | None,
    eps: float,
    extra_params: dict,
) -> DriftField:
    d = source.d
    lat_sup = lattice.sup_norm()
    # outside the window the unsmoothed input is used, clipped to the lattice maximum;
    # clipping only lowers |b| so the form-bound is unaffected
    sup = scale * lat_sup

    def clip(v):
        mag = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(mag > lat_sup, v * (lat_sup / mag), v)

    if isinstance(lattice, SpatialLattice):
        spatial_in = source.separable[1] if source.separable is not None else (lambda x: source(0.0, x))

        def spatial(x):
            x = np.asarray(x, dtype=float)
            inside = lattice.inside(x)
            if np.all(inside):
                return lattice.interpolate(x)
            out = clip(np.asarray(spatial_in(x), dtype=float))
            if np.any(inside):
                out[inside] = lattice.interpolate(x[inside])
            return out

        tf = time_factor if time_factor is not None else (lambda t: np.ones_like(np.asarray(t, dtype=float)))

        def fn(t, x):
            k = np.asarray(tf(np.broadcast_to(np.asarray(t, dtype=float), np.shape(x)[:-1])))
            return scale * k[..., None] * spatial(x)

        separable = (lambda t: scale * np.asarray(tf(t)), spatial)
        stationary = time_factor is None
    else:

        def fn(t, x):
            x = np.asarray(x, dtype=float)
            tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
            inside = lattice.inside(tt, x)
            out = clip(np.asarray(source(tt, x), dtype=float))
            if np.any(inside):
                out[inside] = lattice.interpolate(tt[inside], x[inside])
            return scale * out

        separable = None
        stationary = False

    return DriftField(
        d=d,
        fn=fn,
        locus=NO_LOCUS,
        certificate=source.certificate,
        sup_bound=sup,
        stationary=stationary,
        field_id=source.field_id,
        params={**source.params, **extra_params},
        separable=separable,
        steep_locus=source.steep_locus if source.steep_locus is not None else source.locus,
        time_support=None,
        magnitude_sq=None,
    ), lattice


def heat_smooth(f: DriftField, eps: float, spec: LatticeSpec = LatticeSpec()) -> DriftField:
    """Gaussian convolution in (t, x) with variance 2 eps per coordinate, f extended by 0 for t < 0."""
    out, _ = heat_smooth_with_lattice(f, eps, spec)
    return out


def heat_smooth_with_lattice(f: DriftField, eps: float, spec: LatticeSpec = LatticeSpec(), scale: float = 1.0):
    if f.sup_bound is None:
        raise UnboundedInput(f"field {f.field_id} has no declared sup-bound; truncate it first")
    if not eps > 0:
        raise InvalidParameter("eps must be positive")
    if f.stationary or (f.separable is not None and f.time_support is not None):
        if f.separable is None:
            src = _SeparableSource(
                _sample_spatial(lambda x: f(0.0, x), f.d, -spec.half_width - _pad_cells(eps, spec.spacing) * spec.spacing,
                                spec.spacing, spec.cells + 2 * _pad_cells(eps, spec.spacing)),
                _pad_cells(eps, spec.spacing), spec, f.d)
        else:
            src = _separable_source(f, spec, eps)
        lattice = SpatialLattice(src.smooth(eps), -spec.half_width, spec.spacing)
        tf = None if f.stationary else smoothed_time_indicator(*f.time_support, eps)
        return _lattice_drift(f, scale, lattice, tf, eps, {"eps": eps})
    lattice = _spacetime_smooth(f, eps, spec)
    return _lattice_drift(f, scale, lattice, None, eps, {"eps": eps})


def _spacetime_source(f: DriftField, spec: LatticeSpec, eps_max: float):
    n = spec.unsteady_cells
    h = 2 * spec.half_width / n
    h_t = spec.horizon / spec.time_cells
    pad = _pad_cells(eps_max, h)
    pad_t = _pad_cells(eps_max, h_t)
    xs = _centres(-spec.half_width - pad * h, h, n + 2 * pad)
    ts = _centres(-pad_t * h_t, h_t, spec.time_cells + 2 * pad_t)
    grid = np.stack(np.meshgrid(*([xs] * f.d), indexing="ij"), axis=-1)
    raw = np.empty((f.d, len(ts)) + grid.shape[:-1])
    cell = h
    for i, t in enumerate(ts):
        if t < 0:
            raw[:, i] = 0.0
            continue
        tj, gj, _ = jitter_off_locus(t, grid, f.locus, cell, h_t)
        raw[:, i] = np.moveaxis(np.asarray(f(tj, gj)), -1, 0)
    return raw, pad, pad_t, h, h_t


def _crop_st(a: np.ndarray, pad: int, pad_t: int, d: int) -> np.ndarray:
    sl = (slice(None), slice(pad_t, a.shape[1] - pad_t)) + (slice(pad, a.shape[2] - pad),) * d
    return a[sl]


def _smooth_st(raw, eps, h, h_t, d):
    s = math.sqrt(2.0 * eps)
    out = np.empty_like(raw)
    for k in range(d):
        gaussian_filter(raw[k], (s / h_t,) + (s / h,) * d, output=out[k], mode="constant", truncate=FILTER_TRUNCATE)
    return out


def _spacetime_smooth(f: DriftField, eps: float, spec: LatticeSpec) -> SpaceTimeLattice:
    raw, pad, pad_t, h, h_t = _spacetime_source(f, spec, eps)
    vals = _crop_st(_smooth_st(raw, eps, h, h_t, f.d), pad, pad_t, f.d)
    return SpaceTimeLattice(vals, -spec.half_width, h, 0.0, h_t)


# ----------------------------------------------------------------------------
# approximation sequence


@dataclass(frozen=True, eq=False)
class Approximation:
    field: DriftField
    schedule: MollifierSchedule
    lattice: object = field(repr=False)


def _bisect_eps(
    distance: Callable[[float], float], gamma: float, floor: float, cap: float, log_tol: float = 0.02
) -> float:
    """Largest eps in [floor, cap], to a factor exp(log_tol), with distance(eps) <= gamma."""
    if distance(cap) <= gamma:
        return cap
    d_floor = distance(floor)
    if d_floor > gamma:
        raise ScheduleFailure(
            f"lattice distance {d_floor:.3g} exceeds gamma {gamma:.3g} even at eps floor {floor:g}; "
            "the lattice is too coarse for this tolerance"
        )
    lo, hi = math.log(floor), math.log(cap)
    while hi - lo > log_tol:
        mid = 0.5 * (lo + hi)
        if distance(math.exp(mid)) <= gamma:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def build_approximation(
    b: DriftField,
    cert: FormBoundCertificate | None,
    m: int,
    gamma_rule: Callable[[int], float] = default_gamma_rule(),
    spec: LatticeSpec = LatticeSpec(),
    eps_cap: Callable[[int], float] = default_eps_cap,
) -> Approximation:
    """b_m = c_m heat_smooth(1_m b, eps_m), eps_m the largest width keeping the L^d lattice gap <= gamma_m.

    The distance is bounded by ||tau_eps||_r ||S_eps - S||_r + ||tau_eps - tau||_r ||S||_r
    for separable sources and computed directly on the 4-D lattice otherwise.
    """
    if cert is None:
        raise InvalidParameter("build_approximation needs a form-bound certificate")
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    d = b.d
    r = float(d)
    C_S = sobolev_constant(d)
    gamma = float(gamma_rule(m))
    if not gamma > 0:
        raise InvalidParameter("gamma_m must be positive")
    c_m, delta_m = scaling_factor(cert.delta, gamma, C_S)
    cap = float(eps_cap(m))
    f = truncate(b, m).with_certificate(cert)

    if f.field_id == "zero":
        sched = MollifierSchedule(m, cap, gamma, c_m, C_S, r, cert.delta, delta_m)
        return Approximation(b, sched, None)

    if f.separable is not None:
        src = _separable_source(f, spec, cap)
        vol = spec.spacing**d
        base = src.core
        base_norm = _lattice_norm(base, r, vol)
        lo, hi = f.time_support

        def time_part(eps):
            return _time_norms(lo, hi, eps, r)[1] * base_norm

        def distance(eps):
            a, bt = _time_norms(lo, hi, eps, r)
            return a * _lattice_norm(src.smooth(eps) - base, r, vol) + bt * base_norm

        # the time term alone is cheap and already brackets eps from above
        cap = _bisect_eps(time_part, gamma, spec.eps_floor, cap) if time_part(spec.eps_floor) <= gamma else cap
        eps = _bisect_eps(distance, gamma, spec.eps_floor, cap)
        lattice = SpatialLattice(src.smooth(eps), -spec.half_width, spec.spacing)
        tf = smoothed_time_indicator(lo, hi, eps)
    else:
        raw, pad, pad_t, h, h_t = _spacetime_source(f, spec, cap)
        base = _crop_st(raw, pad, pad_t, d)
        vol = h**d * h_t

        def distance(eps):
            return _lattice_norm(_crop_st(_smooth_st(raw, eps, h, h_t, d), pad, pad_t, d) - base, r, vol)

        eps = _bisect_eps(distance, gamma, spec.eps_floor, cap)
        lattice = SpaceTimeLattice(
            _crop_st(_smooth_st(raw, eps, h, h_t, d), pad, pad_t, d), -spec.half_width, h, 0.0, h_t
        )
        tf = None

    sched = MollifierSchedule(m, eps, gamma, c_m, C_S, r, cert.delta, delta_m)
    out, lat = _lattice_drift(f, c_m, lattice, tf, eps, {"m": m, "eps": eps, "c_m": c_m})
    return Approximation(out, sched, lat)


def build_sequence(
    b: DriftField,
    cert: FormBoundCertificate,
    ms: list[int],
    gamma_rule: Callable[[int], float] = default_gamma_rule(),
    spec: LatticeSpec = LatticeSpec(),
) -> list[Approximation]:
    ms = sorted(ms)
    if len(set(ms)) != len(ms):
        raise InvalidParameter("mollifier levels must be distinct")
    gammas = [gamma_rule(m) for m in ms]
    if any(g2 >= g1 for g1, g2 in zip(gammas, gammas[1:])):
        raise InvalidParameter("gamma_m must be strictly decreasing")
    return [build_approximation(b, cert, m, gamma_rule, spec) for m in ms]


# ----------------------------------------------------------------------------


def l2loc_distance(
    b1: DriftField,
    b2: DriftField,
    box: tuple[tuple[float, float], ...] | float = 2.0,
    interval: tuple[float, float] = (0.0, 1.0),
    spacing: float = 0.05,
    time_cells: int = 8,
) -> float:
    """Midpoint-lattice L^2 norm of b1 - b2 over box x interval; singular samples jittered."""
    if b1.d != b2.d:
        from .errors import DimensionMismatch

        raise DimensionMismatch("fields differ in dimension")
    d = b1.d
    if isinstance(box, (int, float)):
        box = ((-float(box), float(box)),) * d
    axes = []
    for lo, hi in box:
        n = max(1, int(round((hi - lo) / spacing)))
        axes.append(_centres(lo, (hi - lo) / n, n))
    cell_vol = float(np.prod([a[1] - a[0] if len(a) > 1 else hi - lo for a, (lo, hi) in zip(axes, box)]))
    ht = (interval[1] - interval[0]) / time_cells
    ts = _centres(interval[0], ht, time_cells)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    locus = b1.locus.union(b2.locus)
    cell = min(a[1] - a[0] for a in axes if len(a) > 1) if any(len(a) > 1 for a in axes) else spacing
    total = 0.0
    for t in ts:
        tj, pj, _ = jitter_off_locus(t, pts, locus, cell, ht)
        diff = np.asarray(b1(tj, pj)) - np.asarray(b2(tj, pj))
        total += float(np.sum(diff * diff)) * cell_vol * ht
    return math.sqrt(total)
