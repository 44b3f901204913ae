"""Numerical form-bound estimation: test functions, Rayleigh quotients, Morrey seminorms, sums."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from ..errors import DegenerateTest, DimensionMismatch, InvalidParameter
from ..quadrature import ball_points, graded_nodes, sphere_area, tensor_points
from .core import (
    DriftField,
    FormBoundCertificate,
    GFunction,
    SumG,
    ZeroG,
    jitter_off_locus,
)

SUM_FALLBACK_ETA = 1e-3


def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    ss = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - ss * ss)), 0.0)


@dataclass(frozen=True)
class TestFunction:
    """phi(t, x) = eta((t - t_c)/tau) * chi(|x - c|/R), both factors compactly supported.

    chi(s) = bump(s) * (s^2 + core^2)^(-power/2).  ``power`` > 0 with a small
    ``core`` concentrates phi near its center; power = 0 is the plain bump.
    """

    center: tuple[float, ...]
    radius: float
    t_center: float = 0.5
    tau: float = 0.5
    power: float = 0.0
    core: float = 1.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.radius <= 0 or self.tau <= 0 or self.core <= 0 or self.power < 0:
            raise InvalidParameter("test function needs radius, tau, core > 0 and power >= 0")

    @property
    def d(self) -> int:
        return len(self.center)

    # radial profile in the scaled variable s = |x - c| / R
    def profile(self, s):
        s = np.asarray(s, dtype=float)
        return _bump(s) * (s * s + self.core**2) ** (-self.power / 2)

    def profile_slope_over_s(self, s):
        """P'(s)/s, finite at s = 0."""
        s = np.asarray(s, dtype=float)
        inside = s < 1.0
        ss = np.where(inside, s, 0.0)
        log_slope = -2.0 / (1.0 - ss * ss) ** 2 - self.power / (ss * ss + self.core**2)
        return np.where(inside, self.profile(ss) * log_slope, 0.0)

    def time_profile(self, t):
        return _bump((np.asarray(t, dtype=float) - self.t_center) / self.tau)

    def space_value(self, x):
        y = np.asarray(x, dtype=float) - np.asarray(self.center)
        return self.profile(np.linalg.norm(y, axis=-1) / self.radius)

    def space_gradient(self, x):
        y = np.asarray(x, dtype=float) - np.asarray(self.center)
        s = np.linalg.norm(y, axis=-1) / self.radius
        return (self.profile_slope_over_s(s) / self.radius**2)[..., None] * y

    def __call__(self, t, x):
        return self.time_profile(t) * self.space_value(x)

    def gradient(self, t, x):
        """Spatial gradient of phi."""
        return np.asarray(self.time_profile(t))[..., None] * self.space_gradient(x)

    @property
    def t_support(self) -> tuple[float, float]:
        return self.t_center - self.tau, self.t_center + self.tau


# ----------------------------------------------------------------------------
# quadrature helpers


def _radial_rule(level: int, rmax: float, focus: float | None, depth: int):
    per = 4 + 2 * level
    return graded_nodes(0.0, rmax, focus, per, depth + 2 * level)


def _grading_locus(field: DriftField):
    """The singular locus, or for regularised fields the locus they were built from."""
    if field.locus.is_empty and field.steep_locus is not None:
        return field.steep_locus
    return field.locus


def _time_rule(phi: TestFunction, field: DriftField, g: GFunction, level: int):
    lo, hi = phi.t_support
    lo = max(lo, 0.0)
    sing = [t for t in _grading_locus(field).times + g.singular_times() if lo <= t <= hi]
    focus = sing[0] if sing else None
    if field.stationary and isinstance(g, ZeroG) and not sing:
        return graded_nodes(lo, hi, None, 8 + 4 * level, 4)
    return graded_nodes(lo, hi, focus, 6 + 3 * level, 14 + 2 * level)


def _core_depth(phi: TestFunction) -> int:
    """Octaves needed to resolve the concentration core of phi."""
    if phi.power == 0:
        return 6
    return int(math.ceil(math.log2(1.0 / min(phi.core, 0.5)))) + 6


def _radial_energies(phi: TestFunction, level: int) -> tuple[float, float]:
    """(int chi^2 dx, int |grad chi|^2 dx) by 1-D radial quadrature about the center."""
    s, w = _radial_rule(level, 1.0, 0.0, _core_depth(phi))
    d, R = phi.d, phi.radius
    jac = sphere_area(d) * (R * s) ** (d - 1) * R * w
    val = np.sum(phi.profile(s) ** 2 * jac)
    grad = np.sum((phi.profile_slope_over_s(s) * s / R) ** 2 * jac)
    return float(val), float(grad)


def _spatial_frame(field: DriftField, phi: TestFunction):
    """Frame origin, radial extent and radial focus for the numerator quadrature."""
    c = np.asarray(phi.center, dtype=float)
    R = phi.radius
    locus = _grading_locus(field)
    for p in locus.points:
        p = np.asarray(p, dtype=float)
        if np.linalg.norm(p - c) < R:
            return p, np.linalg.norm(p - c) + R, 0.0
    if locus.shells:
        o = np.zeros(phi.d)
        rc = np.linalg.norm(c)
        near = [s for s in locus.shells if abs(s - rc) < R]
        if near:
            return o, rc + R, near[0]
    return c, R, None


def _numerator_points(field, phi, level):
    origin, rmax, focus = _spatial_frame(field, phi)
    depth = _core_depth(phi) if np.allclose(origin, phi.center) else 12
    if focus is not None and focus > 0:
        depth = 24
    r, wr = _radial_rule(level, rmax, focus, depth)
    pts, w = ball_points(origin, r, wr, 4 + 4 * level)
    chi = phi.space_value(pts)
    keep = chi != 0.0
    return pts[keep], w[keep], chi[keep], r


def _quotient_at_level(field: DriftField, phi: TestFunction, g: GFunction, level: int) -> tuple[float, float, float]:
    val_x, grad_x = _radial_energies(phi, level)
    tn, tw = _time_rule(phi, field, g, level)
    eta2 = phi.time_profile(tn) ** 2
    mass_t = float(np.sum(eta2 * tw))
    grad_energy = mass_t * grad_x
    value_energy = mass_t * val_x
    if grad_energy < 1e-12 * value_energy or grad_energy == 0.0:
        raise DegenerateTest("test function has (numerically) no gradient energy")

    pts, w, chi, r = _numerator_points(field, phi, level)
    cell = float(np.min(np.diff(np.unique(r)))) if len(r) > 1 else phi.radius
    weighted = w * chi**2
    if field.stationary:
        _, pj, _ = jitter_off_locus(0.0, pts, field.locus, cell)
        num = mass_t * float(np.sum(field.norm_sq(tn[0], pj) * weighted))
    elif field.separable is not None:
        time_factor, spatial = field.separable
        _, pj, _ = jitter_off_locus(0.0, pts, field.locus, cell)
        tmass = float(np.sum(np.asarray(time_factor(tn)) ** 2 * eta2 * tw))
        num = tmass * float(np.sum(np.sum(spatial(pj) ** 2, axis=-1) * weighted))
    else:
        # spatial jitter is time independent; time hits are shifted per node
        _, pj, _ = jitter_off_locus(0.0, pts, field.locus.without_times(), cell)
        half_t = 0.5 * float(np.min(np.diff(tn))) if len(tn) > 1 else 0.5 * cell
        num = 0.0
        for t, wt, e2 in zip(tn, tw, eta2):
            t = float(t) + (half_t if t in field.locus.times else 0.0)
            num += wt * e2 * float(np.sum(field.norm_sq(t, pj) * weighted))
    # same spatial nodes as the numerator, so constant fields cancel exactly
    g_term = float(np.sum(np.asarray(g(tn)) * eta2 * tw)) * float(np.sum(weighted))
    return (num - g_term) / grad_energy, num, grad_energy


def rayleigh_quotient(
    field: DriftField,
    phi: TestFunction,
    g: GFunction | None = None,
    rtol: float = 5e-3,
    max_level: int = 5,
) -> float:
    """(int int |b phi|^2 - int g ||phi(t)||^2 dt) / int int |grad phi|^2.

    Graded midpoint quadrature in a spherical frame anchored at the singular
    locus; levels are refined until successive values differ by < ``rtol``
    relative to the kinetic-normalised scale.
    """
    if len(phi.center) != field.d:
        raise DimensionMismatch("test function and field dimensions differ")
    g = g if g is not None else ZeroG()
    prev = None
    for level in range(max_level + 1):
        q, num, _ = _quotient_at_level(field, phi, g, level)
        if prev is not None:
            scale = max(abs(q), abs(prev), 1e-14)
            if abs(q - prev) <= rtol * scale or (num == 0.0 and q == prev):
                return q
        prev = q
    return prev


# ----------------------------------------------------------------------------
# families


def origin_family(
    d: int = 3,
    center: Iterable[float] | None = None,
    t_center: float = 0.5,
    tau: float = 0.5,
    seed: int = 0,
) -> Callable[[int], Iterator[TestFunction]]:
    """Test functions concentrating at ``center``: shrinking radius and core, power (d-2)/2."""
    c = tuple(float(v) for v in (center if center is not None else (0.0,) * d))

    def gen(budget: int) -> Iterator[TestFunction]:
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(0.9, 1.1, size=budget)
        radii = np.geomspace(1.0, 1e-3, budget) * jitter
        cores = np.geomspace(1e-2, 1e-7, budget)
        for R, a in zip(radii, cores):
            yield TestFunction(c, float(R), t_center, tau, (d - 2) / 2.0, float(a))

    return gen


def random_family(
    d: int = 3,
    box: float = 2.0,
    t_range: tuple[float, float] = (0.0, 2.0),
    seed: int = 0,
) -> Callable[[int], Iterator[TestFunction]]:
    """Random bumps with random centers, radii and mild concentration."""

    def gen(budget: int) -> Iterator[TestFunction]:
        rng = np.random.default_rng(seed)
        for _ in range(budget):
            c = tuple(rng.uniform(-box, box, size=d))
            R = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
            tau = float(rng.uniform(0.1, 0.5) * (t_range[1] - t_range[0]) / 2)
            tc = float(rng.uniform(t_range[0] + tau, t_range[1] - tau))
            power = float(rng.uniform(0.0, (d - 2) / 2.0))
            core = float(np.exp(rng.uniform(np.log(1e-3), np.log(1.0))))
            yield TestFunction(c, R, tc, tau, power, core)

    return gen


def shell_family(d: int = 3, shell: float = 1.0, seed: int = 0) -> Callable[[int], Iterator[TestFunction]]:
    """Bumps centered on a sphere of radius ``shell`` with shrinking radii."""

    def gen(budget: int) -> Iterator[TestFunction]:
        rng = np.random.default_rng(seed)
        for R in np.geomspace(0.5, 0.01, budget):
            u = rng.normal(size=d)
            c = tuple(shell * u / np.linalg.norm(u))
            yield TestFunction(c, float(R), 0.5, 0.5, 0.0, 1.0)

    return gen


def estimate_form_bound(
    field: DriftField,
    family: Callable[[int], Iterable[TestFunction]],
    budget: int = 32,
    g: GFunction | None = None,
) -> float:
    """Largest Rayleigh quotient over ``budget`` test functions from ``family``.

    ``g`` defaults to the attached certificate's g (zero without a certificate).
    """
    if budget < 1:
        raise InvalidParameter("budget must be >= 1")
    if g is None:
        g = field.certificate.g if field.certificate is not None else ZeroG()
    best = None
    for phi in family(budget):
        try:
            q = rayleigh_quotient(field, phi, g)
        except DegenerateTest:
            continue
        best = q if best is None else max(best, q)
    if best is None:
        raise DegenerateTest("every candidate test function was degenerate")
    return best


# ----------------------------------------------------------------------------
# Morrey-type seminorm


def nested_cubes(center: Iterable[float], sides: Iterable[float]) -> Callable[[], Iterator[tuple[np.ndarray, float]]]:
    c = np.asarray(tuple(center), dtype=float)
    sides = list(sides)
    return lambda: ((c, float(s)) for s in sides)


def random_cubes(d: int, n: int, box: float = 2.0, seed: int = 0) -> Callable[[], Iterator[tuple[np.ndarray, float]]]:
    def gen():
        rng = np.random.default_rng(seed)
        for _ in range(n):
            yield rng.uniform(-box, box, size=d), float(np.exp(rng.uniform(np.log(0.01), np.log(1.0))))

    return gen


def _cube_average(field: DriftField, s: float, center: np.ndarray, side: float, per_octave: int, octaves: int) -> float:
    d = field.d
    axes = []
    for i in range(d):
        lo, hi = center[i] - side / 2, center[i] + side / 2
        foci = [p[i] for p in field.locus.points if lo <= p[i] <= hi]
        axes.append(graded_nodes(lo, hi, foci[0] if foci else None, per_octave, octaves))
    pts, w = tensor_points(axes)
    cell = side * 2.0**-octaves / per_octave
    _, pts, _ = jitter_off_locus(0.0, pts, field.locus, cell)
    vals = field.norm_sq(0.0, pts) ** s
    return float(np.sum(vals * w)) / side**d


def morrey_seminorm(
    field: DriftField,
    s: float,
    cube_sampler: Callable[[], Iterable[tuple[np.ndarray, float]]],
    n_cubes: int,
    per_octave: int = 6,
    octaves: int = 14,
) -> float:
    """max over sampled cubes Q of l(Q)^2 (mean over Q of |b|^{2s})^{1/s}, stationary slice t = 0."""
    if not s > 1:
        raise InvalidParameter("Morrey exponent s must exceed 1")
    if n_cubes < 1:
        raise InvalidParameter("n_cubes must be >= 1")
    best = 0.0
    for k, (center, side) in enumerate(cube_sampler()):
        if k >= n_cubes:
            break
        avg = _cube_average(field, s, np.asarray(center, dtype=float), side, per_octave, octaves)
        best = max(best, side**2 * avg ** (1.0 / s))
    return best


# ----------------------------------------------------------------------------
# sums


def _combine_g(w1: float, g1: GFunction, w2: float, g2: GFunction) -> GFunction:
    terms = tuple((w, g) for w, g in ((w1, g1), (w2, g2)) if not isinstance(g, ZeroG))
    return SumG(terms) if terms else ZeroG()


def sum_certificate(c1: FormBoundCertificate, c2: FormBoundCertificate) -> FormBoundCertificate:
    """Certificate for b1 + b2 from a Cauchy-Schwarz split of the cross term."""
    if c2.is_null:
        return c1
    if c1.is_null:
        return c2
    d1, d2 = c1.delta, c2.delta
    if d1 > 0 and d2 > 0:
        r1, r2 = math.sqrt(d1), math.sqrt(d2)
        return FormBoundCertificate((r1 + r2) ** 2, _combine_g(1 + r2 / r1, c1.g, 1 + r1 / r2, c2.g), "sum-rule")
    if d1 == 0 and d2 == 0:
        return FormBoundCertificate(0.0, _combine_g(2.0, c1.g, 2.0, c2.g), "sum-rule")
    eta = SUM_FALLBACK_ETA
    if d1 > 0:
        return FormBoundCertificate((1 + eta) * d1, _combine_g(1 + eta, c1.g, 1 + 1 / eta, c2.g), "sum-rule")
    return FormBoundCertificate((1 + eta) * d2, _combine_g(1 + 1 / eta, c1.g, 1 + eta, c2.g), "sum-rule")


def sum_fields(b1: DriftField, b2: DriftField) -> DriftField:
    if b1.d != b2.d:
        raise DimensionMismatch(f"cannot add fields of dimension {b1.d} and {b2.d}")
    if b2.field_id == "zero":
        return b1
    if b1.field_id == "zero":
        return b2
    cert = None
    if b1.certificate is not None and b2.certificate is not None:
        cert = sum_certificate(b1.certificate, b2.certificate)
    sup = None if b1.sup_bound is None or b2.sup_bound is None else b1.sup_bound + b2.sup_bound
    f1, f2 = b1.fn, b2.fn
    return DriftField(
        d=b1.d,
        fn=lambda t, x: f1(t, x) + f2(t, x),
        locus=b1.locus.union(b2.locus),
        certificate=cert,
        sup_bound=sup,
        stationary=b1.stationary and b2.stationary,
        field_id=f"sum:{b1.field_id}+{b2.field_id}",
        params={"left": dict(b1.params), "right": dict(b2.params)},
    )
