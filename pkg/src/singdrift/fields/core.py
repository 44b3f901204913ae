"""Drift fields, their singular loci and form-bound certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable

import numpy as np
from scipy import integrate

from ..errors import InvalidParameter, SingularSample

PROVENANCES = (
    "hardy",
    "strichartz-weak-Ld",
    "hölder-sobolev-Ld",
    "young-lps",
    "morrey-heuristic",
    "numeric-estimate",
    "sum-rule",
)


@dataclass(frozen=True)
class Locus:
    """Where a field may be singular: points, origin-centred spheres, time instants."""

    points: tuple[tuple[float, ...], ...] = ()
    shells: tuple[float, ...] = ()
    times: tuple[float, ...] = ()

    @property
    def kind(self) -> str:
        kinds = [k for k, v in (("point", self.points), ("shell", self.shells), ("time", self.times)) if v]
        return "+".join(kinds) if kinds else "none"

    @property
    def is_empty(self) -> bool:
        return not (self.points or self.shells or self.times)

    def union(self, other: "Locus") -> "Locus":
        return Locus(
            tuple(dict.fromkeys(self.points + other.points)),
            tuple(dict.fromkeys(self.shells + other.shells)),
            tuple(dict.fromkeys(self.times + other.times)),
        )

    def without_times(self) -> "Locus":
        return Locus(self.points, self.shells, ())

    def space_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance of points x (..., d) to the spatial part of the locus (inf if none)."""
        x = np.asarray(x, dtype=float)
        dist = np.full(x.shape[:-1], np.inf)
        for p in self.points:
            dist = np.minimum(dist, np.linalg.norm(x - np.asarray(p), axis=-1))
        if self.shells:
            r = np.linalg.norm(x, axis=-1)
            for s in self.shells:
                dist = np.minimum(dist, np.abs(r - s))
        return dist

    def contains(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        hit = self.space_distance(x) == 0.0
        if self.times:
            t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
            for t0 in self.times:
                hit = hit | (t == t0)
        return hit

    def to_record(self) -> dict:
        return {"points": [list(p) for p in self.points], "shells": list(self.shells), "times": list(self.times)}


NO_LOCUS = Locus()


def jitter_off_locus(t, x: np.ndarray, locus: Locus, cell: float, cell_t: float | None = None):
    """Shift samples lying exactly on the locus by half a quadrature cell.

    Spatial hits move along the diagonal (1,...,1)/sqrt(d); time hits move
    forward by half a time cell.  Returns (t, x, number_of_shifted_samples).
    """
    x = np.array(x, dtype=float, copy=True)
    t = np.array(np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1]), copy=True)
    if locus.is_empty:
        return t, x, 0
    d = x.shape[-1]
    hits = locus.space_distance(x) == 0.0
    x[hits] += 0.5 * cell / math.sqrt(d)
    n = int(hits.sum())
    for t0 in locus.times:
        th = t == t0
        t[th] += 0.5 * (cell_t if cell_t is not None else cell)
        n += int(th.sum())
    return t, x, n


# ----------------------------------------------------------------------------
# time functions g with antiderivative G(t) = int_0^t g


class GFunction:
    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def antiderivative(self, t):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def singular_times(self) -> tuple[float, ...]:
        return ()

    def window_sup(self, h: float, T: float, n: int = 257) -> float:
        """sup over s in [0, T-h] of int_s^{s+h} g (grid search plus the locus edges)."""
        if h <= 0:
            return 0.0
        s = np.linspace(0.0, max(T - h, 0.0), n)
        extra = [t0 + off for t0 in self.singular_times() for off in (-h, -h / 2, 0.0)]
        s = np.concatenate([s, np.clip(extra, 0.0, max(T - h, 0.0))]) if extra else s
        G = np.vectorize(self.antiderivative)
        return float(np.max(G(s + h) - G(s)))


class ZeroG(GFunction):
    kind = "zero"

    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def antiderivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True, eq=False)
class ConstG(GFunction):
    value: float
    kind = "const"

    def __post_init__(self):
        if self.value < 0:
            raise InvalidParameter("g must be nonnegative")

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def antiderivative(self, t):
        return self.value * np.asarray(t, dtype=float)

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True, eq=False)
class PowerG(GFunction):
    """g(t) = C |t - t0|^(-alpha), alpha < 1."""

    C: float
    t0: float
    alpha: float
    kind = "power"

    def __post_init__(self):
        if self.C < 0 or not (0 <= self.alpha < 1) or self.t0 < 0:
            raise InvalidParameter("power g needs C >= 0, t0 >= 0, 0 <= alpha < 1")

    def __call__(self, t):
        with np.errstate(divide="ignore"):
            return self.C * np.abs(np.asarray(t, dtype=float) - self.t0) ** (-self.alpha)

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        e = 1.0 - self.alpha

        def F(u):  # int_0^u |tau - t0|^{-alpha}, u >= 0
            return (np.sign(u - self.t0) * np.abs(u - self.t0) ** e + self.t0**e) / e

        return self.C * F(t)

    def params(self):
        return {"C": self.C, "t0": self.t0, "alpha": self.alpha}

    def singular_times(self):
        return (self.t0,)


@dataclass(frozen=True, eq=False)
class TimeLogG(GFunction):
    """g(t) = C |t - t0|^{-1} (log(e + |t - t0|^{-1}))^{-1-gamma}; G by adaptive quadrature."""

    C: float
    t0: float
    gamma: float
    kind = "time-log"

    def __post_init__(self):
        if self.C < 0 or self.gamma <= 0 or self.t0 < 0:
            raise InvalidParameter("time-log g needs C >= 0, gamma > 0, t0 >= 0")

    def __call__(self, t):
        u = np.abs(np.asarray(t, dtype=float) - self.t0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.C / u * np.log(math.e + 1.0 / u) ** (-1.0 - self.gamma)

    def _radial(self, u: float) -> float:
        # int_0^u C s^{-1} log(e + 1/s)^{-1-gamma} ds; substitute s = e^{-y}
        if u <= 0:
            return 0.0
        f = lambda y: self.C * float(np.logaddexp(1.0, y)) ** (-1.0 - self.gamma)
        val, _ = integrate.quad(f, -math.log(u), np.inf, limit=200)
        return val

    def antiderivative(self, t):
        def one(tt):
            if tt <= self.t0:
                return self._radial(self.t0) - self._radial(self.t0 - tt)
            return self._radial(self.t0) + self._radial(tt - self.t0)

        return np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float))

    def params(self):
        return {"C": self.C, "t0": self.t0, "gamma": self.gamma}

    def singular_times(self):
        return (self.t0,)


@dataclass(frozen=True, eq=False)
class SumG(GFunction):
    terms: tuple[tuple[float, GFunction], ...]
    kind = "sum"

    def __call__(self, t):
        return sum(w * g(t) for w, g in self.terms)

    def antiderivative(self, t):
        return sum(w * g.antiderivative(t) for w, g in self.terms)

    def params(self):
        return {"terms": [{"weight": w, "g_kind": g.kind, "g_params": g.params()} for w, g in self.terms]}

    def singular_times(self):
        return tuple(t for _, g in self.terms for t in g.singular_times())


def g_from_record(kind: str, params: dict) -> GFunction:
    if kind == "zero":
        return ZeroG()
    if kind == "const":
        return ConstG(**params)
    if kind == "power":
        return PowerG(**params)
    if kind == "time-log":
        return TimeLogG(**params)
    if kind == "sum":
        return SumG(tuple((t["weight"], g_from_record(t["g_kind"], t["g_params"])) for t in params["terms"]))
    raise InvalidParameter(f"unknown g kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FormBoundCertificate:
    """Asserts |b(t,.)|^2 <= delta (-Laplacian) + g(t) as quadratic forms."""

    delta: float
    g: GFunction = field(default_factory=ZeroG)
    provenance: str = "numeric-estimate"

    def __post_init__(self):
        if not self.delta >= 0:
            raise InvalidParameter("delta must be nonnegative")
        if self.provenance not in PROVENANCES:
            raise InvalidParameter(f"unknown provenance {self.provenance!r}")

    @property
    def is_null(self) -> bool:
        return self.delta == 0 and isinstance(self.g, ZeroG)

    def G(self, t):
        return self.g.antiderivative(t)

    def F(self, h: float, T: float) -> float:
        """h + sup_{s in [0, T-h]} int_s^{s+h} g."""
        return h + self.g.window_sup(h, T)

    def to_record(self) -> dict:
        return {"delta": self.delta, "g_kind": self.g.kind, "g_params": self.g.params(), "provenance": self.provenance}

    @classmethod
    def from_record(cls, rec: dict) -> "FormBoundCertificate":
        return cls(rec["delta"], g_from_record(rec["g_kind"], rec["g_params"]), rec["provenance"])


# ----------------------------------------------------------------------------


Evaluator = Callable[[Any, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class DriftField:
    """A vector field b(t, x) on [0, inf) x R^d, d >= 3.

    ``fn`` is vectorised: x has shape (..., d), t is a scalar or broadcasts
    against x[..., 0]; it returns (..., d).  Fields never guard against their
    locus in ``fn``: integrators jitter, and :func:`eval_drift` refuses.

    ``sup_bound`` set means the field is bounded and smooth with |b| <= sup_bound.
    ``separable`` = (time_factor, spatial) lets solvers evaluate the spatial
    part once; ``steep_locus`` remembers the source locus after mollification.
    """

    d: int
    fn: Evaluator
    locus: Locus = NO_LOCUS
    certificate: FormBoundCertificate | None = None
    sup_bound: float | None = None
    stationary: bool = False
    field_id: str = "custom"
    params: dict = field(default_factory=dict)
    separable: tuple[Callable, Callable] | None = None
    steep_locus: Locus | None = None
    time_support: tuple[float, float] | None = None
    magnitude_sq: Callable | None = None

    def __post_init__(self):
        if self.d < 3:
            raise InvalidParameter("dimension d must be >= 3")

    @property
    def bounded_smooth(self) -> bool:
        return self.sup_bound is not None

    def __call__(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise InvalidParameter(f"points must have last axis {self.d}")
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.fn(t, x)

    def norm_sq(self, t, x) -> np.ndarray:
        """|b(t,x)|^2, using a closed form when the field provides one."""
        if self.magnitude_sq is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.magnitude_sq(t, np.asarray(x, dtype=float))
        return np.sum(self(t, x) ** 2, axis=-1)

    def with_certificate(self, cert: FormBoundCertificate | None) -> "DriftField":
        from dataclasses import replace

        return replace(self, certificate=cert)


def eval_drift(field: DriftField, t: float, x) -> np.ndarray:
    """Evaluate b(t, x) at one point, refusing samples on the singular locus."""
    x = np.asarray(x, dtype=float)
    if x.shape != (field.d,):
        raise InvalidParameter(f"x must have shape ({field.d},)")
    if bool(field.locus.contains(t, x)):
        raise SingularSample(f"({t}, {x.tolist()}) lies on the singular locus of {field.field_id}")
    out = field(t, x)
    if not np.all(np.isfinite(out)):
        raise SingularSample(f"non-finite drift at ({t}, {x.tolist()})")
    return out


@lru_cache(maxsize=None)
def _zero_fn_cache(d: int):
    return lambda t, x: np.zeros(np.shape(x))


def zero_field(d: int = 3) -> DriftField:
    return DriftField(
        d=d,
        fn=_zero_fn_cache(d),
        certificate=FormBoundCertificate(0.0, ZeroG(), "hardy"),
        sup_bound=0.0,
        stationary=True,
        field_id="zero",
        magnitude_sq=lambda t, x: np.zeros(np.shape(x)[:-1]),
    )


def constant_field(c, d: int | None = None) -> DriftField:
    c = np.asarray(c, dtype=float)
    d = d or len(c)
    mag = float(np.linalg.norm(c))
    return DriftField(
        d=d,
        fn=lambda t, x: np.broadcast_to(c, np.shape(x)).copy(),
        certificate=FormBoundCertificate(0.0, ConstG(mag**2), "hölder-sobolev-Ld"),
        sup_bound=mag,
        stationary=True,
        field_id="constant",
        params={"c": c.tolist()},
    )
