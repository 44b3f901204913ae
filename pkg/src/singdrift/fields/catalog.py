"""Catalog of singular drift fields with analytic certificates, addressable by id."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate

from ..errors import InvalidParameter
from ..quadrature import sphere_area
from .constants import sobolev_constant, strichartz_delta
from .core import (
    ConstG,
    DriftField,
    FormBoundCertificate,
    Locus,
    PowerG,
    TimeLogG,
    ZeroG,
    zero_field,
)

ORIGIN_PROBE_TIMES = np.linspace(0.0, 20.0, 401)


def _radius(x):
    return np.linalg.norm(x, axis=-1)


def _tcol(t, x):
    """Broadcast t against x[..., 0] and append an axis for vector scaling."""
    return np.broadcast_to(np.asarray(t, dtype=float), np.shape(x)[:-1])[..., None]


def make_hardy_drift(
    d: int = 3,
    delta: float = 0.04,
    sign: int = 1,
    kappa: Callable | None = None,
) -> DriftField:
    """sign * sqrt(delta) (d-2)/2 kappa(t) x/|x|^2, certified (delta, 0) by Hardy's inequality."""
    if not delta > 0:
        raise InvalidParameter("hardy drift needs delta > 0")
    if sign not in (1, -1):
        raise InvalidParameter("sign must be +1 or -1")
    if d < 3:
        raise InvalidParameter("dimension d must be >= 3")
    if kappa is not None:
        probe = np.asarray(kappa(ORIGIN_PROBE_TIMES), dtype=float)
        if np.any(np.abs(probe) > 1.0 + 1e-12):
            raise InvalidParameter("|kappa(t)| must not exceed 1")
    coef = sign * math.sqrt(delta) * (d - 2) / 2.0

    if kappa is None:

        def fn(t, x):
            return coef * x / np.sum(x * x, axis=-1, keepdims=True)

        def mag(t, x):
            return coef**2 / np.sum(x * x, axis=-1)

    else:

        def fn(t, x):
            k = np.asarray(kappa(_tcol(t, x)), dtype=float)
            return coef * k * x / np.sum(x * x, axis=-1, keepdims=True)

        def mag(t, x):
            k = np.asarray(kappa(_tcol(t, x)[..., 0]), dtype=float)
            return (coef * k) ** 2 / np.sum(x * x, axis=-1)

    return DriftField(
        d=d,
        fn=fn,
        locus=Locus(points=((0.0,) * d,)),
        certificate=FormBoundCertificate(delta, ZeroG(), "hardy"),
        stationary=kappa is None,
        field_id="hardy",
        params={"d": d, "delta": delta, "sign": sign, "modulated": kappa is not None},
        magnitude_sq=mag,
    )


def make_hardy_time_drift(
    d: int = 3,
    delta: float = 0.04,
    C: float = 0.05,
    t0: float = 0.5,
    gamma: float = 0.5,
    omega: float = 1.0,
) -> DriftField:
    """Radial field with |b|^2 = delta ((d-2)/2)^2 cos(omega t)^2/|x|^2 + g(t), g time-singular at t0.

    Certified by (delta, g) since the first term is Hardy-bounded.
    """
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    g = TimeLogG(C, t0, gamma)
    a2 = delta * ((d - 2) / 2.0) ** 2

    def mag(t, x):
        tt = _tcol(t, x)[..., 0]
        return a2 * np.cos(omega * tt) ** 2 / np.sum(x * x, axis=-1) + g(tt)

    def fn(t, x):
        r = _radius(x)[..., None]
        return np.sqrt(mag(t, x))[..., None] * x / r

    return DriftField(
        d=d,
        fn=fn,
        locus=Locus(points=((0.0,) * d,), times=(t0,)),
        certificate=FormBoundCertificate(delta, g, "hardy"),
        field_id="hardy-time",
        params={"d": d, "delta": delta, "C": C, "t0": t0, "gamma": gamma, "omega": omega},
        magnitude_sq=mag,
    )


def shell_log_trace_constant(C: float, a: float, c: float, d: int) -> float:
    """K with int V|phi|^2 <= K sup over rays; combines the 1-D mass of V and the radial Jacobian."""
    mass = 2.0 * C * math.log(1.0 / a) ** (1.0 - c) / (c - 1.0)
    return mass * ((1.0 + a) / (1.0 - a)) ** (d - 1)


def make_shell_log_drift(
    C: float = 1.0, a: float = 0.5, c: float = 2.0, d: int = 3, delta: float = 0.01
) -> DriftField:
    """Radial field with |b|^2 = C 1_shell ||x|-1|^{-1} (-ln||x|-1|)^{-c}, shell 1-a < |x| < 1+a.

    Locally square integrable, not in L^{2+eps} near |x| = 1.  The certificate
    comes from a 1-D trace inequality along rays: with K the trace constant,
    |b|^2 <= delta(-Lap) + K/(2a) + K^2/delta.
    """
    if not C > 0 or not 0 < a < 1 or not c > 1:
        raise InvalidParameter("shell-log needs C > 0, 0 < a < 1, c > 1")
    if not delta > 0:
        raise InvalidParameter("delta must be positive")

    def mag(t, x):
        u = np.abs(_radius(x) - 1.0)
        inside = u < a
        us = np.where(inside, u, 0.5)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = C / (us * (-np.log(us)) ** c)
        return np.where(inside, val, 0.0)

    def fn(t, x):
        r = _radius(x)[..., None]
        return np.sqrt(mag(t, x))[..., None] * x / r

    K = shell_log_trace_constant(C, a, c, d)
    g = ConstG(K / (2 * a) + K * K / delta)
    return DriftField(
        d=d,
        fn=fn,
        locus=Locus(shells=(1.0,)),
        certificate=FormBoundCertificate(delta, g, "numeric-estimate"),
        stationary=True,
        field_id="shell-log",
        params={"C": C, "a": a, "c": c, "d": d, "delta": delta},
        magnitude_sq=mag,
    )


def make_lps_drift(
    d: int = 3,
    A: float = 0.1,
    alpha: float = 0.2,
    beta: float = 0.4,
    q: float = 6.0,
    t0: float = 0.5,
    delta: float = 0.01,
) -> DriftField:
    """A |t-t0|^{-alpha} |x|^{-beta} 1_{|x|<1} x/|x| with |b| in L^p_t L^q_x, d/q + 2/p = 1.

    The certificate splits Hoelder + Sobolev + interpolation by Young's
    inequality so that the spatial part carries exactly ``delta``.
    """
    if not q > d:
        raise InvalidParameter("need q > d")
    p = 2.0 / (1.0 - d / q)
    if not (0 <= alpha * p < 1 and 0 <= beta * q < d):
        raise InvalidParameter("need alpha p < 1 and beta q < d for local integrability")
    if not delta > 0 or not A > 0:
        raise InvalidParameter("need A > 0 and delta > 0")
    theta = d / q
    mu = delta / (theta * sobolev_constant(d))
    space_norm = (sphere_area(d) / (d - beta * q)) ** (1.0 / q)
    # g(t) = (1-theta) mu^{-theta/(1-theta)} N(t)^p with N(t) = A space_norm |t-t0|^{-alpha}
    coeff = (1 - theta) * mu ** (-theta / (1 - theta)) * (A * space_norm) ** p
    g = PowerG(coeff, t0, alpha * p)

    def mag(t, x):
        tt = _tcol(t, x)[..., 0]
        r = _radius(x)
        with np.errstate(divide="ignore"):
            val = (A * np.abs(tt - t0) ** (-alpha) * r ** (-beta)) ** 2
        return np.where(r < 1.0, val, 0.0)

    def fn(t, x):
        r = _radius(x)[..., None]
        return np.sqrt(mag(t, x))[..., None] * x / r

    return DriftField(
        d=d,
        fn=fn,
        locus=Locus(points=((0.0,) * d,), times=(t0,)),
        certificate=FormBoundCertificate(delta, g, "young-lps"),
        field_id="lps",
        params={"d": d, "A": A, "alpha": alpha, "beta": beta, "q": q, "p": p, "t0": t0, "delta": delta},
        magnitude_sq=mag,
    )


def anisotropic_weak_ld_norm(A: float, d: int) -> float:
    """Weak L^d quasi-norm of A (1 + x1/(2|x|)) / |x|."""
    lower = sphere_area(d - 1)
    w = lambda u: (1 + u / 2) ** d * (1 - u * u) ** ((d - 3) / 2)
    val, _ = integrate.quad(w, -1.0, 1.0)
    return A * (lower * val / d) ** (1.0 / d)


def make_weak_ld_drift(d: int = 3, A: float = 0.05) -> DriftField:
    """A (1 + x1/(2|x|)) x/|x|^2: in weak L^d, not radial, certified through the weak-norm bound."""
    if not A > 0:
        raise InvalidParameter("A must be positive")

    def fn(t, x):
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return A * (1 + x[..., :1] / (2 * np.sqrt(r2))) * x / r2

    def mag(t, x):
        r = _radius(x)
        return (A * (1 + x[..., 0] / (2 * r)) / r) ** 2

    norm = anisotropic_weak_ld_norm(A, d)
    return DriftField(
        d=d,
        fn=fn,
        locus=Locus(points=((0.0,) * d,)),
        certificate=FormBoundCertificate(strichartz_delta(norm, d), ZeroG(), "strichartz-weak-Ld"),
        stationary=True,
        field_id="weak-ld",
        params={"d": d, "A": A, "weak_ld_norm": norm},
        magnitude_sq=mag,
    )


_BUILDERS: dict[str, Callable[..., DriftField]] = {
    "hardy": lambda **p: _hardy_from_params(**p),
    "hardy-time": make_hardy_time_drift,
    "shell-log": make_shell_log_drift,
    "lps": make_lps_drift,
    "weak-ld": make_weak_ld_drift,
    "zero": lambda d=3: zero_field(d),
}


def _hardy_from_params(d=3, delta=0.04, sign=1, omega=None):
    kappa = None if omega is None else (lambda t: np.cos(omega * t))
    f = make_hardy_drift(d, delta, sign, kappa)
    if omega is not None:
        f.params["omega"] = omega
    return f


FIELD_IDS = tuple(_BUILDERS) + ("sum:<a>+<b>",)


def build_field(field_id: str, params: dict | None = None) -> DriftField:
    """Construct a catalog field.

    ``sum:<a>+<b>`` takes ``params = {"left": {...}, "right": {...}}``.
    """
    params = dict(params or {})
    if field_id.startswith("sum:"):
        from .formbound import sum_fields

        parts = field_id[4:].split("+")
        if len(parts) != 2 or not all(parts):
            raise InvalidParameter(f"malformed sum id {field_id!r}")
        extra = set(params) - {"left", "right"}
        if extra:
            raise InvalidParameter(f"sum fields accept only 'left'/'right', got {sorted(extra)}")
        return sum_fields(build_field(parts[0], params.get("left")), build_field(parts[1], params.get("right")))
    if field_id not in _BUILDERS:
        raise InvalidParameter(f"unknown field id {field_id!r}; known: {', '.join(FIELD_IDS)}")
    try:
        return _BUILDERS[field_id](**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {field_id}: {exc}") from None
