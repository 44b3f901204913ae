"""Closed-form constants used by certificates and schedules."""

from __future__ import annotations

import math

from ..errors import InvalidParameter


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d, pi^{d/2} / Gamma(d/2 + 1)."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def unit_ball_volume_product_reading(d: int) -> float:
    """pi^{d/2} * Gamma(d/2 + 1): the product reading, kept for reporting only."""
    return math.pi ** (d / 2) * math.gamma(d / 2 + 1)


def sobolev_constant(d: int) -> float:
    """Sharp constant S_d with ||f||_{2d/(d-2)}^2 <= S_d ||grad f||_2^2."""
    if d < 3:
        raise InvalidParameter("Sobolev embedding constant needs d >= 3")
    return (math.gamma(d) / math.gamma(d / 2)) ** (2.0 / d) / (math.pi * d * (d - 2))


def hardy_constant(d: int) -> float:
    """Best C in int |phi|^2/|x|^2 <= C int |grad phi|^2, i.e. (2/(d-2))^2."""
    return (2.0 / (d - 2)) ** 2


def strichartz_delta(weak_ld_norm: float, d: int, reading: str = "standard") -> float:
    """Form-bound delta of a field from its weak L^d quasi-norm.

    ``reading`` selects the ball-volume formula: ``"standard"`` or ``"product"``.
    """
    if weak_ld_norm < 0 or d < 3:
        raise InvalidParameter("need norm >= 0 and d >= 3")
    omega = unit_ball_volume(d) if reading == "standard" else unit_ball_volume_product_reading(d)
    return (weak_ld_norm * omega ** (-1.0 / d) * 2.0 / (d - 2)) ** 2


def strichartz_delta_readings(weak_ld_norm: float, d: int) -> dict[str, float]:
    return {r: strichartz_delta(weak_ld_norm, d, r) for r in ("standard", "product")}


def admissible_q_interval(d: int, delta: float) -> tuple[float, float]:
    """Open interval ]d, delta^{-1/2}[ of exponents for the weighted energy bound."""
    if delta <= 0:
        return float(d), math.inf
    return float(d), delta**-0.5


def lp_threshold(delta: float) -> float:
    """Lower end 2/(2 - sqrt(delta)) of the quasi-contraction exponent range."""
    if delta >= 4:
        return math.inf
    return 2.0 / (2.0 - math.sqrt(delta))


def critical_hardy_delta(d: int) -> float:
    """Coefficient above which the attracting inverse-square drift traps paths: 4 (d/(d-2))^2."""
    return 4.0 * (d / (d - 2)) ** 2
