"""Truncated space-time grids and the polynomial weight."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from ..errors import InvalidParameter, StabilityViolation


@dataclass(frozen=True)
class Weight:
    """rho(x) = (1 + kappa |x|^2)^(-theta), integrable on R^d when theta > d/2."""

    kappa: float = 1.0
    theta: float = 4.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise InvalidParameter("weight needs kappa > 0")

    def validate(self, d: int) -> None:
        if not self.theta > d / 2:
            raise InvalidParameter(f"weight exponent theta must exceed d/2 = {d / 2}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (1.0 + self.kappa * np.sum(x * x, axis=-1)) ** (-self.theta)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        base = 1.0 + self.kappa * np.sum(x * x, axis=-1)
        return (-2.0 * self.theta * self.kappa * base ** (-self.theta - 1.0))[..., None] * x

    def gradient_bound(self) -> float:
        """theta sqrt(kappa): |grad rho| <= this * rho."""
        return self.theta * math.sqrt(self.kappa)

    def tail_fraction(self, d: int, radius: float) -> float:
        """Share of int rho lying outside the ball of the given radius (bounds the box tail)."""
        self.validate(d)
        f = lambda r: (1 + self.kappa * r * r) ** (-self.theta) * r ** (d - 1)
        total, _ = integrate.quad(f, 0, np.inf)
        tail, _ = integrate.quad(f, radius, np.inf)
        return tail / total

    def boundary_ratio(self, half_width: float) -> float:
        """rho at the nearest boundary point over rho(0)."""
        return (1 + self.kappa * half_width**2) ** (-self.theta)


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Vertex grid on [-L, L]^d with ``intervals`` cells per axis, homogeneous Dirichlet boundary.

    Interior nodes are x_i = -L + i h, i = 1..intervals-1; an even interval
    count puts a node at the origin.  Time runs over [t0, T] in ``steps`` steps.
    """

    d: int = 3
    half_width: float = 4.0
    intervals: int = 96
    steps: int = 200
    t0: float = 0.0
    T: float = 0.5
    safety: float = 4.0
    save_every: int = 10

    def __post_init__(self):
        if self.d < 3:
            raise InvalidParameter("dimension d must be >= 3")
        if self.intervals < 4 or self.steps < 1 or self.half_width <= 0 or not self.T > self.t0:
            raise InvalidParameter("grid needs >= 4 intervals, >= 1 step, L > 0 and T > t0")
        if self.save_every < 1:
            raise InvalidParameter("save_every must be >= 1")

    @property
    def h_x(self) -> float:
        return 2.0 * self.half_width / self.intervals

    @property
    def h_t(self) -> float:
        return (self.T - self.t0) / self.steps

    @property
    def n_interior(self) -> int:
        return self.intervals - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_interior,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h_x**self.d

    def axis(self) -> np.ndarray:
        return -self.half_width + self.h_x * np.arange(1, self.intervals)

    def points(self) -> np.ndarray:
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)

    def times(self) -> np.ndarray:
        return self.t0 + self.h_t * np.arange(self.steps + 1)

    def diffusion_limit(self) -> float:
        return self.h_x**2 / (2 * self.d) * self.safety

    def check_time_step(self) -> None:
        if self.h_t > self.diffusion_limit():
            raise StabilityViolation(
                f"time step {self.h_t:.4g} exceeds h_x^2/(2d)*safety = {self.diffusion_limit():.4g}"
            )

    def with_(self, **kw) -> "SpaceTimeGrid":
        return SpaceTimeGrid(**{**asdict(self), **kw})

    def to_record(self) -> dict:
        return {**asdict(self), "h_x": self.h_x, "h_t": self.h_t}
