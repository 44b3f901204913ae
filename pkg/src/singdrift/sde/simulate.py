"""Euler-Maruyama ensembles for X_t = x - int_0^t b(r, X_r) dr + sqrt(2) W_t."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigInvalid
from ..fields.core import DriftField
from ..rawblock import RawBlock
from .rng import bridge_normals, step_normals, stream_id

MICRO_NOISE_BUDGET = 8_000_000  # doubles of pre-drawn bridge noise held per chunk


@dataclass(frozen=True)
class SimConfig:
    """Time step, horizon, path count and seeding of one ensemble.

    ``substep`` > 1 refines steps whose start lies within
    ``substep_radius * sqrt(2 h_t)`` of the drift's steep locus.
    ``noise_scale`` = 0 freezes the Brownian motion (debug mode).
    """

    h_t: float = 0.005
    T: float = 1.0
    N: int = 10_000
    seed: int = 0
    substep: int = 1
    field_id: str = "zero"
    m: int | None = None
    record_every: int = 1
    workers: int = 1
    chunk: int = 1024
    noise_scale: float = 1.0
    substep_radius: float = 4.0

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h_t))

    def validate(self, sup_b: float | None = None) -> None:
        if not self.h_t > 0 or not self.T > 0:
            raise ConfigInvalid("h_t and T must be positive", "sim.h_t")
        if abs(self.steps * self.h_t - self.T) > 1e-9 * self.T:
            raise ConfigInvalid(f"T = {self.T} is not a multiple of h_t = {self.h_t}", "sim.T")
        if self.N < 1:
            raise ConfigInvalid("N must be >= 1", "sim.N")
        if self.substep < 1:
            raise ConfigInvalid("substep factor must be >= 1", "sim.substep")
        if self.record_every < 1 or self.chunk < 1 or self.workers < 1:
            raise ConfigInvalid("record_every, chunk and workers must be >= 1", "sim")
        if self.noise_scale < 0:
            raise ConfigInvalid("noise_scale must be >= 0", "sim.noise_scale")
        if sup_b is not None:
            eff = self.h_t / self.substep
            if eff * sup_b > 0.5 * math.sqrt(2 * eff) * (1 + 1e-12):
                raise ConfigInvalid(
                    f"drift increment {eff * sup_b:.3g} per resolved step exceeds half the diffusion "
                    f"increment {0.5 * math.sqrt(2 * eff):.3g}; lower h_t or raise substep",
                    "sim.h_t",
                )

    def to_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    paths: np.ndarray  # (N, n_rec, d)
    times: np.ndarray  # (n_rec,)
    x0: np.ndarray
    cfg: SimConfig
    field_id: str
    m: int | None
    substepped_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.paths.shape[0]

    @property
    def d(self) -> int:
        return self.paths.shape[2]

    @property
    def h_rec(self) -> float:
        return self.cfg.h_t * self.cfg.record_every

    def stream_ids(self) -> list[str]:
        return [stream_id(self.cfg.seed, p) for p in range(self.N)]

    def index_of(self, t: float) -> int | None:
        k = int(np.argmin(np.abs(self.times - t)))
        return k if abs(self.times[k] - t) <= 1e-9 * max(1.0, abs(t)) else None

    def to_block(self) -> RawBlock:
        return RawBlock(
            "path-ensemble",
            self.paths,
            (0.0, float(self.times[0]), 0.0),
            (1.0, self.h_rec, 1.0),
            {
                "N": self.N,
                "steps": self.cfg.steps,
                "d": self.d,
                "h_t": self.cfg.h_t,
                "seed": self.cfg.seed,
                "record_every": self.cfg.record_every,
                "x0": self.x0.tolist(),
                "field_id": self.field_id,
                "m": self.m,
            },
        )


def _near_locus(b: DriftField, t: float, X: np.ndarray, radius: float, h_t: float) -> np.ndarray:
    locus = b.steep_locus if b.steep_locus is not None else b.locus
    near = locus.space_distance(X) < radius
    for t0 in locus.times:
        if abs(t - t0) < 4 * h_t:
            near[:] = True
    return near


def _simulate_chunk(b: DriftField, x0: np.ndarray, cfg: SimConfig, lo: int, hi: int):
    d = len(x0)
    steps, h = cfg.steps, cfg.h_t
    paths = range(lo, hi)
    n = hi - lo
    dW = math.sqrt(h) * cfg.noise_scale * step_normals(cfg.seed, paths, steps, d)
    S = cfg.substep
    micro = bridge_normals(cfg.seed, paths, steps, S, d) if S > 1 else None
    zero = b.field_id == "zero" or b.sup_bound == 0.0
    radius = cfg.substep_radius * math.sqrt(2 * h)
    n_rec = steps // cfg.record_every + (1 if steps % cfg.record_every else 0) + 1
    out = np.empty((n, n_rec, d))
    X = np.broadcast_to(x0, (n, d)).copy()
    out[:, 0] = X
    rec = 1
    sqrt2 = math.sqrt(2.0)
    hs = h / S
    n_sub = 0
    for k in range(steps):
        t = k * h
        inc = dW[:, k]
        if zero:
            X = X + sqrt2 * inc
        else:
            near = _near_locus(b, t, X, radius, h) if S > 1 else np.zeros(n, dtype=bool)
            far = ~near
            if np.any(far):
                Xf = X[far]
                X[far] = Xf - b(t, Xf) * h + sqrt2 * inc[far]
            if np.any(near):
                n_sub += int(near.sum())
                Y = X[near]
                xi = micro[near, k]  # (n_near, S, d)
                # bridge split: micro increments summing exactly to the step increment
                parts = inc[near][:, None, :] / S + cfg.noise_scale * math.sqrt(hs) * (
                    xi - xi.mean(axis=1, keepdims=True)
                )
                for j in range(S):
                    Y = Y - b(t + j * hs, Y) * hs + sqrt2 * parts[:, j]
                X[near] = Y
        if (k + 1) % cfg.record_every == 0 or k + 1 == steps:
            out[:, rec] = X
            rec += 1
    return out, n_sub


def simulate_euler(b: DriftField, x, cfg: SimConfig) -> PathEnsemble:
    """N Euler-Maruyama paths from x; bit-identical for fixed (seed, N, h_t, field) and any worker count."""
    x0 = np.asarray(x, dtype=float)
    if x0.shape != (b.d,):
        raise ConfigInvalid(f"start point must have {b.d} coordinates", "sim.x")
    if b.sup_bound is None:
        raise ConfigInvalid(f"field {b.field_id} is not bounded; simulate its mollified approximation", "field")
    cfg.validate(b.sup_bound)
    per_path_micro = cfg.steps * cfg.substep * b.d if cfg.substep > 1 else 0
    chunk = cfg.chunk
    if per_path_micro:
        chunk = max(1, min(chunk, MICRO_NOISE_BUDGET // per_path_micro))
    bounds = [(lo, min(lo + chunk, cfg.N)) for lo in range(0, cfg.N, chunk)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(lambda lh: _simulate_chunk(b, x0, cfg, *lh), bounds))
    else:
        results = [_simulate_chunk(b, x0, cfg, lo, hi) for lo, hi in bounds]
    paths = np.concatenate([r[0] for r in results], axis=0)
    steps = cfg.steps
    idx = list(range(0, steps + 1, cfg.record_every))
    if idx[-1] != steps:
        idx.append(steps)
    times = np.asarray(idx, dtype=float) * cfg.h_t
    return PathEnsemble(paths, times, x0, cfg, b.field_id, cfg.m, sum(r[1] for r in results))
