"""The thirteen acceptance criteria, runnable at a quick or a full (desk-scale) level."""

from __future__ import annotations

import math
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import LabError
from ..fields import estimate_form_bound, make_hardy_drift, origin_family, zero_field
from ..mollify import build_approximation, default_gamma_rule, l2loc_distance
from ..pde import (
    FactoredSource,
    SpaceTimeGrid,
    Weight,
    energy_report,
    feller_convergence,
    gaussian,
    lp_contraction_check,
    smoothing_exponent_fit,
    solve_forward_cauchy,
    zero_drift_calibration,
)
from ..sde import (
    SimConfig,
    drift_integral_pde,
    duality_check,
    expected_drift_integral,
    krylov_functional,
    marginal_distance,
    occupation_near_origin,
    simulate_euler,
)

D = 3
HARDY_DELTA = 0.04
ENERGY_DELTA = 0.01
START = (0.5, 0.0, 0.0)


@dataclass(frozen=True)
class LevelSpec:
    name: str
    intervals: int
    steps: int
    N: int
    feller_ms: tuple[int, ...]
    krylov_steps: tuple[float, ...]
    smoothing_times: tuple[float, ...]
    schedule_pairs: int
    grid_overrides: tuple = ()

    def grid(self, **kw) -> SpaceTimeGrid:
        base = dict(d=D, intervals=self.intervals, steps=self.steps)
        base.update(dict(self.grid_overrides))
        base.update(kw)
        return SpaceTimeGrid(**base)

    def with_grid(self, **kw) -> "LevelSpec":
        return LevelSpec(**{**self.__dict__, "grid_overrides": tuple(sorted(kw.items()))})


FULL = LevelSpec("full", 96, 200, 10_000, (4, 8, 16, 32), (0.01, 0.005, 0.0025), (0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5), 4)
QUICK = LevelSpec("quick", 48, 100, 2_000, (4, 8, 16), (0.01, 0.005), (0.1, 0.2, 0.3, 0.4, 0.5), 2)
LEVELS = {"full": FULL, "quick": QUICK}


@dataclass
class CriterionResult:
    number: int
    slug: str
    passed: bool
    seconds: float
    limit: float
    detail: dict = field(default_factory=dict)
    error: str | None = None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" error={self.error}" if self.error else ""
        keys = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{tag}] {self.number:02d} {self.slug} ({self.seconds:.1f} s / {self.limit:.0f} s) {keys}{extra}"

    CSV_COLUMNS = ("number", "slug", "passed", "seconds", "limit", "detail", "error")

    def to_row(self) -> dict:
        import json

        return {
            "number": self.number,
            "slug": self.slug,
            "passed": self.passed,
            "seconds": round(self.seconds, 1),
            "limit": self.limit,
            "detail": json.dumps(self.detail, sort_keys=True, default=float),
            "error": self.error or "",
        }


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


# ----------------------------------------------------------------------------
# shared, cached builds


@lru_cache(maxsize=None)
def hardy(delta: float = HARDY_DELTA, sign: int = 1):
    return make_hardy_drift(D, delta, sign)


@lru_cache(maxsize=None)
def hardy_m(m: int, delta: float = HARDY_DELTA, gamma0: float = 0.5, cap_scale: float = 1.0):
    b = hardy(delta)
    cap = (lambda k: cap_scale / k**2) if cap_scale != 1.0 else (lambda k: 1.0 / k**2)
    return build_approximation(b, b.certificate, m, default_gamma_rule(gamma0), eps_cap=cap)


@lru_cache(maxsize=None)
def calibration(grid: SpaceTimeGrid) -> float:
    return zero_drift_calibration(grid)


def compact_bump(t, x):
    """exp(1 - 1/(1 - |x|^2)) inside the unit ball, 0 outside."""
    r2 = np.sum(np.asarray(x) ** 2, axis=-1)
    out = np.zeros(r2.shape)
    inside = r2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _spread(vals) -> float:
    vals = [float(v) for v in vals]
    return max(vals) / min(vals) - 1.0


def _band(vals) -> float:
    vals = [float(v) for v in vals]
    return max(vals) / min(vals)


def _decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


# ----------------------------------------------------------------------------
# criteria


def c01_heat_oracle(lv: LevelSpec) -> tuple[bool, dict]:
    err = calibration(lv.grid())
    return err <= 0.02, {"max_rel_error": err}


def c02_form_bound(lv: LevelSpec) -> tuple[bool, dict]:
    est = estimate_form_bound(hardy(), origin_family(D), 32)
    return 0.02 <= est <= HARDY_DELTA * 1.05, {"estimate": est}


def c03_delta_preservation(lv: LevelSpec) -> tuple[bool, dict]:
    ms = (4, 8, 16)
    ests, dists = [], []
    for m in ms:
        bm = hardy_m(m).field
        ests.append(estimate_form_bound(bm, origin_family(D), 32))
        dists.append(l2loc_distance(hardy(), bm))
    ok = all(e <= HARDY_DELTA * 1.05 for e in ests) and _decreasing(dists)
    return ok, {"m": list(ms), "estimates": ests, "l2loc": dists}


def c04_feller(lv: LevelSpec) -> tuple[bool, dict]:
    sched = [hardy_m(m).field for m in lv.feller_ms]
    rep = feller_convergence(sched, gaussian(None, 0.25), lv.grid(), lv.feller_ms)
    ok = rep.strictly_decreasing and rep.gaps[-1] <= 0.05 * rep.sup_f and rep.max_principle_ok
    return ok, {"m": list(lv.feller_ms), "gaps": rep.gaps, "max_principle": rep.max_principle_ok}


def c05_energy(lv: LevelSpec) -> tuple[bool, dict]:
    grid = lv.grid()
    raw = hardy(ENERGY_DELTA)
    src = FactoredSource(raw, lambda t, x: np.exp(-np.sum(np.asarray(x) ** 2, axis=-1) / 0.5), grid.h_x)
    f = gaussian(None, 0.25)
    ratios = []
    for m in (4, 8, 16):
        bm = hardy_m(m, ENERGY_DELTA).field
        sol = solve_forward_cauchy(bm, f, grid, source=src)
        ratios.append(energy_report(sol, 4.0, Weight(), src, f, raw.certificate, m).ratio)
    spread = _spread(ratios)
    return all(math.isfinite(r) for r in ratios) and spread <= 0.2, {"ratios": ratios, "spread": spread}


def c06_lp(lv: LevelSpec) -> tuple[bool, dict]:
    b = hardy_m(16)
    sol = solve_forward_cauchy(b.field, gaussian(None, 0.25), lv.grid())
    lhs, rhs, ok = lp_contraction_check(sol, 4.0, hardy().certificate)
    return ok, {"lhs": lhs, "rhs": rhs}


def _matched_runs(b, lv: LevelSpec):
    runs = []
    for t in lv.smoothing_times:
        steps = max(1, int(round(lv.steps * t / 0.5)))
        g = lv.grid(T=t, steps=steps, save_every=steps)
        runs.append(solve_forward_cauchy(b, gaussian(None, 4.0 * t), g))
    return runs


def c07_smoothing(lv: LevelSpec) -> tuple[bool, dict]:
    p, q = 2.0, 4.0
    target = -(D / 2) * (1 / p - 1 / q)
    zs = smoothing_exponent_fit(_matched_runs(zero_field(D), lv), p, q, times=lv.smoothing_times)
    hs = smoothing_exponent_fit(_matched_runs(hardy_m(16).field, lv), p, q, times=lv.smoothing_times)
    ok = abs(zs - target) <= 0.15 * abs(target) and hs >= target - 0.15
    return ok, {"target": target, "zero_slope": zs, "hardy_slope": hs}


def c08_krylov(lv: LevelSpec) -> tuple[bool, dict]:
    ratios = {}
    for m in (8, 16):
        bm = hardy_m(m).field
        for ht in lv.krylov_steps:
            ens = simulate_euler(bm, START, SimConfig(h_t=ht, T=1.0, N=lv.N, seed=1, substep=4, field_id="hardy", m=m))
            ratios[f"m{m}_h{ht:g}"] = krylov_functional(ens, bm, compact_bump, 4.0, hardy().certificate).ratio
    band = _band(ratios.values())
    return band <= 1.2, {"band": band, **ratios}


def c09_drift_integral(lv: LevelSpec) -> tuple[bool, dict]:
    cert = hardy().certificate
    b_drive, b_k = hardy_m(16).field, hardy_m(8).field
    ens = simulate_euler(b_drive, START, SimConfig(h_t=0.005, T=1.0, N=lv.N, seed=2, substep=4, field_id="hardy", m=16))
    per_len = [expected_drift_integral(ens, b_k, cert, (0.0, r)).extra["lhs_per_length"] for r in (0.25, 0.5, 1.0)]
    window_band = _band(per_len)

    r = 0.5
    grid = lv.grid()
    coarse = lv.grid(intervals=int(round(lv.intervals * 2 / 3)))
    w = drift_integral_pde(b_drive, b_k, (0.0, r), grid)
    w_coarse = drift_integral_pde(b_drive, b_k, (0.0, r), coarse)
    top = w.levels[0]
    k = np.unravel_index(int(np.argmax(top)), top.shape)
    x_star = grid.points()[k]
    sup_w = float(top[k])
    grid_budget = max(calibration(grid) * sup_w, abs(sup_w - float(w_coarse.levels[0].max())))
    ens0 = simulate_euler(b_drive, x_star, SimConfig(h_t=0.0025, T=r, N=lv.N, seed=2, substep=4, field_id="hardy", m=16))
    mc = expected_drift_integral(ens0, b_k, cert, (0.0, r))
    gap = abs(mc.lhs - sup_w)
    budget = 3 * mc.stderr + grid_budget
    ok = gap <= budget and window_band <= 2.0
    return ok, {
        "per_length": per_len, "window_band": window_band, "mc": mc.lhs, "pde_sup": sup_w,
        "gap": gap, "budget": budget, "ratio_to_F": mc.ratio,
    }  # fmt: skip


def c10_duality(lv: LevelSpec) -> tuple[bool, dict]:
    grid = lv.grid()
    budget = calibration(grid) * 1.0  # sup |f| = 1
    bm = hardy_m(16).field
    cfg = SimConfig(h_t=0.0025, T=0.5, N=lv.N, seed=4, substep=4, field_id="hardy", m=16)
    rep = duality_check(START, gaussian(None, 0.25), 0.5, bm, grid, cfg, budget)
    one = lambda x: np.ones(np.asarray(x).shape[:-1])
    rep1 = duality_check((0.0, 0.0, 0.0), one, 0.5, bm, grid, cfg, budget)
    ok1 = abs(rep1.lhs - 1) <= 1e-3 and abs(rep1.rhs - 1) <= 1e-3
    return rep.extra["pass"] and ok1, {
        "gap": rep.extra["gap"], "budget": rep.extra["budget"], "mc_one": rep1.lhs, "pde_one": rep1.rhs,
    }  # fmt: skip


def c11_schedule(lv: LevelSpec) -> tuple[bool, dict]:
    A = hardy_m(16).field
    B = hardy_m(16, gamma0=0.25, cap_scale=0.25).field
    cfg = lambda seed: SimConfig(h_t=0.005, T=1.0, N=lv.N, seed=seed, substep=4, field_id="hardy", m=16)
    n = lv.schedule_pairs
    eA = [simulate_euler(A, START, cfg(100 + i)) for i in range(2 * n)]
    eB = [simulate_euler(B, START, cfg(200 + i)) for i in range(n)]
    detail, ok = {}, True
    for t in (0.5, 1.0):
        base = float(np.mean([marginal_distance(eA[2 * i], eA[2 * i + 1], t) for i in range(n)]))
        cross = float(np.mean([marginal_distance(eA[2 * i + 1], eB[i], t) for i in range(n)]))
        detail[f"baseline_t{t:g}"] = base
        detail[f"cross_t{t:g}"] = cross
        ok = ok and cross <= 2 * base
    return ok, detail


def stickiness_levels(d: int = D) -> dict[str, float]:
    crit = 4 * (d / (d - 2)) ** 2
    return {"sub": 0.5 / d**2, "mid": 0.5 * crit, "super": 1.5 * crit}


def c12_stickiness(lv: LevelSpec) -> tuple[bool, dict]:
    occ = {}
    sub_short = None
    for name, delta in stickiness_levels().items():
        b = hardy_m(16, delta, gamma0=0.5 * math.sqrt(delta / HARDY_DELTA)).field
        ens = simulate_euler(b, (0.0, 0.0, 0.0), SimConfig(h_t=0.005, T=2.0, N=lv.N, seed=5, substep=8, field_id="hardy", m=16))
        occ[name] = occupation_near_origin(ens, 0.25)
        if name == "sub":
            sub_short = occupation_near_origin(ens, 0.25, (0.0, 1.0))
    ratio = occ["super"] / occ["sub"] if occ["sub"] > 0 else math.inf
    monotone = occ["sub"] < occ["mid"] < occ["super"]
    ok = ratio >= 10 and monotone and occ["sub"] < sub_short
    return ok, {**occ, "ratio": ratio, "sub_T1": sub_short}


def c13_determinism(lv: LevelSpec) -> tuple[bool, dict]:
    from .config import ExperimentConfig
    from .run import run_experiment

    cfgs = [
        ExperimentConfig(kind="simulate", field={"id": "zero"}, sim={"N": 2000, "T": 0.5, "h_t": 0.01}, seed=7),
        ExperimentConfig(kind="solve", field={"id": "zero"}, grid={"intervals": 32, "steps": 40}),
    ]
    same = True
    files = 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, cfg in enumerate(cfgs):
            outs = []
            for rep in range(2):
                out = Path(tmp) / f"{i}-{rep}"
                run_experiment(cfg, out)
                outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            files += len(outs[0])
            same = same and outs[0] == outs[1] and bool(outs[0])
    return same, {"csv_files": files}


CRITERIA: list[tuple[int, str, float, Callable[[LevelSpec], tuple[bool, dict]]]] = [
    (1, "heat-kernel-oracle", 60, c01_heat_oracle),
    (2, "form-bound-soundness", 60, c02_form_bound),
    (3, "delta-preservation", 300, c03_delta_preservation),
    (4, "feller-convergence", 600, c04_feller),
    (5, "energy-stability", 600, c05_energy),
    (6, "lp-quasi-contraction", 120, c06_lp),
    (7, "smoothing-exponent", 300, c07_smoothing),
    (8, "krylov-ratio", 600, c08_krylov),
    (9, "drift-integral", 600, c09_drift_integral),
    (10, "duality", 300, c10_duality),
    (11, "schedule-independence", 300, c11_schedule),
    (12, "stickiness-dichotomy", 600, c12_stickiness),
    (13, "determinism", 60, c13_determinism),
]


def find_criterion(key: str):
    for entry in CRITERIA:
        if key in (str(entry[0]), f"{entry[0]:02d}", entry[1]):
            return entry
    raise KeyError(key)


def run_criterion(entry, level: LevelSpec) -> CriterionResult:
    number, slug, limit, fn = entry
    t0 = time.perf_counter()
    try:
        ok, detail = fn(level)
        err = None
    except LabError as exc:
        ok, detail, err = False, {}, f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # surfaced as a failure, not a crash of the suite
        ok, detail = False, {"traceback": traceback.format_exc(limit=3)}
        err = f"{type(exc).__name__}: {exc}"
    secs = time.perf_counter() - t0
    within = secs <= limit
    if not within:
        detail = {**detail, "over_time": True}
    return CriterionResult(number, slug, bool(ok) and within, secs, limit, detail, err)


@dataclass
class SuiteResult:
    level: str
    results: list[CriterionResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def first_failure(self) -> CriterionResult | None:
        return next((r for r in self.results if not r.passed), None)


def verify_suite(
    level: str = "quick",
    only: list[str] | None = None,
    grid_overrides: dict | None = None,
    echo: Callable[[str], None] | None = None,
) -> SuiteResult:
    """Run the criteria (all, or those named in ``only``); ``grid_overrides`` patch every grid used."""
    lv = LEVELS[level]
    if grid_overrides:
        lv = lv.with_grid(**grid_overrides)
    entries = CRITERIA if not only else [find_criterion(k) for k in only]
    results = []
    for entry in entries:
        res = run_criterion(entry, lv)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return SuiteResult(level, results)
