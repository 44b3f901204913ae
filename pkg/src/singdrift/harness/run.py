"""Run one experiment config: CSV reports plus a manifest tying every number to the config."""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ConfigInvalid, InvalidParameter
from ..fields import (
    build_field,
    estimate_form_bound,
    origin_family,
    random_family,
    shell_family,
)
from ..fields.constants import sobolev_constant, unit_ball_volume, unit_ball_volume_product_reading
from ..mollify import build_approximation, default_gamma_rule, l2loc_distance
from ..pde import SpaceTimeGrid, Weight, energy_report, gaussian, heat_gaussian, lp_norm, solve_forward_cauchy
from ..pde.monitors import EnergyReport
from ..sde import SimConfig, simulate_euler
from . import reports
from .config import ExperimentConfig

OUTPUT_ROOT_ENV = "LAB_OUTPUT_ROOT"


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    kind: str
    wall_time: float
    constants: dict
    criteria: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=float)


def output_dir(cfg: ExperimentConfig, override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    if cfg.output:
        return Path(cfg.output)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "lab-output"))
    return root / f"{cfg.kind}-{cfg.config_hash()[:12]}"


def _field(cfg: ExperimentConfig):
    try:
        return build_field(cfg.field.id, cfg.field.params)
    except InvalidParameter as exc:
        raise ConfigInvalid(str(exc), "field") from None


def _drive(cfg: ExperimentConfig, raw):
    """Mollified field when ``mollify.m`` is set, the raw field when it is already bounded."""
    if cfg.mollify.m is not None:
        return build_approximation(raw, raw.certificate, cfg.mollify.m, default_gamma_rule(cfg.mollify.gamma0)).field
    if raw.sup_bound is None:
        raise ConfigInvalid(f"field {raw.field_id} is unbounded; set mollify.m", "mollify.m")
    return raw


def _grid(cfg: ExperimentConfig, d: int) -> SpaceTimeGrid:
    g = cfg.grid
    try:
        return SpaceTimeGrid(d, g.half_width, g.intervals, g.steps, 0.0, g.T, g.safety, g.save_every)
    except InvalidParameter as exc:
        raise ConfigInvalid(str(exc), "grid") from None


def _initial(cfg: ExperimentConfig):
    init = cfg.initial
    if init.kind == "one":
        return lambda x: np.ones(np.asarray(x).shape[:-1])
    return gaussian(init.center, init.var)


def _run_formbound(cfg, out: Path, files: list) -> None:
    b = _field(cfg)
    fam = {
        "origin": lambda: origin_family(b.d, seed=cfg.seed),
        "random": lambda: random_family(b.d, seed=cfg.seed),
        "shell": lambda: shell_family(b.d, seed=cfg.seed),
    }[cfg.formbound.family]()
    est = estimate_form_bound(b, fam, cfg.formbound.budget)
    cert = b.certificate
    row = {
        "field_id": b.field_id, "family": cfg.formbound.family, "budget": cfg.formbound.budget, "estimate": est,
        "certificate_delta": cert.delta if cert else None, "provenance": cert.provenance if cert else None,
    }  # fmt: skip
    files.append(reports.write_csv(out / "formbound.csv", reports.FORMBOUND_COLUMNS, [row]).name)


def _run_mollify(cfg, out: Path, files: list) -> None:
    b = _field(cfg)
    if b.certificate is None:
        raise ConfigInvalid("field has no certificate", "field.id")
    levels = [cfg.mollify.m] if cfg.mollify.m is not None else list(cfg.mollify.levels)
    rows = []
    for m in levels:
        ap = build_approximation(b, b.certificate, m, default_gamma_rule(cfg.mollify.gamma0))
        s = ap.schedule
        est = estimate_form_bound(ap.field, origin_family(b.d, seed=cfg.seed), cfg.formbound.budget) if cfg.mollify.estimate else None
        rows.append({
            "field_id": b.field_id, "m": m, "eps_m": s.eps_m, "gamma_m": s.gamma_m, "c_m": s.c_m,
            "delta_m": s.delta_m, "C_S": s.C_S, "r": s.r, "sup_bound": ap.field.sup_bound,
            "l2loc_distance": l2loc_distance(b, ap.field), "estimate": est,
        })  # fmt: skip
    files.append(reports.write_csv(out / "mollify.csv", reports.MOLLIFY_COLUMNS, rows).name)
    if cfg.plots:
        _maybe_plot(out, "mollify.csv", "m", ["l2loc_distance"], files, logy=True)


def _run_solve(cfg, out: Path, files: list) -> None:
    raw = _field(cfg)
    b = _drive(cfg, raw)
    grid = _grid(cfg, b.d)
    f = _initial(cfg)
    sol = solve_forward_cauchy(b, f, grid)
    oracle = b.field_id == "zero" and cfg.initial.kind == "gaussian"
    rows = []
    for k, t in enumerate(sol.times):
        lvl = sol.levels[k]
        err = None
        if oracle:
            exact = heat_gaussian(b.d, cfg.initial.var, float(t - grid.t0), cfg.initial.center)(grid.points())
            err = float(np.abs(lvl - exact).max() / np.abs(exact).max())
        rows.append({
            "field_id": b.field_id, "m": cfg.mollify.m, "t": float(t), "sup": float(np.abs(lvl).max()),
            "l2": lp_norm(lvl, 2.0, grid.cell_volume), "max_rel_error": err, "boundary_leak": sol.boundary_leak,
        })  # fmt: skip
    files.append(reports.write_csv(out / "solve.csv", reports.SOLVE_COLUMNS, rows).name)
    if cfg.energy_q is not None:
        rep = energy_report(sol, cfg.energy_q, Weight(cfg.weight.kappa, cfg.weight.theta), None, f, raw.certificate, cfg.mollify.m)
        files.append(reports.write_csv(out / "energy.csv", EnergyReport.CSV_COLUMNS, [rep.to_row()]).name)
    if cfg.plots:
        _maybe_plot(out, "solve.csv", "t", ["sup", "l2"], files)


def _run_simulate(cfg, out: Path, files: list) -> None:
    raw = _field(cfg)
    b = _drive(cfg, raw)
    s = cfg.sim
    if len(s.x) != b.d:
        raise ConfigInvalid(f"start point needs {b.d} coordinates", "sim.x")
    sim = SimConfig(
        h_t=s.h_t, T=s.T, N=s.N, seed=cfg.seed, substep=s.substep, field_id=b.field_id, m=cfg.mollify.m,
        record_every=s.record_every, workers=s.workers,
    )  # fmt: skip
    ens = simulate_euler(b, s.x, sim)
    X, x0 = ens.paths, ens.x0
    stride = max(1, (len(ens.times) - 1) // 20)
    zero = b.field_id == "zero"
    rows = []
    for k in range(stride, len(ens.times), stride):
        disp = np.sum((X[:, k] - x0) ** 2, axis=1)
        inc = (X[:, k] - X[:, k - 1]).ravel()
        var = float(np.var(inc, ddof=1))
        h = float(ens.times[k] - ens.times[k - 1])
        means = X[:, k].mean(axis=0)
        row = {
            "field_id": b.field_id, "m": cfg.mollify.m, "t": float(ens.times[k]), "N": ens.N,
            "mean_sq_disp": float(disp.mean()), "sq_disp_stderr": float(disp.std(ddof=1) / math.sqrt(ens.N)),
            "incr_mean": float(inc.mean()), "incr_var": var,
            "incr_var_expected": 2 * h if zero else None, "incr_var_stderr": var * math.sqrt(2.0 / (inc.size - 1)),
        }  # fmt: skip
        for i in range(min(3, b.d)):
            row[f"mean_x{i + 1}"] = float(means[i])
        rows.append(row)
    files.append(reports.write_csv(out / "simulate.csv", reports.SIMULATE_COLUMNS, rows).name)
    if cfg.plots:
        _maybe_plot(out, "simulate.csv", "t", ["mean_sq_disp"], files)


def _run_verify(cfg, out: Path, files: list, criteria: dict) -> None:
    from .criteria import CriterionResult, find_criterion, run_criterion, verify_suite, LEVELS

    name = cfg.kind[len("verify-"):]
    if name in LEVELS:
        results = verify_suite(name).results
    else:
        try:
            entry = find_criterion(name)
        except KeyError:
            raise ConfigInvalid(f"unknown criterion {name!r}", "kind") from None
        results = [run_criterion(entry, LEVELS["full"])]
    for r in results:
        criteria[f"{r.number:02d}-{r.slug}"] = r.passed
    files.append(reports.write_csv(out / "criteria.csv", CriterionResult.CSV_COLUMNS, [r.to_row() for r in results]).name)


def _maybe_plot(out: Path, csv_name: str, x: str, ys: list, files: list, logy: bool = False) -> None:
    from . import plots

    if plots.available():
        svg = out / csv_name.replace(".csv", ".svg")
        plots.line_plot(out / csv_name, x, ys, svg, logy=logy)
        files.append(svg.name)


def derived_constants(cfg: ExperimentConfig) -> dict:
    d = int(cfg.field.params.get("d", 3))
    h_x = 2 * cfg.grid.half_width / cfg.grid.intervals
    return {
        "d": d,
        "C_S": sobolev_constant(d),
        "unit_ball_volume": unit_ball_volume(d),
        "unit_ball_volume_product_reading": unit_ball_volume_product_reading(d),
        "jitter_space_grid": 0.5 * h_x,
        "jitter_space_sde": 0.5 * cfg.sim.h_t,
        "jitter_direction": "diagonal (1,...,1)/sqrt(d)",
    }


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> RunManifest:
    """Execute ``cfg``; writes CSVs and ``manifest.json`` into the output directory."""
    t0 = time.perf_counter()
    outdir = output_dir(cfg, out)
    outdir.mkdir(parents=True, exist_ok=True)
    files: list = []
    criteria: dict = {}
    if cfg.kind == "formbound":
        _run_formbound(cfg, outdir, files)
    elif cfg.kind == "mollify":
        _run_mollify(cfg, outdir, files)
    elif cfg.kind == "solve":
        _run_solve(cfg, outdir, files)
    elif cfg.kind == "simulate":
        _run_simulate(cfg, outdir, files)
    else:
        _run_verify(cfg, outdir, files, criteria)
    man = RunManifest(
        cfg.config_hash(), __version__, cfg.kind, time.perf_counter() - t0, derived_constants(cfg), criteria,
        files, cfg.materialized(),
    )  # fmt: skip
    (outdir / "manifest.json").write_text(man.to_json() + "\n")
    return man
