"""Deterministic CSV output and the column glossary shared with the docs."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    """Write rows with a fixed column order; floats use the shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


FORMBOUND_COLUMNS = ("field_id", "family", "budget", "estimate", "certificate_delta", "provenance")
MOLLIFY_COLUMNS = (
    "field_id", "m", "eps_m", "gamma_m", "c_m", "delta_m", "C_S", "r", "sup_bound", "l2loc_distance", "estimate",
)  # fmt: skip
SOLVE_COLUMNS = ("field_id", "m", "t", "sup", "l2", "max_rel_error", "boundary_leak")
SIMULATE_COLUMNS = (
    "field_id", "m", "t", "N", "mean_x1", "mean_x2", "mean_x3", "mean_sq_disp", "sq_disp_stderr",
    "incr_mean", "incr_var", "incr_var_expected", "incr_var_stderr",
)  # fmt: skip
