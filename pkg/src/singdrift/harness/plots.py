"""Optional SVG line plots derived from CSV reports (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .reports import read_csv


def available() -> bool:
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def line_plot(csv_path: str | Path, x: str, ys: Sequence[str], out: str | Path, logy: bool = False) -> Path:
    """Plot columns ``ys`` against ``x``; the SVG carries no date and a fixed hash salt."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "lab"
    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [float(r[x]) for r in rows]
    for y in ys:
        ax.plot(xs, [float(r[y]) if r[y] != "" else float("nan") for r in rows], marker="o", label=y)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.legend()
    fig.tight_layout()
    out = Path(out)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
