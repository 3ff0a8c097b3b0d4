"""PNG figures for report curves.  Needs the ``plot`` extra (matplotlib)."""

from __future__ import annotations

import re
from pathlib import Path


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "curve"


def render_curves(curves, fig_dir) -> list:
    """One figure per curve; returns the written paths relative to the report."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("--plots needs matplotlib: pip install 'artifact[plot]'") from exc

    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for c in curves:
        fig, ax = plt.subplots(figsize=(5, 3.6))
        y = [abs(v) if c.kind == "loglog" and v is not None else v for v in c.y]
        ax.plot(c.x, y, "o-", ms=3, label=c.name)
        if c.reference is not None:
            ax.plot(c.x, c.reference, "--", color="gray", label="predicted")
        if c.kind == "loglog":
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(c.xlabel)
        ax.set_ylabel(c.ylabel)
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        name = f"{_slug(c.name)}.png"
        fig.savefig(fig_dir / name, dpi=110)
        plt.close(fig)
        written.append(f"figures/{name}")
    return written
