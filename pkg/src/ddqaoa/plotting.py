"""Figures for ``report``: metric scatter plots with least-squares lines."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import MetricsError, linear_fit  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 200,
    "savefig.bbox": "tight",
}

AXIS_LABELS = {
    "fq": r"circuit fidelity $\mathcal{F}_{qc}$",
    "log_tau": r"$\ln(\tau/\mathrm{dt})$",
    "n_qubits": "qubits",
}
PANELS = (
    (("nar_b", "NAR$_B$"), ("nar_dd", "NAR$_{DD}$")),
    (("nsp_b", "NSP$_B$"), ("nsp_dd", "NSP$_{DD}$")),
    (("delta_nar", r"$\Delta_{NAR}$"),),
    (("delta_nsp", r"$\Delta_{NSP}$"),),
)


def _xy(rows: Sequence[Mapping[str, Any]], x: str, y: str) -> tuple[list[float], list[float]]:
    pts = [(float(r[x]), float(r[y])) for r in rows]
    pts = [(a, b) for a, b in pts if math.isfinite(a) and math.isfinite(b)]
    return [a for a, _ in pts], [b for _, b in pts]


def scatter_with_fit(ax, xs: Sequence[float], ys: Sequence[float], label: str, color: str) -> None:
    ax.scatter(xs, ys, s=10, alpha=0.7, color=color, label=label)
    try:
        fit = linear_fit(xs, ys)
    except MetricsError:
        return
    lo, hi = min(xs), max(xs)
    ax.plot([lo, hi], [fit.slope * lo + fit.intercept, fit.slope * hi + fit.intercept],
            color=color, lw=1, label=f"{label} fit: y={fit.slope:.3f}x{fit.intercept:+.3f}")


def metrics_figure(rows: Sequence[Mapping[str, Any]], axis: str, path: Path) -> Path:
    colors = ("tab:blue", "tab:orange")
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(7, 5), sharex=True)
        for ax, series in zip(axes.flat, PANELS):
            for (col, label), color in zip(series, colors):
                xs, ys = _xy(rows, axis, col)
                scatter_with_fit(ax, xs, ys, label, color)
            if series[0][0].startswith("delta"):
                ax.axhline(0.0, color="0.4", lw=0.6, ls="--")
            ax.legend(loc="best")
        for ax in axes[1]:
            ax.set_xlabel(AXIS_LABELS[axis])
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def render_figures(rows: Sequence[Mapping[str, Any]], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [metrics_figure(rows, axis, out_dir / f"metrics_vs_{axis}.png") for axis in AXIS_LABELS]
