"""Figure rendering for report outputs.

Every helper draws one figure and writes it straight to a file; nothing
here opens a window.  The CLI report paths call these alongside the
delimited outputs so a run directory is self-contained.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cer import SandwichReport, SweepReport, gap_profile
from .paths import DiscretePath

__all__ = [
    "render_sweep_fit",
    "render_gap_vs_bound",
    "render_sandwich",
    "render_path_fan",
]

_DPI = 150


def _save(fig, out_path: str | Path) -> Path:
    out = Path(out_path)
    fig.savefig(out, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return out


def render_sweep_fit(report: SweepReport, out_path: str | Path, title: str = "") -> Path:
    """Signed log mean utility against horizon with the fitted tail line."""
    ts = report.horizons
    ys = np.array([e.signed_log_mean if e.mean != 0.0 else np.nan for e in report.estimates])
    usable = np.array([e.usable for e in report.estimates])

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(ts[usable], ys[usable], "o", color="tab:blue", label="estimates")
    if np.any(~usable):
        ax.plot(ts[~usable], ys[~usable], "x", color="tab:gray", label="unresolved")
    tail = np.asarray(report.tail_T)
    line_t = np.linspace(tail.min(), tail.max(), 50)
    ax.plot(
        line_t,
        report.fit_intercept + report.fitted_rate * line_t,
        "-",
        color="tab:red",
        label=f"tail fit, rate {report.fitted_rate:.5f}",
    )
    ax.set_xlabel("horizon T")
    ax.set_ylabel("signed log E[U(V_T)]")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, out_path)


def render_gap_vs_bound(
    candidate: SweepReport,
    optimal: SweepReport,
    bound: np.ndarray | None,
    out_path: str | Path,
    title: str = "",
) -> Path:
    """Per-horizon rate gap with error bars, against an optional bound curve."""
    ts, gaps, ses = gap_profile(candidate, optimal)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(ts, gaps, yerr=3.0 * ses, fmt="o", color="tab:blue", capsize=3,
                label="rate gap (3 SE bars)")
    if bound is not None:
        ax.plot(ts, bound, "-", color="tab:red", label="bound")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("horizon T")
    ax.set_ylabel("rate gap")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, out_path)


def render_sandwich(report: SandwichReport, out_path: str | Path, title: str = "") -> Path:
    """Signed-log sandwich bounds and the gap per log T, side by side."""
    from .utility import signed_log

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
    ax1.plot(report.T, signed_log(report.lower), "-o", color="tab:blue", label="lower")
    ax1.plot(report.T, signed_log(report.upper), "-o", color="tab:red", label="upper")
    ax1.set_xscale("log")
    ax1.set_xlabel("horizon T")
    ax1.set_ylabel("signed log value")
    ax1.legend()
    ax1.grid(True, alpha=0.3)

    ax2.plot(report.T, report.gap_over_log_T, "-o", color="tab:green")
    ax2.set_xscale("log")
    ax2.set_xlabel("horizon T")
    ax2.set_ylabel("bound gap / log T")
    ax2.grid(True, alpha=0.3)

    if title:
        fig.suptitle(title)
    return _save(fig, out_path)


def render_path_fan(
    paths: Sequence[DiscretePath],
    out_path: str | Path,
    title: str = "",
    floor: np.ndarray | None = None,
    max_shown: int = 40,
) -> Path:
    """A handful of sample paths on a log scale, with an optional floor curve."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in paths[:max_shown]:
        ax.plot(path.grid.points, path.values, linewidth=0.7, alpha=0.6)
    if floor is not None and len(paths) > 0:
        ax.plot(paths[0].grid.points, floor, "--", color="black", linewidth=1.4,
                label="floor")
        ax.legend()
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("wealth")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _save(fig, out_path)
