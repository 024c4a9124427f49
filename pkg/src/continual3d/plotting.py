"""Figures for CLI reports, rendered straight to files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .accounting import CostReport, grouped_state_table  # noqa: E402
from .bench import BenchResult  # noqa: E402


def _save(fig, path: str | Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_transient(
    steps: Sequence[int],
    valid: Sequence[bool],
    deviation: Sequence[float | None],
    transient_len: int,
    path: str | Path,
) -> None:
    """Validity and oracle deviation per step, with the theoretical boundary."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True)
    top.step(steps, [int(v) for v in valid], where="mid")
    top.set_ylabel("valid")
    top.set_yticks([0, 1])
    pts = [(s, d) for s, d in zip(steps, deviation) if d is not None]
    if pts:
        xs, ys = zip(*pts)
        bottom.semilogy(xs, [max(y, 1e-12) for y in ys], ".")
    bottom.set_ylabel("max |deviation|")
    bottom.set_xlabel("step")
    for ax in (top, bottom):
        ax.axvline(transient_len + 1, color="tab:red", linestyle="--", linewidth=1)
    top.set_title("transient response")
    _save(fig, path)


def plot_cost(report: CostReport, path: str | Path) -> None:
    """Continual state per stage group, or clip-mode transient per layer."""
    if report.mode == "continual":
        table = grouped_state_table(report)
        labels = [f"{r.stage} {r.layer}" for r in table]
        values = [r.floats for r in table]
        title = f"state memory, total {report.state_floats:,} floats"
    else:
        rows = [r for r in report.rows if r.transient_floats]
        labels = [r.name for r in rows]
        values = [r.transient_floats for r in rows]
        title = f"clip transient memory, worst case {report.worst_case_floats:,} floats"
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.22 * len(labels) + 1)))
    ax.barh(range(len(values)), values)
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("floats")
    ax.set_title(title)
    _save(fig, path)


def plot_bench(results: Sequence[BenchResult], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(
        [r.mode for r in results],
        [r.mean for r in results],
        yerr=[r.std for r in results],
        capsize=4,
    )
    ax.set_ylabel("predictions / s")
    ax.set_title(f"window {results[0].window}, {results[0].streams} stream(s)")
    _save(fig, path)
