"""Render metric time series to figure files next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .simulator import MetricsLog

_RC = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "lines.linewidth": 1.4,
}


def render_metrics_figures(log: MetricsLog, outdir: Path | str) -> list[Path]:
    """Write the standard run figures as PNG files; returns their paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    times = [r.time for r in log.rows]
    written: list[Path] = []

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(times, [r.spread for r in log.rows], marker="o", markersize=3, label="spread")
        ax.plot(times, [r.coverage for r in log.rows], marker="s", markersize=3, label="coverage")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("fraction")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title("Record spread and prediction coverage")
        ax.legend()
        written.append(_save(fig, outdir / "dissemination.png"))

        fig, ax = plt.subplots()
        rmse_pts = [(t, r.rmse) for t, r in zip(times, log.rows) if r.rmse is not None]
        mae_pts = [(t, r.mae) for t, r in zip(times, log.rows) if r.mae is not None]
        if rmse_pts:
            ax.plot(*zip(*rmse_pts), marker="o", markersize=3, label="rmse")
        if mae_pts:
            ax.plot(*zip(*mae_pts), marker="s", markersize=3, label="mae")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("error")
        ax.set_title("Held-out prediction error")
        if rmse_pts or mae_pts:
            ax.legend()
        written.append(_save(fig, outdir / "prediction_error.png"))

        fig, ax = plt.subplots()
        ax.plot(times, [r.mean_store_bytes / 1024.0 for r in log.rows], marker="o", markersize=3)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("KiB")
        ax.set_title("Mean per-node store size")
        written.append(_save(fig, outdir / "store_size.png"))

        fig, ax = plt.subplots()
        ax.step(times, [r.fetches_attempted for r in log.rows], where="post", label="attempted")
        ax.step(times, [r.fetches_dropped for r in log.rows], where="post", label="dropped")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("cumulative fetches")
        ax.set_title("Deferred fetches")
        ax.legend()
        written.append(_save(fig, outdir / "fetches.png"))

    return written


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
