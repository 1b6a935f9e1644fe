"""Figure rendering for the CLI report paths.

Figures are written next to the delimited outputs.  PNG metadata is
suppressed so repeated runs with the same seed stay byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .forecast import ForecastStep  # noqa: E402
from .geometry import Trajectory  # noqa: E402
from .metrics import EvalReport  # noqa: E402


def save_figure(fig, path) -> None:
    fig.savefig(Path(path), dpi=150, metadata={"Software": None})
    plt.close(fig)


def _present(steps: list[ForecastStep]) -> np.ndarray:
    return np.asarray([s.prediction for s in steps if not s.absent])


def render_forecast_figure(
    path, history: Trajectory, steps: list[ForecastStep], truth: Trajectory | None = None
) -> bool:
    """Track plot: history, predictions, and optional truth (2-d or 3-d)."""
    d = history.dimension
    if d not in (2, 3):
        return False
    preds = _present(steps)
    fig = plt.figure(figsize=(7, 6))
    if d == 2:
        ax = fig.add_subplot(111)
        ax.plot(*history.positions.T, ".", color="0.75", ms=2, label="history")
        if truth is not None:
            ax.plot(*truth.positions.T, "-", color="tab:blue", lw=1.5, label="truth")
        if preds.size:
            ax.plot(*preds.T, "o-", color="tab:red", ms=4, lw=1, label="forecast")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal", adjustable="datalim")
    else:
        ax = fig.add_subplot(111, projection="3d")
        ax.plot(*history.positions.T, color="0.8", lw=0.3, label="history")
        if truth is not None:
            ax.plot(*truth.positions.T, color="tab:blue", lw=1.5, label="truth")
        if preds.size:
            ax.plot(*preds.T, "o-", color="tab:red", ms=3, lw=1, label="forecast")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_zlabel("z")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    save_figure(fig, path)
    return True


def render_eval_figures(out_dir, report: EvalReport) -> list[str]:
    """APE series, ACF with significance band, and integrated-error fit."""
    out = Path(out_dir)
    written = []
    valid = ~np.isnan(report.ape)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(report.times[valid], report.ape[valid], "o-", color="tab:red", ms=3, lw=1)
    ax.set_xlabel("time")
    ax.set_ylabel("absolute pointwise error")
    fig.tight_layout()
    save_figure(fig, out / "ape.png")
    written.append("ape.png")

    if report.acf:
        lags = [a[0] for a in report.acf]
        vals = [a[1] for a in report.acf]
        n = int(valid.sum())
        crit = 1.96 / np.sqrt(n) if n else 0.0
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.stem(lags, vals, basefmt="k-")
        ax.axhline(crit, ls="--", color="0.4")
        ax.axhline(-crit, ls="--", color="0.4")
        ax.set_xlabel("lag")
        ax.set_ylabel("error autocorrelation")
        fig.tight_layout()
        save_figure(fig, out / "acf.png")
        written.append("acf.png")

    if valid.sum() >= 3 and np.isfinite(report.integrated_error_slope):
        t = report.times[valid] - report.t_origin
        e = report.ape[valid]
        dt = np.diff(t)
        g = np.concatenate([[0.0], np.cumsum(0.5 * (e[1:] + e[:-1]) * dt)])
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(t, g, "o-", color="tab:red", ms=3, lw=1, label="integrated error")
        ax.plot(
            t,
            report.integrated_error_slope * t,
            "-",
            color="0.3",
            label=f"fit: slope {report.integrated_error_slope:.3g}, r2 {report.slope_fit_r2:.3g}",
        )
        ax.set_xlabel("time since forecast start")
        ax.set_ylabel("integrated error")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        save_figure(fig, out / "integrated_error.png")
        written.append("integrated_error.png")
    return written


def render_density_figure(
    path,
    axes: list[np.ndarray],
    density: np.ndarray,
    region: np.ndarray | None = None,
    centers: np.ndarray | None = None,
    prediction: np.ndarray | None = None,
) -> bool:
    """Contour plot of a 2-d density grid with the HDR and centers overlaid."""
    if len(axes) != 2:
        return False
    gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
    fig, ax = plt.subplots(figsize=(7, 6))
    cs = ax.contourf(gx, gy, density, levels=12, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="density")
    if region is not None and region.any():
        ax.contour(gx, gy, region.astype(float), levels=[0.5], colors="w", linewidths=1.2)
    if centers is not None and len(centers):
        ax.plot(centers[:, 0], centers[:, 1], ".", color="0.9", ms=3, label="support")
    if prediction is not None:
        ax.plot([prediction[0]], [prediction[1]], "r*", ms=12, label="prediction")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    save_figure(fig, path)
    return True
