"""Forecast evaluation: pointwise error, HDR coverage, ACF, integrated error."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .forecast import ForecastStep
from .geometry import EUCLIDEAN, Metric, Trajectory, as_point

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    """Per-step and summary error metrics for one forecast.

    ``ape``, ``in_hdr`` and ``nearest_dist`` align with ``times``; entries are
    NaN (or None for membership) where the step was absent or the truth does
    not cover its timestamp.  ``pct_hdr`` counts only steps where both the
    truth and the region exist.
    """

    times: np.ndarray
    ape: np.ndarray
    in_hdr: list
    nearest_dist: np.ndarray
    ape_mean: float
    ape_std: float
    pct_hdr: float
    acf: list[tuple[int, float, bool]]
    integrated_error_slope: float
    slope_fit_r2: float
    t_origin: float = 0.0


def truth_at(truth: Trajectory, t: float) -> np.ndarray | None:
    """Truth position at time t, linearly interpolated; None outside coverage."""
    if t < truth.times[0] or t > truth.times[-1]:
        return None
    return np.array(
        [np.interp(t, truth.times, truth.positions[:, j]) for j in range(truth.dimension)]
    )


def ape(
    truth: Trajectory, steps: list[ForecastStep], metric: Metric = EUCLIDEAN
) -> np.ndarray:
    """Absolute pointwise error per step: distance from truth to prediction.

    Truth is interpolated linearly in space and time.  Steps that are absent
    or fall outside the truth's time coverage yield NaN and a warning.
    """
    out = np.full(len(steps), np.nan)
    for k, s in enumerate(steps):
        if s.absent:
            continue
        x = truth_at(truth, s.time)
        if x is None:
            log.warning("truth does not cover forecast time %g; step %d skipped", s.time, s.step)
            continue
        out[k] = metric.distance(x, s.prediction)
    return out


def pct_hdr(truth: Trajectory, steps: list[ForecastStep]) -> float:
    """Fraction of evaluable steps whose true position lies in the step's HDR."""
    hits = 0
    total = 0
    for s in steps:
        if s.absent or s.region is None:
            continue
        x = truth_at(truth, s.time)
        if x is None:
            continue
        total += 1
        hits += int(s.region.contains(x))
    return hits / total if total else float("nan")


def hdr_membership(truth: Trajectory, steps: list[ForecastStep]) -> list:
    """Per-step truth-in-region flags (None where not evaluable)."""
    out = []
    for s in steps:
        x = None if s.absent or s.region is None else truth_at(truth, s.time)
        out.append(None if x is None else bool(s.region.contains(x)))
    return out


def nearest_point_distance(truth: Trajectory, p, metric: Metric = EUCLIDEAN) -> float:
    """Minimum distance from ``p`` to the truth polyline, ignoring time.

    Euclidean mode projects onto each segment exactly.  Haversine mode
    projects in a local equirectangular plane centered at ``p`` and returns
    the great-circle distance to the projected closest point; exact on
    vertices, approximate on long segments.
    """
    p = as_point(p)
    P = truth.positions
    if len(truth) == 1:
        return metric.distance(P[0], p)
    if metric.kind == "haversine":
        lat0 = math.radians(p[0])
        scale = np.array([1.0, math.cos(lat0)])
        XY = np.radians(P - p) * scale * metric.radius
        q = np.zeros(2)
    else:
        XY = P
        q = p
    seg = XY[1:] - XY[:-1]
    w = q - XY[:-1]
    denom = np.sum(seg * seg, axis=1)
    tpar = np.divide(
        np.sum(w * seg, axis=1), denom, out=np.zeros_like(denom), where=denom > 0
    )
    tpar = np.clip(tpar, 0.0, 1.0)
    proj = XY[:-1] + tpar[:, None] * seg
    if metric.kind == "haversine":
        best = int(np.argmin(np.linalg.norm(proj - q, axis=1)))
        nearest = p + np.degrees(proj[best] / (scale * metric.radius))
        return metric.distance(p, nearest)
    return float(np.min(np.linalg.norm(proj - q, axis=1)))


def error_acf(series, max_lag: int) -> list[tuple[int, float, bool]]:
    """Sample autocorrelation with a +-1.96/sqrt(n) significance flag.

    Uses the biased (1/n) normalization standard in time-series practice:
    r_k = sum_t (e_t - m)(e_{t+k} - m) / sum_t (e_t - m)^2.
    """
    e = np.asarray(series, dtype=float).reshape(-1)
    n = e.shape[0]
    if not 1 <= max_lag < n:
        raise ValueError(f"need series length > max_lag >= 1, got n={n}, max_lag={max_lag}")
    centered = e - e.mean()
    denom = float(np.sum(centered * centered))
    if denom == 0.0:
        raise ValueError("autocorrelation is undefined for a zero-variance series")
    crit = 1.96 / math.sqrt(n)
    out = [(0, 1.0, True)]
    for k in range(1, max_lag + 1):
        r = float(np.sum(centered[:-k] * centered[k:]) / denom)
        out.append((k, r, abs(r) > crit))
    return out


def integrated_error_fit(times, errors) -> tuple[float, float]:
    """Through-origin linear fit of the cumulative error integral.

    g(t) = integral of the error up to t (trapezoidal, from the first
    sample); the fitted slope is sum(t * g) / sum(t^2) and r^2 is the
    uncentered coefficient 1 - SS_res / sum(g^2), the standard convention
    for fits with the intercept forced to zero.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    e = np.asarray(errors, dtype=float).reshape(-1)
    if t.shape != e.shape or t.shape[0] < 3:
        raise ValueError("need at least 3 aligned (t, error) samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    dt = np.diff(t)
    g = np.concatenate([[0.0], np.cumsum(0.5 * (e[1:] + e[:-1]) * dt)])
    denom = float(np.sum(t * t))
    if denom == 0.0:
        raise ValueError("degenerate times: cannot fit through the origin")
    slope = float(np.sum(t * g) / denom)
    ss_res = float(np.sum((g - slope * t) ** 2))
    ss_tot = float(np.sum(g * g))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def evaluate_forecast(
    truth: Trajectory,
    steps: list[ForecastStep],
    metric: Metric = EUCLIDEAN,
    max_lag: int | None = None,
    t_origin: float | None = None,
) -> EvalReport:
    """Compose the full evaluation report for one forecast.

    The integrated-error fit runs on time since the forecast origin (the end
    of the history), so the through-origin constraint is meaningful.  When
    ``t_origin`` is not given it is inferred from the step lattice.
    """
    times = np.array([s.time for s in steps])
    errors = ape(truth, steps, metric)
    membership = hdr_membership(truth, steps)
    nearest = np.array(
        [
            np.nan if s.absent else nearest_point_distance(truth, s.prediction, metric)
            for s in steps
        ]
    )
    valid = ~np.isnan(errors)
    ape_mean = float(np.mean(errors[valid])) if valid.any() else float("nan")
    ape_std = float(np.std(errors[valid])) if valid.any() else float("nan")

    evaluable = [m for m in membership if m is not None]
    coverage = sum(evaluable) / len(evaluable) if evaluable else float("nan")

    acf: list[tuple[int, float, bool]] = []
    if valid.sum() >= 3:
        e = errors[valid]
        lag = max_lag if max_lag is not None else min(40, len(e) - 1)
        lag = min(lag, len(e) - 1)
        if lag >= 1 and float(np.var(e)) > 0:
            acf = error_acf(e, lag)

    if t_origin is None:
        if len(steps) >= 2 and steps[1].step != steps[0].step:
            lattice = (times[1] - times[0]) / (steps[1].step - steps[0].step)
            t_origin = float(times[0] - lattice * steps[0].step)
        else:
            t_origin = float(times[0])
    slope, r2 = float("nan"), float("nan")
    if valid.sum() >= 3:
        slope, r2 = integrated_error_fit(times[valid] - t_origin, errors[valid])

    return EvalReport(
        times=times,
        ape=errors,
        in_hdr=membership,
        nearest_dist=nearest,
        ape_mean=ape_mean,
        ape_std=ape_std,
        pct_hdr=coverage,
        acf=acf,
        integrated_error_slope=slope,
        slope_fit_r2=r2,
        t_origin=t_origin,
    )
