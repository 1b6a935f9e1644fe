"""Highest-density regions via Monte Carlo quantile thresholding.

A (1 - alpha) highest-density region of a density f is {x : f(x) >= c_alpha}
with c_alpha chosen so the region carries 1 - alpha of the mass.  The
threshold is estimated by sampling the density and taking the alpha quantile
of the sampled density values.  Regions are stored as threshold + predicate,
not as geometry: they may be disconnected and multimodal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kde import DensityEstimate


@dataclass(frozen=True)
class HdrRegion:
    """Threshold-form region {x : source(x) >= threshold} at level 1 - alpha."""

    threshold: float
    alpha: float
    source: DensityEstimate
    mc_samples: int

    def contains(self, x) -> bool:
        return bool(self.source.evaluate(x) >= self.threshold)

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        return self.source.evaluate_many(X) >= self.threshold


def estimate_hdr(
    density: DensityEstimate,
    alpha: float,
    m: int = 10_000,
    rng: np.random.Generator | None = None,
) -> HdrRegion:
    """Monte Carlo HDR threshold: the alpha quantile of f over m draws from f.

    The quantile uses type-7 linear interpolation between order statistics
    (numpy's default), pinned here because the convention shifts the
    threshold.  Identical seed and inputs reproduce the threshold bit for
    bit.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if m < 100:
        raise ValueError(f"need at least 100 Monte Carlo draws, got {m}")
    if rng is None:
        rng = np.random.default_rng()
    draws = density.draw(m, rng)
    values = density.evaluate_many(draws)
    threshold = float(np.quantile(values, alpha, method="linear"))
    return HdrRegion(threshold=threshold, alpha=alpha, source=density, mc_samples=m)


def grid_extract(
    region: HdrRegion, box: np.ndarray, resolution
) -> tuple[list[np.ndarray], np.ndarray]:
    """Rasterize a region on an axis-aligned grid of cells.

    Args:
        region: the region to rasterize.
        box: (d, 2) per-axis bounds.
        resolution: per-axis cell counts, each >= 2.

    Returns:
        (axes, in_region): per-axis cell-center coordinates, and a boolean
        array of shape ``resolution`` flagging cells whose center lies in the
        region.
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    res = np.asarray(resolution, dtype=int).reshape(-1)
    d = region.source.dimension
    if box.shape != (d, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a (d, 2) array of nonempty bounds")
    if res.shape != (d,) or np.any(res < 2):
        raise ValueError("resolution must give >= 2 cells per axis")
    axes = []
    for j in range(d):
        w = (box[j, 1] - box[j, 0]) / res[j]
        axes.append(box[j, 0] + w * (np.arange(res[j]) + 0.5))
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.column_stack([m.reshape(-1) for m in mesh])
    flags = region.contains_many(centers).reshape(tuple(res))
    return axes, flags
