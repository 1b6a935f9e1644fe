"""One-dimensional kernel families used as product-kernel building blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_FAMILIES = ("epanechnikov", "gaussian")
_GAUSS_NORM = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Kernel1D:
    """A univariate kernel, i.e. a valid PDF on the real line.

    ``epanechnikov`` is the compactly supported parabola
    ``(3/4)(1 - u^2)`` on [-1, 1]; ``gaussian`` is the standard normal.
    """

    family: str = "epanechnikov"

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family: {self.family!r}")

    def pdf(self, u):
        """Kernel density at ``u`` (scalar or array)."""
        u = np.asarray(u, dtype=float)
        if self.family == "epanechnikov":
            out = np.maximum(0.0, 0.75 * (1.0 - u * u))
        else:
            out = _GAUSS_NORM * np.exp(-0.5 * u * u)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        """Exact draws from the kernel PDF.

        Epanechnikov sampling uses the three-uniform selection method: draw
        U1, U2, U3 ~ Uniform(-1, 1) and return U2 if |U3| >= max(|U1|, |U2|),
        else U3.  It is rejection-free and exact.
        """
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        if self.family == "gaussian":
            out = rng.standard_normal(shape)
        else:
            u = rng.uniform(-1.0, 1.0, size=(3,) + shape)
            out = np.where(
                np.abs(u[2]) >= np.maximum(np.abs(u[0]), np.abs(u[1])), u[1], u[2]
            )
        return float(out) if size is None else out

    def support(self) -> tuple[float, float] | None:
        """Support interval, or None when unbounded."""
        if self.family == "epanechnikov":
            return (-1.0, 1.0)
        return None


EPANECHNIKOV = Kernel1D("epanechnikov")
GAUSSIAN = Kernel1D("gaussian")


def as_bandwidth(h, dim: int) -> np.ndarray:
    """Validate a bandwidth vector: ``dim`` strictly positive finite entries.

    A scalar is broadcast to all coordinates.
    """
    a = np.asarray(h, dtype=float)
    if a.ndim == 0:
        a = np.full(dim, float(a))
    if a.shape != (dim,):
        raise ValueError(f"bandwidth must have {dim} entries, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError("bandwidth entries must be finite and > 0")
    return a
