"""Gridded energy fields, feasibility masks, and minimum line-integral paths.

Missing segments of a sparse track are reconstructed by minimizing the line
integral of an estimated cost field between consecutive observations.  The
field is either a sum of inverted Gaussian wells centered on the history
(low cost near visited locations) or a least-squares field summing
``d(x, x_i)^2 / sigma_i``.  The integral is discretized on a cell grid:
Dijkstra over the 8-connected (2-d) or 26-connected (3-d) feasible-cell
graph with edge weight = mean of the endpoint cell values times the
Euclidean edge length, followed by a cost-non-increasing line-of-sight
shortcut pass so obstacle-free stretches collapse to straight chords.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import EUCLIDEAN, Metric, as_point

_FIELD_KINDS = ("gaussian_wells", "least_squares")
_MAX_CHUNK_ELEMENTS = 8_000_000


@dataclass(frozen=True)
class Grid:
    """An axis-aligned box split into per-axis cell counts."""

    box: np.ndarray  # (d, 2)
    cells: tuple[int, ...]

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] != len(cells):
            raise ValueError("box must be (d, 2) with one cell count per axis")
        if np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("box bounds must be nonempty")
        if any(c < 1 for c in cells):
            raise ValueError("need at least one cell per axis")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "cells", cells)

    @property
    def dimension(self) -> int:
        return len(self.cells)

    @property
    def widths(self) -> np.ndarray:
        return (self.box[:, 1] - self.box[:, 0]) / np.asarray(self.cells, dtype=float)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    def axis_centers(self, j: int) -> np.ndarray:
        w = self.widths[j]
        return self.box[j, 0] + w * (np.arange(self.cells[j]) + 0.5)

    def all_centers(self) -> np.ndarray:
        """Cell centers in C order, shape (n_cells, d)."""
        mesh = np.meshgrid(*[self.axis_centers(j) for j in range(self.dimension)], indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def cell_of(self, p) -> tuple[int, ...] | None:
        """Multi-index of the cell containing ``p``, or None when outside the box."""
        p = as_point(p)
        w = self.widths
        idx = []
        for j in range(self.dimension):
            if p[j] < self.box[j, 0] or p[j] > self.box[j, 1]:
                return None
            i = int((p[j] - self.box[j, 0]) // w[j])
            idx.append(min(max(i, 0), self.cells[j] - 1))
        return tuple(idx)

    def center(self, idx) -> np.ndarray:
        w = self.widths
        return self.box[:, 0] + w * (np.asarray(idx, dtype=float) + 0.5)

    def same_layout(self, other: "Grid") -> bool:
        return self.cells == other.cells and np.array_equal(self.box, other.box)


def grid_over(points: np.ndarray, longest_axis_cells: int = 200, pad: float = 0.02) -> Grid:
    """Grid covering ``points`` with the given count on the longest axis.

    Bounds are padded by ``pad`` times the longest span so every point falls
    strictly inside; shorter axes get proportionally fewer cells (at least 2).
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    longest = float(span.max())
    if longest <= 0:
        longest = 1.0
    margin = pad * longest
    lo = lo - margin
    hi = hi + margin
    span = hi - lo
    cells = tuple(max(2, int(round(longest_axis_cells * s / span.max()))) for s in span)
    return Grid(np.column_stack([lo, hi]), cells)


@dataclass(frozen=True)
class FeasibilityMask:
    """Per-cell feasibility on a grid.  Points outside the box are infeasible."""

    grid: Grid
    feasible: np.ndarray

    def __post_init__(self):
        f = np.array(self.feasible, dtype=bool, copy=True)
        if f.shape != tuple(self.grid.cells):
            raise ValueError(f"feasible must have shape {self.grid.cells}, got {f.shape}")
        if not f.any():
            raise ValueError("mask must have at least one feasible cell")
        f.setflags(write=False)
        object.__setattr__(self, "feasible", f)

    def is_feasible_point(self, p) -> bool:
        idx = self.grid.cell_of(p)
        return bool(self.feasible[idx]) if idx is not None else False

    def feasible_centers(self, box: np.ndarray | None = None) -> np.ndarray:
        """Centers of feasible cells, optionally only those inside ``box`` (d, 2)."""
        centers = self.grid.all_centers()
        keep = self.feasible.reshape(-1)
        if box is not None:
            box = np.atleast_2d(np.asarray(box, dtype=float))
            inside = np.all((centers >= box[:, 0]) & (centers <= box[:, 1]), axis=1)
            keep = keep & inside
        return centers[keep]


def full_mask(grid: Grid) -> FeasibilityMask:
    return FeasibilityMask(grid, np.ones(grid.cells, dtype=bool))


@dataclass(frozen=True)
class EnergyField:
    """A cost field sampled at cell centers (shape = grid.cells)."""

    grid: Grid
    values: np.ndarray
    kind: str

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != tuple(self.grid.cells):
            raise ValueError(f"values must have shape {self.grid.cells}, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("field values must be finite and >= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def pheromone_sigmas(times: np.ndarray, sigma: float, rate: float) -> np.ndarray:
    """Per-observation widths growing linearly with age: sigma + rate * (t_max - t)."""
    t = np.asarray(times, dtype=float)
    return sigma + rate * (t.max() - t)


def build_field(
    history: np.ndarray,
    kind: str,
    sigmas,
    grid: Grid,
    metric: Metric = EUCLIDEAN,
) -> EnergyField:
    """Evaluate the chosen cost formula at every cell center.

    ``gaussian_wells`` sums ``1 - exp(-d^2 / (2 s_i^2)) / sqrt(2 pi s_i^2)``
    over the history; each observation digs a well of depth controlled by its
    ``s_i``.  Values are clamped at zero: for ``s_i < 1/sqrt(2 pi)`` the well
    bottoms go negative, and the shortest-path solver needs nonnegative
    costs.  ``least_squares`` sums ``d^2 / s_i``.  Distances use ``metric``.

    Args:
        history: (N, d) observed positions.
        kind: "gaussian_wells" or "least_squares".
        sigmas: per-observation widths, scalar or (N,).
        grid: the cell grid to sample on; must cover the history.
        metric: distance used against the history.
    """
    X = np.atleast_2d(np.asarray(history, dtype=float))
    if X.shape[0] < 1:
        raise ValueError("history must be nonempty")
    if kind not in _FIELD_KINDS:
        raise ValueError(f"unknown field kind: {kind!r} (expected one of {_FIELD_KINDS})")
    if X.shape[1] != grid.dimension:
        raise ValueError("history dimension does not match grid")
    s = np.asarray(sigmas, dtype=float)
    if s.ndim == 0:
        s = np.full(X.shape[0], float(s))
    if s.shape != (X.shape[0],):
        raise ValueError("need one sigma per observation")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("sigmas must be finite and > 0")
    for p in (X.min(axis=0), X.max(axis=0)):
        if np.any(p < grid.box[:, 0]) or np.any(p > grid.box[:, 1]):
            raise ValueError("history points must lie inside the grid box")

    centers = grid.all_centers()
    out = np.empty(centers.shape[0])
    if kind == "least_squares":
        inv_s = 1.0 / s
    else:
        depth = 1.0 / np.sqrt(2.0 * np.pi * s * s)
        inv_2s2 = 1.0 / (2.0 * s * s)
    chunk = max(1, _MAX_CHUNK_ELEMENTS // X.shape[0])
    for lo in range(0, centers.shape[0], chunk):
        hi = min(lo + chunk, centers.shape[0])
        dist = metric.pairwise(centers[lo:hi], X)
        if kind == "least_squares":
            out[lo:hi] = (dist * dist) @ inv_s
        else:
            out[lo:hi] = X.shape[0] - np.exp(-(dist * dist) * inv_2s2) @ depth
    if kind == "gaussian_wells":
        out = np.maximum(out, 0.0)
    return EnergyField(grid, out.reshape(grid.cells), kind)


@dataclass(frozen=True)
class MinEnergyPath:
    """Polyline from a to b (exact endpoints, interior cell centers) and its cost."""

    points: np.ndarray  # (K, d)
    cost: float

    def arc_lengths(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


def _traverse(grid: Grid, p: np.ndarray, q: np.ndarray):
    """Yield (cell multi-index, length inside cell) for the segment p -> q.

    Parametric voxel traversal; p and q must lie inside the grid box.
    """
    total = float(np.linalg.norm(q - p))
    start = grid.cell_of(p)
    if start is None:
        raise ValueError("segment start outside grid box")
    if total == 0.0:
        yield start, 0.0
        return
    direction = (q - p) / total
    w = grid.widths
    cell = list(start)
    step = []
    t_max = []
    t_delta = []
    for j in range(grid.dimension):
        if direction[j] > 0:
            step.append(1)
            boundary = grid.box[j, 0] + (cell[j] + 1) * w[j]
            t_max.append((boundary - p[j]) / direction[j])
            t_delta.append(w[j] / direction[j])
        elif direction[j] < 0:
            step.append(-1)
            boundary = grid.box[j, 0] + cell[j] * w[j]
            t_max.append((boundary - p[j]) / direction[j])
            t_delta.append(-w[j] / direction[j])
        else:
            step.append(0)
            t_max.append(math.inf)
            t_delta.append(math.inf)
    t = 0.0
    while True:
        axis = int(np.argmin(t_max))
        t_next = t_max[axis]
        if t_next >= total:
            yield tuple(cell), total - t
            return
        yield tuple(cell), t_next - t
        t = t_next
        cell[axis] += step[axis]
        t_max[axis] += t_delta[axis]
        if not 0 <= cell[axis] < grid.cells[axis]:
            # q sits on the outer boundary; the remaining length is negligible.
            return


def _segment_cost(field: EnergyField, p: np.ndarray, q: np.ndarray) -> float:
    return sum(field.values[c] * ln for c, ln in _traverse(field.grid, p, q))


def _segment_feasible(mask: FeasibilityMask, p: np.ndarray, q: np.ndarray) -> bool:
    tol = 1e-12 * (1.0 + float(np.linalg.norm(q - p)))
    for c, ln in _traverse(mask.grid, p, q):
        if ln > tol and not mask.feasible[c]:
            return False
    return True


def _dijkstra_cells(
    field: EnergyField, mask: FeasibilityMask, start: tuple, goal: tuple
) -> list[tuple]:
    """Shortest path on the feasible-cell graph; ties broken by flat cell index."""
    grid = field.grid
    shape = grid.cells
    n = grid.n_cells
    values = field.values.reshape(-1)
    feasible = mask.feasible.reshape(-1)
    strides = np.array([int(np.prod(shape[j + 1:])) for j in range(len(shape))], dtype=np.int64)
    offsets = []
    for delta in np.ndindex(*(3,) * len(shape)):
        d = tuple(x - 1 for x in delta)
        if any(d):
            offsets.append((d, float(np.linalg.norm(np.asarray(d) * grid.widths))))
    src = int(np.ravel_multi_index(start, shape))
    dst = int(np.ravel_multi_index(goal, shape))
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        du, u = heapq.heappop(heap)
        if seen[u]:
            continue
        seen[u] = True
        if u == dst:
            break
        coords = np.unravel_index(u, shape)
        vu = values[u]
        for d, length in offsets:
            v = u
            ok = True
            for j, dj in enumerate(d):
                cj = coords[j] + dj
                if not 0 <= cj < shape[j]:
                    ok = False
                    break
                v += dj * strides[j]
            if not ok or seen[v] or not feasible[v]:
                continue
            nd = du + 0.5 * (vu + values[v]) * length
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if not seen[dst]:
        raise ValueError("no feasible path: the mask disconnects the endpoints")
    path = []
    v = dst
    while v != -1:
        path.append(tuple(int(c) for c in np.unravel_index(v, shape)))
        v = prev[v]
    path.reverse()
    return path


def _shortcut(
    vertices: list[np.ndarray], field: EnergyField, mask: FeasibilityMask
) -> list[np.ndarray]:
    """Greedy line-of-sight smoothing: take the farthest feasible jump whose
    straight-segment cost does not exceed the grid path cost it replaces."""
    if len(vertices) <= 2:
        return vertices
    edge_costs = [
        _segment_cost(field, vertices[i], vertices[i + 1]) for i in range(len(vertices) - 1)
    ]
    prefix = np.concatenate([[0.0], np.cumsum(edge_costs)])
    out = [vertices[0]]
    i = 0
    while i < len(vertices) - 1:
        j = len(vertices) - 1
        while j > i + 1:
            between = prefix[j] - prefix[i]
            if _segment_feasible(mask, vertices[i], vertices[j]):
                direct = _segment_cost(field, vertices[i], vertices[j])
                if direct <= between * (1.0 + 1e-12) + 1e-12:
                    break
            j -= 1
        out.append(vertices[j])
        i = j
    return out


def min_energy_path(
    field: EnergyField,
    mask: FeasibilityMask | None,
    a,
    b,
) -> MinEnergyPath:
    """Minimum line-integral path between two points on the field's grid.

    Raises when either endpoint falls outside the grid box or in an
    infeasible cell, or when the mask disconnects the endpoints.
    """
    grid = field.grid
    if mask is None:
        mask = full_mask(grid)
    elif not mask.grid.same_layout(grid):
        raise ValueError("mask and field must share the same grid layout")
    a = as_point(a)
    b = as_point(b)
    ca = grid.cell_of(a)
    cb = grid.cell_of(b)
    if ca is None or not mask.feasible[ca]:
        raise ValueError(f"start point {a.tolist()} is infeasible or outside the grid")
    if cb is None or not mask.feasible[cb]:
        raise ValueError(f"end point {b.tolist()} is infeasible or outside the grid")
    if ca == cb:
        vertices = [a, b]
    else:
        cells = _dijkstra_cells(field, mask, ca, cb)
        vertices = [a] + [grid.center(c) for c in cells[1:-1]] + [b]
        vertices = _shortcut(vertices, field, mask)
    cost = sum(_segment_cost(field, vertices[i], vertices[i + 1]) for i in range(len(vertices) - 1))
    return MinEnergyPath(np.asarray(vertices), float(cost))


@dataclass(frozen=True)
class DensePath:
    """A track resampled on a uniform time lattice anchored at its start.

    ``times[k] = times[0] + k * dt`` exactly; the lattice stops at the last
    multiple of dt inside the source span, so a trailing remainder shorter
    than dt is absorbed by the final segment.
    """

    times: np.ndarray
    positions: np.ndarray
    dt: float
    source_times: np.ndarray
    source_positions: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]


def _place_along(polyline: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    """Points at the given arc-length fractions of a polyline (constant speed)."""
    seg = np.linalg.norm(np.diff(polyline, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total == 0.0:
        return np.repeat(polyline[:1], len(fractions), axis=0)
    target = np.clip(fractions, 0.0, 1.0) * total
    idx = np.searchsorted(arc, target, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    local = (target - arc[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    return polyline[idx] + local[:, None] * (polyline[idx + 1] - polyline[idx])


def densify(
    times: np.ndarray,
    positions: np.ndarray,
    dt: float,
    field: EnergyField | None = None,
    mask: FeasibilityMask | None = None,
) -> DensePath:
    """Resample a sparse sub-trajectory to a uniform dt lattice.

    Consecutive observation pairs further apart than dt are bridged by
    ``min_energy_path``; pairs at or below dt are bridged by their straight
    segment.  Lattice points falling inside a pair's time window are placed
    along the bridging polyline at constant speed.  The lattice is anchored
    at the sub-trajectory start.

    Args:
        times: (n,) strictly increasing observation times.
        positions: (n, d) observed positions.
        dt: lattice spacing, > 0.
        field: cost field; required only when some gap exceeds dt.
        mask: optional feasibility mask sharing the field's grid.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    X = np.atleast_2d(np.asarray(positions, dtype=float))
    if t.shape[0] != X.shape[0] or t.shape[0] < 1:
        raise ValueError("times and positions must align and be nonempty")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if not dt > 0:
        raise ValueError("dt must be > 0")

    n_steps = int(math.floor((t[-1] - t[0]) / dt + 1e-9))
    lattice = t[0] + dt * np.arange(n_steps + 1)
    out = np.empty((n_steps + 1, X.shape[1]))
    out[0] = X[0]

    # Assign lattice points k >= 1 to the observation pair whose window
    # (t_j, t_{j+1}] contains them.
    pair_of = np.searchsorted(t, lattice[1:], side="left") - 1
    pair_of = np.clip(pair_of, 0, len(t) - 2) if len(t) > 1 else pair_of
    for j in range(len(t) - 1):
        sel = np.flatnonzero(pair_of == j) + 1
        if sel.size == 0:
            continue
        gap = t[j + 1] - t[j]
        if gap > dt * (1.0 + 1e-9):
            if field is None:
                raise ValueError(
                    f"gap of {gap:g} exceeds dt={dt:g}; densification needs an energy field"
                )
            polyline = min_energy_path(field, mask, X[j], X[j + 1]).points
        else:
            polyline = X[j : j + 2]
        fractions = (lattice[sel] - t[j]) / gap
        out[sel] = _place_along(polyline, fractions)
    return DensePath(
        times=lattice,
        positions=out,
        dt=float(dt),
        source_times=t.copy(),
        source_positions=X.copy(),
    )
