"""Points, metrics, trajectories, and finite-difference velocities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_NM = 3440.065


def as_point(p) -> np.ndarray:
    """Coerce ``p`` to a finite 1-d float array."""
    a = np.asarray(p, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("a point must be a one-dimensional sequence of coordinates")
    if not np.all(np.isfinite(a)):
        raise ValueError("point coordinates must be finite")
    return a


@dataclass(frozen=True)
class Metric:
    """Distance function on the ambient space.

    ``euclidean`` works in any dimension.  ``haversine`` interprets points as
    (latitude, longitude) in degrees, requires d = 2, and returns the
    great-circle distance ``radius * central_angle``.
    """

    kind: str = "euclidean"
    radius: float = EARTH_RADIUS_NM

    def __post_init__(self):
        if self.kind not in ("euclidean", "haversine"):
            raise ValueError(f"unknown metric kind: {self.kind!r}")
        if self.kind == "haversine" and not self.radius > 0:
            raise ValueError("haversine radius must be > 0")

    @property
    def is_geographic(self) -> bool:
        return self.kind == "haversine"

    def _check_dim(self, d: int) -> None:
        if self.kind == "haversine" and d != 2:
            raise ValueError("haversine requires 2-d (lat, lon) points")

    def distance(self, a, b) -> float:
        """Distance between two points."""
        a = as_point(a)
        b = as_point(b)
        if a.shape != b.shape:
            raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
        self._check_dim(a.size)
        if self.kind == "euclidean":
            return float(np.linalg.norm(a - b))
        return float(self.pairwise(a[None, :], b[None, :])[0, 0])

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Distances between every row of ``A`` (n, d) and every row of ``B`` (m, d).

        Returns an (n, m) array.  Callers with large inputs should chunk rows
        of ``A``; this routine materializes the full (n, m) result.
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        self._check_dim(A.shape[1])
        if self.kind == "euclidean":
            sq = (
                np.sum(A * A, axis=1)[:, None]
                + np.sum(B * B, axis=1)[None, :]
                - 2.0 * (A @ B.T)
            )
            return np.sqrt(np.maximum(sq, 0.0))
        lat1 = np.radians(A[:, 0])[:, None]
        lon1 = np.radians(A[:, 1])[:, None]
        lat2 = np.radians(B[:, 0])[None, :]
        lon2 = np.radians(B[:, 1])[None, :]
        s = (
            np.sin(0.5 * (lat2 - lat1)) ** 2
            + np.cos(lat1) * np.cos(lat2) * np.sin(0.5 * (lon2 - lon1)) ** 2
        )
        return 2.0 * self.radius * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))

    def distances_to(self, A: np.ndarray, q) -> np.ndarray:
        """Distances from every row of ``A`` to the single point ``q``."""
        return self.pairwise(A, as_point(q)[None, :])[:, 0]


EUCLIDEAN = Metric("euclidean")


def angle_distance(u, v) -> float:
    """Cosine distance ``1 - <u, v> / (|u| |v|)`` between two velocity vectors.

    0 for parallel, 1 for orthogonal, 2 for antiparallel.  Raises for
    zero-magnitude inputs, for which the heading is undefined; callers decide
    the skip policy.
    """
    u = as_point(u)
    v = as_point(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.size} vs {v.size}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("angle_distance is undefined for zero-magnitude velocities")
    return float(np.clip(1.0 - float(np.dot(u, v)) / (nu * nv), 0.0, 2.0))


@dataclass(frozen=True)
class Trajectory:
    """Timestamped positions: ``times`` (N,) strictly increasing, ``positions`` (N, d).

    Immutable after construction; the dimension d is fixed per dataset and all
    downstream operations validate against it.
    """

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float, copy=True).reshape(-1)
        X = np.array(self.positions, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError("positions must be an (N, d) array")
        if t.shape[0] != X.shape[0]:
            raise ValueError("times and positions must have the same length")
        if t.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("a trajectory needs at least one point in d >= 1")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(X))):
            raise ValueError("trajectory values must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        t.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", X)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    def window(self, start: int, stop: int) -> "Trajectory":
        """Sub-trajectory over row indices [start, stop)."""
        return Trajectory(self.times[start:stop], self.positions[start:stop])


def finite_difference_velocity(traj: Trajectory, index: int) -> np.ndarray:
    """Backward difference quotient ``(x_i - x_{i-1}) / (t_i - t_{i-1})``.

    ``index`` must have a predecessor (index >= 1); the velocity at the first
    point of any trajectory is undefined.
    """
    if not 1 <= index < len(traj):
        raise ValueError(f"index {index} has no predecessor in a trajectory of length {len(traj)}")
    dt = traj.times[index] - traj.times[index - 1]
    if dt <= 0:
        raise ValueError("duplicate or non-increasing timestamps")
    return (traj.positions[index] - traj.positions[index - 1]) / dt


def all_velocities(traj: Trajectory) -> np.ndarray:
    """Backward-difference velocities for indices 1..N-1, shape (N-1, d)."""
    dt = np.diff(traj.times)[:, None]
    return np.diff(traj.positions, axis=0) / dt
