"""Synthetic trajectory generators: loiter-point tracks and the Lorenz system.

Both generators return a (noisy, clean) pair of trajectories; the noisy copy
adds i.i.d. Gaussian observation noise per coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Trajectory


def _reachable_everywhere(transition: np.ndarray) -> bool:
    """True when every state can reach every state on the support graph."""
    n = transition.shape[0]
    adj = transition > 0
    for start in range(n):
        seen = np.zeros(n, dtype=bool)
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        if not seen.all():
            return False
    return True


@dataclass(frozen=True)
class LoiterSpec:
    """A hidden Markov walk over planar loiter points.

    The particle dwells ``dwell_steps`` samples at each loiter point, then
    picks a successor from its transition row and moves toward it in a
    straight line at constant ``speed``, sampled every ``step_dt``.
    """

    loiter_points: np.ndarray
    transition: np.ndarray
    dwell_steps: np.ndarray
    speed: float
    step_dt: float
    noise_sigma: float = 0.05
    n_points: int = 10_000

    def __post_init__(self):
        pts = np.atleast_2d(np.array(self.loiter_points, dtype=float, copy=True))
        trans = np.atleast_2d(np.array(self.transition, dtype=float, copy=True))
        dwell = np.array(self.dwell_steps, dtype=int, copy=True)
        if dwell.ndim == 0:
            dwell = np.full(pts.shape[0], int(dwell))
        if pts.shape[0] < 2:
            raise ValueError("need at least 2 loiter points")
        if trans.shape != (pts.shape[0], pts.shape[0]):
            raise ValueError("transition matrix must be square over the loiter points")
        if np.any(trans < 0) or np.any(np.abs(trans.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if not _reachable_everywhere(trans):
            raise ValueError("transition graph has transient states")
        if np.any(dwell < 0) or dwell.shape != (pts.shape[0],):
            raise ValueError("dwell_steps must be >= 0, one per loiter point")
        if not (self.speed > 0 and self.step_dt > 0 and self.noise_sigma >= 0):
            raise ValueError("speed and step_dt must be > 0, noise_sigma >= 0")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        for arr in (pts, trans, dwell):
            arr.setflags(write=False)
        object.__setattr__(self, "loiter_points", pts)
        object.__setattr__(self, "transition", trans)
        object.__setattr__(self, "dwell_steps", dwell)


def loiter6_spec(
    speed: float = 2.0,
    dwell: int = 8,
    step_dt: float = 0.1,
    noise_sigma: float = 0.05,
    n_points: int = 10_000,
) -> LoiterSpec:
    """Six loiter points in [0, 10]^2 with one bifurcation.

    From the top-left point the particle uniformly chooses the central point
    or heads due south; all other rows are deterministic, and the two
    resulting circuits revisit every point.
    """
    points = np.array(
        [
            [1.0, 5.0],  # 0: top-left, bifurcates
            [5.0, 5.0],  # 1: center
            [1.0, 1.0],  # 2: due south of 0
            [3.0, 1.0],  # 3
            [8.0, 6.0],  # 4
            [4.0, 8.0],  # 5
        ]
    )
    transition = np.zeros((6, 6))
    transition[0, 1] = 0.5
    transition[0, 2] = 0.5
    transition[1, 5] = 1.0
    transition[2, 3] = 1.0
    transition[3, 1] = 1.0
    transition[4, 0] = 1.0
    transition[5, 4] = 1.0
    return LoiterSpec(points, transition, dwell, speed, step_dt, noise_sigma, n_points)


def loiter5_spec(
    speed: float = 2.0,
    dwell: int = 8,
    step_dt: float = 0.1,
    noise_sigma: float = 0.05,
    n_points: int = 10_000,
) -> LoiterSpec:
    """Five loiter points on a fixed circuit in [0, 10]^2 (no bifurcation)."""
    points = np.array(
        [
            [2.0, 8.0],
            [8.0, 8.0],
            [8.0, 2.0],
            [5.0, 5.0],
            [2.0, 2.0],
        ]
    )
    transition = np.zeros((5, 5))
    for i in range(5):
        transition[i, (i + 1) % 5] = 1.0
    return LoiterSpec(points, transition, dwell, speed, step_dt, noise_sigma, n_points)


def generate_loiter(
    spec: LoiterSpec, rng: np.random.Generator
) -> tuple[Trajectory, Trajectory]:
    """Simulate the loiter walk; returns (noisy, clean) trajectories."""
    pts = spec.loiter_points
    clean = np.empty((spec.n_points, pts.shape[1]))
    pos = pts[0].copy()
    current = 0
    dwell_left = int(spec.dwell_steps[0])
    target = -1
    if dwell_left == 0:
        target = int(rng.choice(pts.shape[0], p=spec.transition[0]))
    step_len = spec.speed * spec.step_dt
    for k in range(spec.n_points):
        clean[k] = pos
        if target < 0:
            dwell_left -= 1
            if dwell_left <= 0:
                target = int(rng.choice(pts.shape[0], p=spec.transition[current]))
        else:
            remaining = float(np.linalg.norm(pts[target] - pos))
            if step_len >= remaining - 1e-12:
                pos = pts[target].copy()
                current = target
                dwell_left = int(spec.dwell_steps[current])
                target = -1
                if dwell_left == 0:
                    target = int(rng.choice(pts.shape[0], p=spec.transition[current]))
            else:
                pos = pos + (pts[target] - pos) * (step_len / remaining)
    times = spec.step_dt * np.arange(spec.n_points)
    noisy = clean
    if spec.noise_sigma > 0:
        noisy = clean + rng.normal(0.0, spec.noise_sigma, size=clean.shape)
    return Trajectory(times, noisy), Trajectory(times, clean)


@dataclass(frozen=True)
class LorenzSpec:
    """Fixed-step integration of the Lorenz system from ``x0``."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    x0: tuple[float, float, float] = (1.0, 1.0, 1.0)
    dt: float = 0.01
    steps: int = 30_000
    noise_sigma: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def lorenz_rhs(state, sigma: float, rho: float, beta: float):
    """Time derivative of the Lorenz system at ``state``."""
    x, y, z = state
    return (sigma * (y - x), rho * x - y - x * z, x * y - beta * z)


def generate_lorenz(
    spec: LorenzSpec, rng: np.random.Generator
) -> tuple[Trajectory, Trajectory]:
    """Classical 4th-order Runge-Kutta run; returns (noisy, clean) trajectories."""
    n = spec.steps
    clean = np.empty((n, 3))
    x, y, z = (float(v) for v in spec.x0)
    h = spec.dt
    s, r, b = spec.sigma, spec.rho, spec.beta
    clean[0] = (x, y, z)
    for k in range(1, n):
        k1 = lorenz_rhs((x, y, z), s, r, b)
        k2 = lorenz_rhs((x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], z + 0.5 * h * k1[2]), s, r, b)
        k3 = lorenz_rhs((x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], z + 0.5 * h * k2[2]), s, r, b)
        k4 = lorenz_rhs((x + h * k3[0], y + h * k3[1], z + h * k3[2]), s, r, b)
        x += h * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
        y += h * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
        z += h * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0
        clean[k] = (x, y, z)
    times = spec.dt * np.arange(n)
    noisy = clean
    if spec.noise_sigma > 0:
        noisy = clean + rng.normal(0.0, spec.noise_sigma, size=clean.shape)
    return Trajectory(times, noisy), Trajectory(times, clean)


def downsample_with_interpolation(traj: Trajectory, period: float) -> Trajectory:
    """Resample to exact multiples of ``period`` past the start time.

    Positions are linearly interpolated between the bracketing samples.
    """
    if not period > 0:
        raise ValueError("period must be > 0")
    span = float(traj.times[-1] - traj.times[0])
    if span < period:
        raise ValueError(f"period {period:g} exceeds the trajectory span {span:g}")
    n = int(math.floor(span / period + 1e-9))
    new_t = traj.times[0] + period * np.arange(n + 1)
    cols = [np.interp(new_t, traj.times, traj.positions[:, j]) for j in range(traj.dimension)]
    return Trajectory(new_t, np.column_stack(cols))
