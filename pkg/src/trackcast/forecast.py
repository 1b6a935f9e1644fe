"""End-to-end forecasting of recurrent trajectories.

Given a sparse, noisy history P and the tolerances (epsilon, theta), the
forecaster:

1. collects start points: past indices whose position just entered the
   epsilon-ball around the latest state, with heading within theta of the
   latest heading, and with at least a full horizon of history ahead;
2. extracts the forward time restriction of P from each start point;
3. densifies each extracted sub-trajectory onto a uniform dt lattice,
   bridging long gaps with minimum-energy paths;
4. for each future lattice step, pools the matching offset across all
   densified paths into a KDE, and emits the triple (point prediction,
   density, highest-density region).

Velocities for stage 1 come from backward finite differences on the raw
sparse history, never from the densified paths.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kde as kde_mod
from .energy import (
    DensePath,
    EnergyField,
    FeasibilityMask,
    build_field,
    densify,
    grid_over,
    pheromone_sigmas,
)
from .geometry import EUCLIDEAN, Metric, Trajectory, all_velocities
from .hdr import HdrRegion, estimate_hdr
from .kde import DensityEstimate
from .kernels import EPANECHNIKOV, Kernel1D, as_bandwidth

log = logging.getLogger(__name__)


class NoAnalogueError(RuntimeError):
    """Raised when stage 1 finds no start points under the given tolerances."""


@dataclass(frozen=True)
class ForecastConfig:
    """Forecast parameters.

    Attributes:
        epsilon: spatial match tolerance, > 0.
        theta: heading tolerance in cosine-distance units, in [0, 2].
        dt: forecast lattice spacing, > 0.
        horizon: forecast duration T >= dt; the forecast has
            ceil(horizon / dt) steps.
        alpha: HDR level; regions carry 1 - alpha of the mass.
        bandwidth: per-axis KDE bandwidth (scalar broadcasts); None falls
            back to Scott's rule per step, with a warning.
        kernel: the 1-d kernel family for the product KDE.
        lagrangian: "least_squares" or "gaussian_wells" for densification.
        sigma: base width for the energy field wells.
        pheromone_rate: optional linear growth of sigma with observation age.
        metric: distance on the ambient space.
        mask: optional feasibility mask; when given, point predictions are
            restricted to feasible cells and densification respects it.
        seed: master seed; each step draws from an independent substream.
        mc_samples: Monte Carlo draws per HDR threshold.
        grid_cells: cell count on the longest axis of the energy grid
            (only used when no mask supplies a grid).
    """

    epsilon: float
    theta: float
    dt: float
    horizon: float
    alpha: float = 0.3
    bandwidth: Optional[np.ndarray] = None
    kernel: Kernel1D = EPANECHNIKOV
    lagrangian: str = "least_squares"
    sigma: float = 1.0
    pheromone_rate: float = 0.0
    metric: Metric = EUCLIDEAN
    mask: Optional[FeasibilityMask] = None
    seed: int = 0
    mc_samples: int = 10_000
    grid_cells: int = 200

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 <= self.theta <= 2.0:
            raise ValueError(f"theta must be in [0, 2], got {self.theta}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.horizon < self.dt:
            raise ValueError(f"horizon {self.horizon} must be >= dt {self.dt}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.pheromone_rate < 0:
            raise ValueError("pheromone_rate must be >= 0")
        if self.mc_samples < 100:
            raise ValueError("mc_samples must be >= 100")
        if self.grid_cells < 2:
            raise ValueError("grid_cells must be >= 2")

    @property
    def n_steps(self) -> int:
        """Number of forecast steps, ceil(horizon / dt) with a float guard."""
        return int(math.ceil(self.horizon / self.dt - 1e-9))


@dataclass(frozen=True)
class MatchSet:
    """Stage-1 start points: strictly increasing 0-based indices into P."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("match indices must be strictly increasing")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class ForecastStep:
    """One forecast triple: point prediction, density, HDR.

    ``step`` counts 1..n_steps past the end of the history; ``time`` is the
    absolute timestamp.  Steps with no supporting path are absent: the
    prediction, density, and region are all None and support_count is 0.
    """

    step: int
    time: float
    prediction: Optional[np.ndarray]
    density: Optional[DensityEstimate]
    region: Optional[HdrRegion]
    support_count: int

    @property
    def absent(self) -> bool:
        return self.prediction is None


@dataclass(frozen=True)
class ForecastResult:
    steps: list[ForecastStep]
    matches: MatchSet
    t_last: float
    config: ForecastConfig
    dense_paths: list[DensePath] = field(repr=False, default_factory=list)

    @property
    def dimension(self) -> int:
        for s in self.steps:
            if s.prediction is not None:
                return s.prediction.shape[0]
        return self.dense_paths[0].positions.shape[1] if self.dense_paths else 0


def step_rng(seed: int, step: int) -> np.random.Generator:
    """Independent substream for one forecast step.

    Substreams mix the master seed with the step index through
    ``numpy.random.SeedSequence([seed, step])``, so steps are reproducible
    individually and reorderable across threads.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(step)]))


def collect_start_points(traj: Trajectory, cfg: ForecastConfig) -> MatchSet:
    """Stage 1: indices i (0-based, 1 <= i <= N-2) that match the latest state.

    A candidate matches when it sits inside the epsilon-ball around the last
    position while its predecessor does not (an entry edge), its heading is
    within theta of the latest heading, and more than one horizon of data
    remains after it.  Candidates with zero velocity are skipped with a
    warning, as is the whole scan when the latest velocity is zero.
    """
    n = len(traj)
    if n < 3:
        raise ValueError("need at least 3 points to collect start points")
    X = traj.positions
    t = traj.times
    vel = all_velocities(traj)  # velocity at index i is vel[i - 1]
    v_last = vel[-1]
    nv_last = float(np.linalg.norm(v_last))
    if nv_last == 0.0:
        log.warning("latest velocity is zero; heading undefined, no matches possible")
        return MatchSet(np.empty(0, dtype=np.int64))

    dist_last = cfg.metric.distances_to(X, X[-1])
    cand = np.arange(1, n - 1)
    inside = dist_last[cand] < cfg.epsilon
    entering = dist_last[cand - 1] >= cfg.epsilon
    lookahead = (t[-1] - t[cand]) > cfg.horizon

    v = vel[cand - 1]
    norms = np.linalg.norm(v, axis=1)
    nonzero = norms > 0.0
    heading = np.full(cand.shape, np.inf)
    ok = nonzero
    if np.any(ok):
        cosine = (v[ok] @ v_last) / (norms[ok] * nv_last)
        heading[ok] = np.clip(1.0 - cosine, 0.0, 2.0)
    similar = heading < cfg.theta

    skipped = inside & entering & lookahead & ~nonzero
    if np.any(skipped):
        log.warning(
            "skipped %d stationary candidate(s): heading undefined at zero velocity",
            int(skipped.sum()),
        )
    return MatchSet(cand[inside & entering & lookahead & similar])


def extract_subtrajectories(
    traj: Trajectory, matches: MatchSet, horizon: float
) -> list[Trajectory]:
    """Stage 2: the forward time restriction of P from each matched index."""
    if len(matches) == 0:
        raise ValueError("match set is empty")
    out = []
    t = traj.times
    for i in matches.indices:
        stop = int(np.searchsorted(t, t[i] + horizon, side="right"))
        out.append(traj.window(int(i), stop))
    return out


def assemble_kde_inputs(paths: list[DensePath], offset: int) -> np.ndarray:
    """Stage 4 pooling: the offset-th lattice point of every long-enough path."""
    rows = [p.positions[offset] for p in paths if len(p) > offset]
    if not rows:
        return np.empty((0, paths[0].positions.shape[1] if paths else 0))
    return np.asarray(rows)


def _needs_field(subtrajs: list[Trajectory], dt: float) -> bool:
    for s in subtrajs:
        if len(s) >= 2 and float(np.max(np.diff(s.times))) > dt * (1.0 + 1e-9):
            return True
    return False


def point_estimate_constrained(
    density: DensityEstimate, mask: FeasibilityMask
) -> np.ndarray:
    """Mode search restricted to the feasible region.

    Feasible cell centers intersecting the density's support box join the
    candidate set, and hill-climb iterates must stay feasible.  Raises when
    the support is entirely infeasible.
    """
    extra = mask.feasible_centers(box=density.support_box())
    candidates = extra if extra.shape[0] else None
    return density.mode(candidates=candidates, feasible=mask.is_feasible_point)


def run_forecast(traj: Trajectory, cfg: ForecastConfig) -> ForecastResult:
    """Run all four stages and emit one ForecastStep per future lattice time.

    Raises NoAnalogueError when stage 1 comes back empty.  Steps whose pooled
    support is empty, or entirely infeasible under a supplied mask, are
    reported absent and the run continues.
    """
    matches = collect_start_points(traj, cfg)
    if len(matches) == 0:
        raise NoAnalogueError(
            "no analogues found: epsilon=%g, theta=%g, horizon=%g"
            % (cfg.epsilon, cfg.theta, cfg.horizon)
        )
    subtrajs = extract_subtrajectories(traj, matches, cfg.horizon)

    energy_field: EnergyField | None = None
    path_mask = cfg.mask
    if _needs_field(subtrajs, cfg.dt):
        grid = cfg.mask.grid if cfg.mask is not None else grid_over(traj.positions, cfg.grid_cells)
        sig = pheromone_sigmas(traj.times, cfg.sigma, cfg.pheromone_rate)
        energy_field = build_field(traj.positions, cfg.lagrangian, sig, grid, cfg.metric)

    dense = [
        densify(s.times, s.positions, cfg.dt, field=energy_field, mask=path_mask)
        for s in subtrajs
    ]

    bandwidth = None
    if cfg.bandwidth is not None:
        bandwidth = as_bandwidth(cfg.bandwidth, traj.dimension)

    t_last = float(traj.times[-1])
    steps: list[ForecastStep] = []
    for k in range(1, cfg.n_steps + 1):
        t_k = t_last + k * cfg.dt
        support = assemble_kde_inputs(dense, k)
        if support.shape[0] == 0:
            log.warning("step %d: no supporting path reaches offset %d", k, k)
            steps.append(ForecastStep(k, t_k, None, None, None, 0))
            continue
        density = kde_mod.build(support, bandwidth, cfg.kernel)
        if cfg.mask is not None:
            try:
                prediction = point_estimate_constrained(density, cfg.mask)
            except ValueError:
                log.warning("step %d: support entirely infeasible, marking absent", k)
                steps.append(ForecastStep(k, t_k, None, None, None, support.shape[0]))
                continue
        else:
            prediction = density.mode()
        region = estimate_hdr(density, cfg.alpha, cfg.mc_samples, step_rng(cfg.seed, k))
        steps.append(
            ForecastStep(k, t_k, prediction, density, region, support.shape[0])
        )
    return ForecastResult(steps=steps, matches=matches, t_last=t_last, config=cfg, dense_paths=dense)
