import logging

import numpy as np
import pytest

from trackcast.energy import FeasibilityMask, Grid
from trackcast.forecast import (
    ForecastConfig,
    MatchSet,
    NoAnalogueError,
    assemble_kde_inputs,
    collect_start_points,
    extract_subtrajectories,
    point_estimate_constrained,
    run_forecast,
    step_rng,
)
from trackcast.geometry import EUCLIDEAN, Trajectory, angle_distance
from trackcast.kde import DensityEstimate
from trackcast.energy import densify
from trackcast.synth import generate_loiter, loiter6_spec


def brute_force_matches(traj: Trajectory, cfg: ForecastConfig) -> list[int]:
    """Independent stage-1 predicate scan, written directly from the rule."""
    n = len(traj)
    t, X = traj.times, traj.positions
    v_last = (X[-1] - X[-2]) / (t[-1] - t[-2])
    if np.linalg.norm(v_last) == 0:
        return []
    out = []
    for i in range(1, n - 1):
        v_i = (X[i] - X[i - 1]) / (t[i] - t[i - 1])
        if np.linalg.norm(v_i) == 0:
            continue
        if (
            cfg.metric.distance(X[i], X[-1]) < cfg.epsilon
            and cfg.metric.distance(X[i - 1], X[-1]) >= cfg.epsilon
            and angle_distance(v_i, v_last) < cfg.theta
            and t[-1] - t[i] > cfg.horizon
        ):
            out.append(i)
    return out


def circle_trajectory(loops: float = 4.0, per_loop: int = 40) -> Trajectory:
    n = int(loops * per_loop) + 1
    k = np.arange(n)
    phi = 2 * np.pi * k / per_loop
    return Trajectory(k.astype(float), np.column_stack([np.cos(phi), np.sin(phi)]))


def test_circle_loop_matches_prior_entries():
    traj = circle_trajectory(loops=2.5, per_loop=40)
    cfg = ForecastConfig(epsilon=0.15, theta=0.5, dt=1.0, horizon=3.0)
    matches = collect_start_points(traj, cfg)
    oracle = brute_force_matches(traj, cfg)
    assert list(matches.indices) == oracle
    # one ball entry per prior pass below the lookahead cutoff
    assert len(matches) == 2


def test_epsilon_larger_than_diameter_gives_empty():
    traj = circle_trajectory(loops=2.5, per_loop=40)
    cfg = ForecastConfig(epsilon=10.0, theta=1.0, dt=1.0, horizon=3.0)
    assert len(collect_start_points(traj, cfg)) == 0


def test_theta_zero_gives_empty():
    rng = np.random.default_rng(0)
    traj = Trajectory(np.arange(200.0), np.cumsum(rng.normal(size=(200, 2)), axis=0))
    cfg = ForecastConfig(epsilon=5.0, theta=0.0, dt=1.0, horizon=3.0)
    assert len(collect_start_points(traj, cfg)) == 0


@pytest.mark.parametrize("seed", range(5))
def test_stage1_oracle_equivalence_random_walks(seed):
    rng = np.random.default_rng(seed)
    steps = rng.normal(scale=0.5, size=(400, 2))
    traj = Trajectory(np.cumsum(rng.uniform(0.5, 1.5, 400)), np.cumsum(steps, axis=0))
    cfg = ForecastConfig(
        epsilon=float(rng.uniform(0.5, 4.0)),
        theta=float(rng.uniform(0.2, 1.5)),
        dt=1.0,
        horizon=float(rng.uniform(5, 50)),
    )
    assert list(collect_start_points(traj, cfg).indices) == brute_force_matches(traj, cfg)


def test_stage1_excludes_stationary_candidates():
    # a dwell makes some velocities exactly zero; a stationary candidate also
    # repeats its predecessor's position, so the entry-edge pair can never
    # hold and it is excluded, matching the oracle
    pos = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]]
    traj = Trajectory(np.arange(6.0), pos)
    cfg = ForecastConfig(epsilon=2.6, theta=2.0, dt=1.0, horizon=1.5)
    matches = collect_start_points(traj, cfg)
    assert list(matches.indices) == brute_force_matches(traj, cfg)
    assert 2 not in matches.indices  # index with zero velocity


def test_zero_last_velocity_returns_empty(caplog):
    pos = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 0.0]]
    traj = Trajectory(np.arange(4.0), pos)
    cfg = ForecastConfig(epsilon=1.5, theta=1.0, dt=0.5, horizon=0.5)
    with caplog.at_level(logging.WARNING):
        assert len(collect_start_points(traj, cfg)) == 0


def test_extract_counts_uniform_spacing():
    traj = Trajectory(np.arange(30.0), np.zeros((30, 2)) + np.arange(30)[:, None])
    subs = extract_subtrajectories(traj, MatchSet(np.array([4])), horizon=5.0)
    assert len(subs) == 1 and len(subs[0]) == 6  # offsets 0..5 inclusive


def test_extract_singleton_when_gap_exceeds_horizon():
    traj = Trajectory([0.0, 10.0, 20.0], [[0, 0], [1, 1], [2, 2]])
    subs = extract_subtrajectories(traj, MatchSet(np.array([1])), horizon=5.0)
    assert len(subs[0]) == 1


def test_extract_overlapping_restrictions():
    traj = Trajectory(np.arange(10.0), np.arange(10)[:, None] * [[1.0, 0.0]])
    subs = extract_subtrajectories(traj, MatchSet(np.array([2, 4])), horizon=3.0)
    assert [len(s) for s in subs] == [4, 4]
    assert subs[0].times[0] == 2.0 and subs[1].times[0] == 4.0


def test_assemble_offsets():
    f = densify(np.arange(5.0), np.arange(5)[:, None] * [[1.0, 1.0]], 1.0)
    short = densify(np.arange(3.0), np.arange(3)[:, None] * [[1.0, 1.0]], 1.0)
    assert assemble_kde_inputs([f, f, f], 4).shape == (3, 2)
    assert assemble_kde_inputs([short], 4).shape[0] == 0
    assert assemble_kde_inputs([short, f], 4).shape == (1, 2)


def test_run_forecast_periodic_oracle():
    # noise-free periodic motion: analogues are exact repeats, so predictions
    # reproduce the next cycle exactly
    traj = circle_trajectory(loops=4.0, per_loop=40)
    cfg = ForecastConfig(epsilon=0.1, theta=1.0, dt=1.0, horizon=5.0, seed=3)
    res = run_forecast(traj, cfg)
    assert len(res.matches) == 3
    assert cfg.n_steps == 5 and len(res.steps) == 5
    for s in res.steps:
        assert not s.absent and s.support_count == 3
        k = int(round(s.time))
        phi = 2 * np.pi * k / 40
        assert s.prediction == pytest.approx([np.cos(phi), np.sin(phi)], abs=1e-9)
        assert s.region.contains(s.prediction)


def test_single_match_prediction_is_center():
    # one loop plus a bit: exactly one prior entry qualifies
    traj = circle_trajectory(loops=1.6, per_loop=40)
    cfg = ForecastConfig(epsilon=0.1, theta=1.0, dt=1.0, horizon=4.0, seed=0)
    res = run_forecast(traj, cfg)
    assert len(res.matches) == 1
    for s in res.steps:
        assert s.support_count == 1
        assert s.prediction == pytest.approx(s.density.centers[0])


def test_no_analogue_error_reports_tolerances():
    # a straight line never revisits the end point's neighborhood
    traj = Trajectory(np.arange(50.0), np.arange(50)[:, None] * [[1.0, 0.0]])
    cfg = ForecastConfig(epsilon=0.4, theta=0.5, dt=1.0, horizon=2.0)
    with pytest.raises(NoAnalogueError) as err:
        run_forecast(traj, cfg)
    msg = str(err.value)
    assert "0.4" in msg and "0.5" in msg and "2" in msg


def test_absent_steps_reported_not_fatal():
    # sample spacing incommensurate with dt: each analogue's window spans
    # slightly less than the full lattice, so the last step loses support
    # but the run completes
    per = 40
    n = int(3.1 * per) + 1
    k = np.arange(n)
    phi = 2 * np.pi * k / per
    traj = Trajectory(0.9 * k, np.column_stack([np.cos(phi), np.sin(phi)]))
    cfg = ForecastConfig(epsilon=0.1, theta=1.0, dt=1.0, horizon=10.0, seed=0)
    res = run_forecast(traj, cfg)
    absent = [s.absent for s in res.steps]
    assert any(absent) and not all(absent)
    present = [s for s in res.steps if not s.absent]
    assert all(s.region is not None for s in present)
    assert all(s.prediction is None and s.region is None for s in res.steps if s.absent)


def test_monotone_horizon_prefix():
    traj = circle_trajectory(loops=4.0, per_loop=40)
    long_cfg = ForecastConfig(epsilon=0.1, theta=1.0, dt=1.0, horizon=8.0, seed=9)
    short_cfg = ForecastConfig(epsilon=0.1, theta=1.0, dt=1.0, horizon=5.0, seed=9)
    long_run = run_forecast(traj, long_cfg)
    short_run = run_forecast(traj, short_cfg)
    assert list(long_run.matches.indices) == list(short_run.matches.indices)
    for s_short, s_long in zip(short_run.steps, long_run.steps):
        assert s_short.prediction == pytest.approx(s_long.prediction, abs=0)
        assert s_short.region.threshold == s_long.region.threshold


def test_step_rng_substreams_independent_and_reproducible():
    a = step_rng(5, 1).uniform(size=4)
    b = step_rng(5, 1).uniform(size=4)
    c = step_rng(5, 2).uniform(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_every_prediction_inside_its_region():
    spec = loiter6_spec(n_points=3000)
    noisy, _ = generate_loiter(spec, np.random.default_rng(2))
    cfg = ForecastConfig(
        epsilon=0.25, theta=1.0, dt=0.5, horizon=6.0,
        bandwidth=np.array([0.5, 0.5]), seed=4,
    )
    res = run_forecast(noisy, cfg)
    present = [s for s in res.steps if not s.absent]
    assert present
    for s in present:
        assert s.region.contains(s.prediction)


# -- constrained point estimation ---------------------------------------------


def ring_mask(grid: Grid, lo: float, hi: float) -> FeasibilityMask:
    centers = grid.all_centers()
    r = np.linalg.norm(centers, axis=1).reshape(grid.cells)
    return FeasibilityMask(grid, (r >= lo) & (r <= hi))


def feasible_grid_argmax(density: DensityEstimate, mask: FeasibilityMask) -> np.ndarray:
    centers = mask.feasible_centers()
    vals = density.evaluate_many(centers)
    return centers[int(np.argmax(vals))]


def test_constrained_equals_unconstrained_when_inactive():
    grid = Grid(np.array([[-3.0, 3.0], [-3.0, 3.0]]), (60, 60))
    mask = FeasibilityMask(grid, np.ones(grid.cells, bool))
    f = DensityEstimate(np.array([[0.3, -0.2], [0.5, 0.1]]), np.array([0.8, 0.8]))
    assert point_estimate_constrained(f, mask) == pytest.approx(f.mode(), abs=1e-9)


def test_constrained_center_in_forbidden_ring():
    grid = Grid(np.array([[-3.0, 3.0], [-3.0, 3.0]]), (120, 120))
    mask = ring_mask(grid, 0.5, 10.0)  # disk around the center is forbidden
    f = DensityEstimate(np.array([[0.0, 0.0]]), np.array([1.0, 1.0]))
    p = point_estimate_constrained(f, mask)
    oracle = feasible_grid_argmax(f, mask)
    assert mask.is_feasible_point(p)
    # both land on the inner feasible boundary next to the forbidden disk
    assert np.linalg.norm(p) == pytest.approx(np.linalg.norm(oracle), abs=0.06)
    assert f.evaluate(p) >= f.evaluate(oracle) - 1e-12


def test_constrained_bimodal_taller_peak_forbidden():
    grid = Grid(np.array([[-4.0, 4.0], [-4.0, 4.0]]), (120, 120))
    centers = grid.all_centers()
    feasible = (centers[:, 0] > 0).reshape(grid.cells)  # left half forbidden
    mask = FeasibilityMask(grid, feasible)
    pts = np.array([[-2.0, 0.0]] * 3 + [[2.0, 0.0]])  # taller peak on the left
    f = DensityEstimate(pts, np.array([0.7, 0.7]))
    p = point_estimate_constrained(f, mask)
    oracle = feasible_grid_argmax(f, mask)
    assert p == pytest.approx([2.0, 0.0], abs=0.05)
    assert np.linalg.norm(p - oracle) < 0.1


def test_constrained_raises_when_support_infeasible():
    grid = Grid(np.array([[-10.0, 10.0], [-10.0, 10.0]]), (20, 20))
    centers = grid.all_centers()
    feasible = (centers[:, 0] > 5).reshape(grid.cells)
    mask = FeasibilityMask(grid, feasible)
    f = DensityEstimate(np.array([[-8.0, 0.0]]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        point_estimate_constrained(f, mask)


def test_config_validation():
    good = dict(epsilon=0.1, theta=1.0, dt=0.5, horizon=5.0)
    ForecastConfig(**good)
    for bad in (
        dict(good, epsilon=0.0),
        dict(good, theta=-0.1),
        dict(good, theta=2.5),
        dict(good, dt=0.0),
        dict(good, horizon=0.2),
        dict(good, alpha=1.0),
        dict(good, mc_samples=10),
        dict(good, sigma=0.0),
    ):
        with pytest.raises(ValueError):
            ForecastConfig(**bad)


def test_q_bar_ceiling():
    assert ForecastConfig(epsilon=1, theta=1, dt=0.5, horizon=10.0).n_steps == 20
    assert ForecastConfig(epsilon=1, theta=1, dt=0.3, horizon=1.0).n_steps == 4
    assert ForecastConfig(epsilon=1, theta=1, dt=15.0, horizon=10080.0).n_steps == 672
