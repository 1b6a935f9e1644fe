import numpy as np
import pytest
from scipy.optimize import brentq

from trackcast.hdr import HdrRegion, estimate_hdr, grid_extract
from trackcast.kde import DensityEstimate
from trackcast.kernels import EPANECHNIKOV


def single_1d():
    return DensityEstimate(np.array([[0.0]]), np.array([1.0]), EPANECHNIKOV)


def symmetric_half_width(alpha: float) -> float:
    """Oracle: the half-width a of {f >= c_alpha} for the unit Epanechnikov.

    The region is symmetric, [-a, a], and carries mass (3a - a^3) / 2; solve
    for the mass to equal 1 - alpha by root finding.
    """
    return brentq(lambda a: (3 * a - a**3) / 2 - (1 - alpha), 0.0, 1.0)


def test_oracle_half_width_value():
    assert symmetric_half_width(0.5) == pytest.approx(0.34730, abs=1e-5)


def test_estimate_hdr_symmetric_1d():
    f = single_1d()
    region = estimate_hdr(f, alpha=0.5, m=100_000, rng=np.random.default_rng(0))
    # boundary implied by the threshold: f(x) >= c iff |x| <= sqrt(1 - c/0.75)
    a_est = np.sqrt(1.0 - region.threshold / 0.75)
    assert a_est == pytest.approx(symmetric_half_width(0.5), abs=0.01)


def test_near_total_coverage_at_tiny_alpha():
    f = single_1d()
    rng = np.random.default_rng(1)
    region = estimate_hdr(f, alpha=0.001, m=100_000, rng=rng)
    fresh = f.draw(20_000, rng)
    assert region.contains_many(fresh).mean() >= 0.99


@pytest.mark.parametrize("alpha", [0.5, 0.7])
def test_mode_always_inside(alpha):
    rng = np.random.default_rng(2)
    centers = rng.uniform(-2, 2, size=(7, 2))
    f = DensityEstimate(centers, np.array([0.8, 0.8]))
    region = estimate_hdr(f, alpha=alpha, m=5_000, rng=rng)
    assert region.contains(f.mode())


def test_contains_cases():
    f = single_1d()
    rng = np.random.default_rng(3)
    region = estimate_hdr(f, alpha=0.5, m=50_000, rng=rng)
    assert region.contains([0.9]) is False  # 0.9 > 0.347 boundary
    assert region.contains([5.0]) is False  # outside the kernel support
    assert region.contains(f.mode())


def test_parameter_validation():
    f = single_1d()
    rng = np.random.default_rng(0)
    for alpha in (0.0, 1.0, -0.3, 2.0):
        with pytest.raises(ValueError):
            estimate_hdr(f, alpha=alpha, m=1000, rng=rng)
    with pytest.raises(ValueError):
        estimate_hdr(f, alpha=0.5, m=50, rng=rng)


def test_calibration_fresh_sample():
    rng = np.random.default_rng(4)
    centers = rng.normal(size=(40, 2))
    f = DensityEstimate(centers, np.array([0.6, 0.6]))
    for alpha in (0.3, 0.7):
        region = estimate_hdr(f, alpha=alpha, m=10_000, rng=np.random.default_rng(5))
        fresh = f.draw(10_000, np.random.default_rng(6))
        coverage = region.contains_many(fresh).mean()
        assert coverage == pytest.approx(1 - alpha, abs=0.03)


def test_threshold_monotone_in_alpha():
    rng_centers = np.random.default_rng(7)
    f = DensityEstimate(rng_centers.normal(size=(25, 2)), np.array([0.7, 0.7]))
    thresholds = [
        estimate_hdr(f, alpha=a, m=5_000, rng=np.random.default_rng(8)).threshold
        for a in (0.1, 0.3, 0.5, 0.7, 0.9)
    ]
    assert all(t1 <= t2 for t1, t2 in zip(thresholds, thresholds[1:]))


def test_determinism_bit_for_bit():
    f = single_1d()
    r1 = estimate_hdr(f, alpha=0.4, m=5_000, rng=np.random.default_rng(99))
    r2 = estimate_hdr(f, alpha=0.4, m=5_000, rng=np.random.default_rng(99))
    assert r1.threshold == r2.threshold


def test_grid_extract_empty_above_max():
    f = single_1d()
    region = HdrRegion(threshold=1.0, alpha=0.5, source=f, mc_samples=0)  # max is 0.75
    _, flags = grid_extract(region, np.array([[-2.0, 2.0]]), [100])
    assert not flags.any()


def test_grid_extract_full_coverage_at_tiny_alpha():
    f = single_1d()
    region = estimate_hdr(f, alpha=0.001, m=100_000, rng=np.random.default_rng(10))
    axes, flags = grid_extract(region, np.array([[-1.0, 1.0]]), [500])
    positive = f.evaluate_many(axes[0][:, None]) > region.threshold
    # cells flagged are exactly the cells whose center clears the threshold
    assert np.array_equal(flags, f.evaluate_many(axes[0][:, None]) >= region.threshold)
    assert flags.sum() >= 0.95 * positive.sum()


def test_grid_extract_symmetric_span():
    f = single_1d()
    region = estimate_hdr(f, alpha=0.5, m=100_000, rng=np.random.default_rng(11))
    axes, flags = grid_extract(region, np.array([[-1.0, 1.0]]), [2001])
    span = axes[0][flags]
    a = symmetric_half_width(0.5)
    assert span.min() == pytest.approx(-a, abs=0.02)
    assert span.max() == pytest.approx(a, abs=0.02)


def test_grid_extract_validation():
    f = single_1d()
    region = estimate_hdr(f, alpha=0.5, m=1000, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        grid_extract(region, np.array([[1.0, -1.0]]), [10])
    with pytest.raises(ValueError):
        grid_extract(region, np.array([[-1.0, 1.0]]), [1])
