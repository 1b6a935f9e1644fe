"""trackcast: forecasting of sparse, noisy, recurrent trajectories.

The library pools historical analogues of the current state, reconstructs
missing track segments with minimum-energy paths over a gridded cost field,
and emits, for each future timestep, a kernel density estimate, a point
prediction, and a highest-density uncertainty region.
"""

__version__ = "0.1.0"

from .energy import (
    DensePath,
    EnergyField,
    FeasibilityMask,
    Grid,
    MinEnergyPath,
    build_field,
    densify,
    full_mask,
    grid_over,
    min_energy_path,
    pheromone_sigmas,
)
from .forecast import (
    ForecastConfig,
    ForecastResult,
    ForecastStep,
    MatchSet,
    NoAnalogueError,
    assemble_kde_inputs,
    collect_start_points,
    extract_subtrajectories,
    point_estimate_constrained,
    run_forecast,
    step_rng,
)
from .geometry import (
    EARTH_RADIUS_NM,
    EUCLIDEAN,
    Metric,
    Trajectory,
    angle_distance,
    finite_difference_velocity,
)
from .hdr import HdrRegion, estimate_hdr, grid_extract
from .kde import DensityEstimate, build, scott_bandwidth
from .kernels import EPANECHNIKOV, GAUSSIAN, Kernel1D, as_bandwidth
from .metrics import (
    EvalReport,
    ape,
    error_acf,
    evaluate_forecast,
    integrated_error_fit,
    nearest_point_distance,
    pct_hdr,
)
from .synth import (
    LoiterSpec,
    LorenzSpec,
    downsample_with_interpolation,
    generate_loiter,
    generate_lorenz,
    loiter5_spec,
    loiter6_spec,
)

__all__ = [
    "__version__",
    "EARTH_RADIUS_NM",
    "EUCLIDEAN",
    "EPANECHNIKOV",
    "GAUSSIAN",
    "DensePath",
    "DensityEstimate",
    "EnergyField",
    "EvalReport",
    "FeasibilityMask",
    "ForecastConfig",
    "ForecastResult",
    "ForecastStep",
    "Grid",
    "HdrRegion",
    "Kernel1D",
    "LoiterSpec",
    "LorenzSpec",
    "MatchSet",
    "Metric",
    "MinEnergyPath",
    "NoAnalogueError",
    "Trajectory",
    "angle_distance",
    "ape",
    "as_bandwidth",
    "assemble_kde_inputs",
    "build",
    "build_field",
    "collect_start_points",
    "densify",
    "downsample_with_interpolation",
    "error_acf",
    "estimate_hdr",
    "evaluate_forecast",
    "extract_subtrajectories",
    "finite_difference_velocity",
    "full_mask",
    "generate_loiter",
    "generate_lorenz",
    "grid_extract",
    "grid_over",
    "integrated_error_fit",
    "loiter5_spec",
    "loiter6_spec",
    "min_energy_path",
    "nearest_point_distance",
    "pct_hdr",
    "pheromone_sigmas",
    "point_estimate_constrained",
    "run_forecast",
    "scott_bandwidth",
    "step_rng",
]
