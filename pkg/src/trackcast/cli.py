"""Command-line interface: synth, forecast, eval, and density subcommands.

Any flag can also be supplied through ``--config FILE``, a flat
``key = value`` text file ('#' starts a comment); flags override the file,
and unknown keys are rejected.  Exit codes: 0 success, 2 configuration
error, 3 data error, 4 no analogues found.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .energy import FeasibilityMask
from .fileio import (
    DataFileError,
    atomic_write_text,
    fmt,
    read_forecast_dir,
    read_mask,
    read_trajectory,
    write_forecast_dir,
    write_meta,
    write_density_grid,
    write_region_grid,
    write_trajectory,
)
from .forecast import ForecastConfig, NoAnalogueError, run_forecast
from .geometry import Metric
from .hdr import estimate_hdr, grid_extract
from .kernels import Kernel1D
from .metrics import evaluate_forecast
from .synth import (
    LorenzSpec,
    generate_loiter,
    generate_lorenz,
    loiter5_spec,
    loiter6_spec,
)

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NO_ANALOGUE = 4


class ConfigError(ValueError):
    pass


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def load_config_file(path: Path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill parser defaults from the config file; explicit flags win."""
    if getattr(args, "config", None) is None:
        return
    file_values = load_config_file(args.config)
    known = {
        action.dest: action
        for action in parser._actions
        if action.dest not in ("help", "config")
    }
    unknown = sorted(set(file_values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    explicit = {
        action.dest
        for action in parser._actions
        if any(opt in sys.argv for opt in action.option_strings)
    }
    for key, raw in file_values.items():
        if key in explicit:
            continue
        action = known[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key}: {exc}") from exc
        else:
            value = raw
        setattr(args, key, value)


def _validate_forecast_args(args) -> None:
    if args.epsilon is None or not args.epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {args.epsilon}")
    if args.theta is None or not 0.0 <= args.theta <= 2.0:
        raise ConfigError(f"theta must be in [0, 2], got {args.theta}")
    if args.dt is None or not args.dt > 0:
        raise ConfigError(f"dt must be > 0, got {args.dt}")
    if args.horizon is None or args.horizon < args.dt:
        raise ConfigError(f"horizon must be >= dt, got horizon={args.horizon} dt={args.dt}")
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {args.alpha}")


def _metric_from_args(args) -> Metric:
    if args.metric == "haversine":
        return Metric("haversine", args.radius)
    return Metric("euclidean")


# -- synth ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "lorenz":
        spec = LorenzSpec(
            sigma=args.lorenz_sigma,
            rho=args.rho,
            beta=args.beta,
            x0=tuple(_parse_floats(args.x0)),
            dt=args.gen_dt,
            steps=args.n_points,
            noise_sigma=args.noise_sigma,
        )
        noisy, clean = generate_lorenz(spec, rng)
        params = {
            "kind": "lorenz",
            "sigma": spec.sigma,
            "rho": spec.rho,
            "beta": spec.beta,
            "x0": list(spec.x0),
            "dt": spec.dt,
            "steps": spec.steps,
            "noise_sigma": spec.noise_sigma,
        }
    else:
        maker = loiter6_spec if args.kind == "loiter6" else loiter5_spec
        spec = maker(
            speed=args.speed,
            dwell=args.dwell_steps,
            step_dt=args.gen_dt if args.gen_dt is not None else 0.1,
            noise_sigma=args.noise_sigma,
            n_points=args.n_points,
        )
        noisy, clean = generate_loiter(spec, rng)
        params = {
            "kind": args.kind,
            "loiter_points": spec.loiter_points.tolist(),
            "transition": spec.transition.tolist(),
            "dwell_steps": spec.dwell_steps.tolist(),
            "speed": spec.speed,
            "step_dt": spec.step_dt,
            "noise_sigma": spec.noise_sigma,
            "n_points": spec.n_points,
        }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory(out / "noisy.csv", noisy)
    write_trajectory(out / "clean.csv", clean)
    write_meta(out / "meta.json", {"command": "synth", "seed": args.seed, "config": params})
    print(f"wrote {len(noisy)} points (d={noisy.dimension}) to {out}/noisy.csv and clean.csv")
    return 0


# -- forecast --------------------------------------------------------------------


def _forecast_config(args, dimension: int, mask: FeasibilityMask | None) -> ForecastConfig:
    bandwidth = None
    if args.bandwidth is not None:
        values = _parse_floats(args.bandwidth)
        bandwidth = np.asarray(values if len(values) > 1 else values * dimension)
    try:
        return ForecastConfig(
            epsilon=args.epsilon,
            theta=args.theta,
            dt=args.dt,
            horizon=args.horizon,
            alpha=args.alpha,
            bandwidth=bandwidth,
            kernel=Kernel1D(args.kernel),
            lagrangian=args.lagrangian,
            sigma=args.sigma,
            pheromone_rate=args.pheromone_rate,
            metric=_metric_from_args(args),
            mask=mask,
            seed=args.seed,
            mc_samples=args.mc_samples,
            grid_cells=args.grid_cells,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_forecast(args) -> int:
    _validate_forecast_args(args)
    traj, metric_from_file = read_trajectory(args.input)
    mask = read_mask(args.mask) if args.mask else None
    if args.metric is None:
        args.metric = metric_from_file.kind
        args.radius = metric_from_file.radius
    cfg = _forecast_config(args, traj.dimension, mask)
    try:
        result = run_forecast(traj, cfg)
    except NoAnalogueError as exc:
        print(f"stage 1: {exc}", file=sys.stderr)
        return EXIT_NO_ANALOGUE

    present = [s for s in result.steps if not s.absent]
    if present:
        bandwidth = present[0].density.bandwidth
    else:
        bandwidth = cfg.bandwidth if cfg.bandwidth is not None else np.ones(traj.dimension)
    config_payload = {
        "input": str(args.input),
        "epsilon": cfg.epsilon,
        "theta": cfg.theta,
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "alpha": cfg.alpha,
        "bandwidth": [float(h) for h in bandwidth],
        "kernel": cfg.kernel.family,
        "lagrangian": cfg.lagrangian,
        "sigma": cfg.sigma,
        "pheromone_rate": cfg.pheromone_rate,
        "metric": cfg.metric.kind,
        "radius": cfg.metric.radius,
        "mask": str(args.mask) if args.mask else None,
        "mc_samples": cfg.mc_samples,
        "grid_cells": cfg.grid_cells,
        "match_indices": [int(i) for i in result.matches.indices],
    }
    out = Path(args.out)
    write_forecast_dir(
        out,
        result.steps,
        dimension=traj.dimension,
        t_last=result.t_last,
        dt=cfg.dt,
        alpha=cfg.alpha,
        bandwidth=bandwidth,
        kernel=cfg.kernel,
        meta={"command": "forecast", "seed": cfg.seed, "config": config_payload},
    )
    if args.export_grids:
        _export_step_grids(out, present, args.grid_resolution)
    if args.figures:
        from .plots import render_forecast_figure

        render_forecast_figure(out / "forecast.png", traj, result.steps)
    n_absent = sum(s.absent for s in result.steps)
    print(
        f"forecast: {len(result.steps)} steps ({n_absent} absent), "
        f"{len(result.matches)} analogue(s), written to {out}"
    )
    return 0


def _export_step_grids(out: Path, steps, resolution: int) -> None:
    grids = out / "grids"
    grids.mkdir(parents=True, exist_ok=True)
    for s in steps:
        box = s.density.support_box()
        res = [resolution] * s.density.dimension
        axes, flags = grid_extract(s.region, box, res)
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.column_stack([m.reshape(-1) for m in mesh])
        values = s.density.evaluate_many(centers).reshape(flags.shape)
        write_density_grid(grids / f"step_{s.step:04d}_density.txt", axes, values)
        write_region_grid(grids / f"step_{s.step:04d}_hdr.txt", axes, flags)


# -- eval ------------------------------------------------------------------------


def cmd_eval(args) -> int:
    truth, metric = read_trajectory(args.truth)
    steps, meta = read_forecast_dir(args.forecast)
    report = evaluate_forecast(truth, steps, metric, max_lag=args.max_lag)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lines = [
        f"steps = {len(steps)}",
        f"evaluable_steps = {int(np.sum(~np.isnan(report.ape)))}",
        f"ape_mean = {fmt(report.ape_mean)}",
        f"ape_std = {fmt(report.ape_std)}",
        f"pct_hdr = {fmt(report.pct_hdr)}",
        f"integrated_error_slope = {fmt(report.integrated_error_slope)}",
        f"slope_fit_r2 = {fmt(report.slope_fit_r2)}",
    ]
    atomic_write_text(out / "report.txt", "\n".join(lines) + "\n")

    rows = ["# eval columns=step,t,ape,in_hdr,nearest_dist"]
    for k, s in enumerate(steps):
        in_hdr = report.in_hdr[k]
        rows.append(
            ",".join(
                [
                    str(s.step),
                    fmt(s.time),
                    fmt(report.ape[k]),
                    "" if in_hdr is None else str(int(in_hdr)),
                    fmt(report.nearest_dist[k]),
                ]
            )
        )
    atomic_write_text(out / "steps.csv", "\n".join(rows) + "\n")

    acf_rows = ["# acf columns=lag,value,significant"]
    for lag, value, significant in report.acf:
        acf_rows.append(f"{lag},{fmt(value)},{int(significant)}")
    atomic_write_text(out / "acf.csv", "\n".join(acf_rows) + "\n")

    write_meta(
        out / "meta.json",
        {
            "command": "eval",
            "config": {
                "truth": str(args.truth),
                "forecast": str(args.forecast),
                "max_lag": args.max_lag,
            },
        },
    )
    if args.figures:
        from .plots import render_eval_figures

        render_eval_figures(out, report)
    print(
        f"eval: ape_mean={report.ape_mean:.6g} ape_std={report.ape_std:.6g} "
        f"pct_hdr={report.pct_hdr:.4g} -> {out}"
    )
    return 0


# -- density ---------------------------------------------------------------------


def cmd_density(args) -> int:
    steps, meta = read_forecast_dir(args.forecast)
    chosen = [s for s in steps if s.step == args.step]
    if not chosen or chosen[0].absent:
        raise DataFileError(f"step {args.step} is missing or absent in {args.forecast}")
    step = chosen[0]
    density = step.density

    if args.box:
        bounds = _parse_floats(args.box)
        if len(bounds) != 2 * density.dimension:
            raise ConfigError(
                f"box needs {2 * density.dimension} numbers for d={density.dimension}"
            )
        box = np.asarray(bounds).reshape(density.dimension, 2)
    else:
        box = density.support_box()
    res_values = (
        [int(v) for v in _parse_floats(args.resolution)]
        if args.resolution
        else [200] * density.dimension
    )
    if len(res_values) == 1:
        res_values = res_values * density.dimension
    if len(res_values) != density.dimension or min(res_values) < 2:
        raise ConfigError("resolution needs >= 2 cells per axis")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    axes, flags = grid_extract(step.region, box, res_values)
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.column_stack([m.reshape(-1) for m in mesh])
    values = density.evaluate_many(centers).reshape(flags.shape)
    write_density_grid(out / f"step_{args.step:04d}_density.txt", axes, values)
    write_region_grid(out / f"step_{args.step:04d}_hdr.txt", axes, flags)

    alphas = _parse_floats(args.alpha_sweep) if args.alpha_sweep else []
    if alphas:
        seed = meta.get("seed", 0)
        from .forecast import step_rng

        for a in alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha sweep values must be in (0, 1), got {a}")
            region = estimate_hdr(density, a, max(step.region.mc_samples, 10_000), step_rng(seed, step.step))
            _, sweep_flags = grid_extract(region, box, res_values)
            write_region_grid(out / f"step_{args.step:04d}_hdr_alpha{a:g}.txt", axes, sweep_flags)

    if args.figures:
        from .plots import render_density_figure

        render_density_figure(
            out / f"step_{args.step:04d}_density.png",
            axes,
            values,
            flags,
            density.centers,
            step.prediction,
        )
    print(f"density: step {args.step} grids written to {out}")
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackcast",
        description="Forecast sparse, noisy, recurrent trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic clean + noisy histories")
    p_synth.add_argument("--config", type=Path)
    p_synth.add_argument("--kind", choices=["loiter6", "loiter5", "lorenz"], default="loiter6")
    p_synth.add_argument("--out", type=Path, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--n-points", type=int, default=None)
    p_synth.add_argument("--noise-sigma", type=float, default=None)
    p_synth.add_argument("--gen-dt", type=float, default=None, help="sample spacing (loiter) or integrator step (lorenz)")
    p_synth.add_argument("--speed", type=float, default=2.0)
    p_synth.add_argument("--dwell-steps", type=int, default=8)
    p_synth.add_argument("--lorenz-sigma", type=float, default=10.0)
    p_synth.add_argument("--rho", type=float, default=28.0)
    p_synth.add_argument("--beta", type=float, default=8.0 / 3.0)
    p_synth.add_argument("--x0", type=str, default="1,1,1")
    p_synth.set_defaults(func=cmd_synth)

    p_fore = sub.add_parser("forecast", help="run the forecaster on a trajectory file")
    p_fore.add_argument("--config", type=Path)
    p_fore.add_argument("--input", type=Path, required=True)
    p_fore.add_argument("--out", type=Path, required=True)
    p_fore.add_argument("--epsilon", type=float)
    p_fore.add_argument("--theta", type=float, default=1.0)
    p_fore.add_argument("--dt", type=float)
    p_fore.add_argument("--horizon", type=float)
    p_fore.add_argument("--alpha", type=float, default=0.3)
    p_fore.add_argument("--bandwidth", type=str, default=None, help="comma-separated per-axis values, or one value for all axes")
    p_fore.add_argument("--kernel", choices=["epanechnikov", "gaussian"], default="epanechnikov")
    p_fore.add_argument("--lagrangian", choices=["least_squares", "gaussian_wells"], default="least_squares")
    p_fore.add_argument("--sigma", type=float, default=1.0)
    p_fore.add_argument("--pheromone-rate", type=float, default=0.0)
    p_fore.add_argument("--metric", choices=["euclidean", "haversine"], default=None)
    p_fore.add_argument("--radius", type=float, default=Metric("haversine").radius)
    p_fore.add_argument("--mask", type=Path, default=None)
    p_fore.add_argument("--seed", type=int, default=0)
    p_fore.add_argument("--mc-samples", type=int, default=10_000)
    p_fore.add_argument("--grid-cells", type=int, default=200)
    p_fore.add_argument("--export-grids", action="store_true")
    p_fore.add_argument("--grid-resolution", type=int, default=100)
    p_fore.add_argument("--no-figures", dest="figures", action="store_false")
    p_fore.set_defaults(func=cmd_forecast, figures=True)

    p_eval = sub.add_parser("eval", help="evaluate a forecast directory against a truth file")
    p_eval.add_argument("--config", type=Path)
    p_eval.add_argument("--truth", type=Path, required=True)
    p_eval.add_argument("--forecast", type=Path, required=True)
    p_eval.add_argument("--out", type=Path, required=True)
    p_eval.add_argument("--max-lag", type=int, default=None)
    p_eval.add_argument("--no-figures", dest="figures", action="store_false")
    p_eval.set_defaults(func=cmd_eval, figures=True)

    p_dens = sub.add_parser("density", help="export density and HDR grids for one step")
    p_dens.add_argument("--config", type=Path)
    p_dens.add_argument("--forecast", type=Path, required=True)
    p_dens.add_argument("--step", type=int, required=True)
    p_dens.add_argument("--out", type=Path, required=True)
    p_dens.add_argument("--box", type=str, default=None, help="comma-separated per-axis min,max pairs")
    p_dens.add_argument("--resolution", type=str, default=None)
    p_dens.add_argument("--alpha-sweep", type=str, default=None, help="comma-separated alphas for nested region files")
    p_dens.add_argument("--no-figures", dest="figures", action="store_false")
    p_dens.set_defaults(func=cmd_density, figures=True)

    return parser


_SYNTH_DEFAULTS = {"n_points": {"lorenz": 30_000, "loiter6": 10_000, "loiter5": 10_000},
                   "noise_sigma": {"lorenz": 1.0, "loiter6": 0.05, "loiter5": 0.05},
                   "gen_dt": {"lorenz": 0.01, "loiter6": 0.1, "loiter5": 0.1}}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sub_parser = next(
            p for p in parser._subparsers._group_actions[0].choices.values()
            if p.get_default("func") is args.func
        )
        _apply_config_file(args, sub_parser)
        if args.command == "synth":
            for key, per_kind in _SYNTH_DEFAULTS.items():
                if getattr(args, key) is None:
                    setattr(args, key, per_kind[args.kind])
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFileError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
