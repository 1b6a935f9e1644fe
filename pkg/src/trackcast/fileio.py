"""Plain-text file formats and atomic writes.

All data files are CSV (or space-separated grids) with a one-line ``#``
schema header of ``key=value`` tokens.  Floats are written with 17
significant digits so write-then-read round-trips reproduce values exactly.
Every file is written atomically (temp file + rename), and every run writes
a JSON metadata sidecar carrying its parameters, seed, and a config hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .energy import FeasibilityMask, Grid
from .forecast import ForecastStep
from .geometry import EUCLIDEAN, Metric, Trajectory
from .hdr import HdrRegion
from .kde import DensityEstimate
from .kernels import Kernel1D, as_bandwidth


class DataFileError(ValueError):
    """Raised for malformed or inconsistent data files."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _parse_header(line: str, expected: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise DataFileError(f"missing schema header (expected '# {expected} ...')")
    tokens = line[1:].split()
    if not tokens or tokens[0] != expected:
        raise DataFileError(f"expected a {expected!r} file, got {tokens[:1]}")
    fields = {}
    for tok in tokens[1:]:
        if "=" in tok:
            key, val = tok.split("=", 1)
            fields[key] = val
    return fields


def _metric_tokens(metric: Metric) -> str:
    if metric.kind == "haversine":
        return f"metric=haversine radius={fmt(metric.radius)}"
    return "metric=euclidean"


def _metric_from(fields: dict[str, str]) -> Metric:
    kind = fields.get("metric", "euclidean")
    if kind == "haversine":
        return Metric("haversine", float(fields.get("radius", Metric("haversine").radius)))
    return Metric("euclidean")


# -- trajectories -------------------------------------------------------------


def write_trajectory(path, traj: Trajectory, metric: Metric = EUCLIDEAN) -> None:
    d = traj.dimension
    names = ["lat", "lon"] if metric.kind == "haversine" else [f"x{j + 1}" for j in range(d)]
    header = (
        f"# trajectory d={d} {_metric_tokens(metric)} columns=t,{','.join(names)}\n"
    )
    rows = [
        ",".join([fmt(t)] + [fmt(v) for v in x])
        for t, x in zip(traj.times, traj.positions)
    ]
    atomic_write_text(Path(path), header + "\n".join(rows) + "\n")


def read_trajectory(path) -> tuple[Trajectory, Metric]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFileError(f"{path}: empty file")
    fields = _parse_header(lines[0], "trajectory")
    d = int(fields["d"])
    metric = _metric_from(fields)
    data = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise DataFileError(f"{path}:{ln}: expected {d + 1} columns, got {len(parts)}")
        data.append([float(v) for v in parts])
    if not data:
        raise DataFileError(f"{path}: no data rows")
    arr = np.asarray(data)
    try:
        traj = Trajectory(arr[:, 0], arr[:, 1:])
    except ValueError as exc:
        raise DataFileError(f"{path}: {exc}") from exc
    return traj, metric


# -- feasibility masks ---------------------------------------------------------


def write_mask(path, mask: FeasibilityMask) -> None:
    cells = ",".join(str(c) for c in mask.grid.cells)
    box = ",".join(fmt(v) for v in mask.grid.box.reshape(-1))
    header = f"# mask d={mask.grid.dimension} cells={cells} box={box}\n"
    flat = mask.feasible.astype(int).reshape(-1, mask.grid.cells[-1])
    body = "\n".join(" ".join(str(v) for v in row) for row in flat)
    atomic_write_text(Path(path), header + body + "\n")


def read_mask(path) -> FeasibilityMask:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFileError(f"{path}: empty file")
    fields = _parse_header(lines[0], "mask")
    cells = tuple(int(c) for c in fields["cells"].split(","))
    box = np.asarray([float(v) for v in fields["box"].split(",")]).reshape(-1, 2)
    values = []
    for line in lines[1:]:
        if line.strip():
            values.extend(int(v) for v in line.split())
    expected = int(np.prod(cells))
    if len(values) != expected:
        raise DataFileError(f"{path}: expected {expected} cells, got {len(values)}")
    try:
        return FeasibilityMask(Grid(box, cells), np.asarray(values, bool).reshape(cells))
    except ValueError as exc:
        raise DataFileError(f"{path}: {exc}") from exc


# -- forecast artifacts ---------------------------------------------------------

ABSENT = "absent"


def write_forecast_dir(
    out_dir,
    steps: list[ForecastStep],
    *,
    dimension: int,
    t_last: float,
    dt: float,
    alpha: float,
    bandwidth: np.ndarray,
    kernel: Kernel1D,
    meta: dict,
) -> None:
    """Write forecast.csv, supports.csv, and meta.json into ``out_dir``.

    forecast.csv rows are ``step,t,coords...,c_alpha,support_count``; absent
    steps are written as ``step,t,absent``.  supports.csv holds the KDE
    centers of every present step so densities and regions can be rebuilt.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coord_names = ",".join(f"x{j + 1}" for j in range(dimension))
    fore = [
        f"# forecast d={dimension} q={len(steps)} t0={fmt(t_last)} dt={fmt(dt)} "
        f"alpha={fmt(alpha)} kernel={kernel.family} "
        f"bandwidth={','.join(fmt(h) for h in bandwidth)} "
        f"columns=step,t,{coord_names},c_alpha,support_count"
    ]
    sup = [f"# supports d={dimension} columns=step,{coord_names}"]
    for s in steps:
        if s.absent:
            fore.append(f"{s.step},{fmt(s.time)},{ABSENT}")
            continue
        coords = ",".join(fmt(v) for v in s.prediction)
        fore.append(
            f"{s.step},{fmt(s.time)},{coords},{fmt(s.region.threshold)},{s.support_count}"
        )
        for row in s.density.centers:
            sup.append(f"{s.step}," + ",".join(fmt(v) for v in row))
    atomic_write_text(out / "forecast.csv", "\n".join(fore) + "\n")
    atomic_write_text(out / "supports.csv", "\n".join(sup) + "\n")
    write_meta(out / "meta.json", meta)


def read_forecast_dir(in_dir) -> tuple[list[ForecastStep], dict]:
    """Rebuild ForecastSteps (densities and regions included) from a forecast dir."""
    in_dir = Path(in_dir)
    lines = (in_dir / "forecast.csv").read_text().splitlines()
    fields = _parse_header(lines[0], "forecast")
    d = int(fields["d"])
    alpha = float(fields["alpha"])
    kernel = Kernel1D(fields.get("kernel", "epanechnikov"))
    bandwidth = as_bandwidth([float(v) for v in fields["bandwidth"].split(",")], d)

    sup_lines = (in_dir / "supports.csv").read_text().splitlines()
    _parse_header(sup_lines[0], "supports")
    centers: dict[int, list[list[float]]] = {}
    for line in sup_lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        centers.setdefault(int(parts[0]), []).append([float(v) for v in parts[1:]])

    steps: list[ForecastStep] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        step = int(parts[0])
        t = float(parts[1])
        if parts[2] == ABSENT:
            steps.append(ForecastStep(step, t, None, None, None, 0))
            continue
        if len(parts) != d + 4:
            raise DataFileError(f"forecast.csv: expected {d + 4} columns, got {len(parts)}")
        prediction = np.asarray([float(v) for v in parts[2 : 2 + d]])
        threshold = float(parts[2 + d])
        support_count = int(parts[3 + d])
        if step not in centers:
            raise DataFileError(f"supports.csv: no centers for step {step}")
        density = DensityEstimate(np.asarray(centers[step]), bandwidth, kernel)
        region = HdrRegion(threshold, alpha, density, 0)
        steps.append(ForecastStep(step, t, prediction, density, region, support_count))
    meta_path = in_dir / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return steps, meta


# -- grids ---------------------------------------------------------------------


def write_density_grid(path, axes: list[np.ndarray], values: np.ndarray) -> None:
    """Rows of ``x_1 ... x_d density`` over the cartesian grid, C order."""
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.column_stack([m.reshape(-1) for m in mesh])
    flat = np.asarray(values).reshape(-1)
    rows = [
        " ".join(fmt(v) for v in coords[i]) + " " + fmt(flat[i]) for i in range(len(flat))
    ]
    atomic_write_text(Path(path), "\n".join(rows) + "\n")


def write_region_grid(path, axes: list[np.ndarray], flags: np.ndarray) -> None:
    """Rows of ``cell_center_coords... in_region{0,1}``, C order."""
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.column_stack([m.reshape(-1) for m in mesh])
    flat = np.asarray(flags).reshape(-1).astype(int)
    rows = [
        " ".join(fmt(v) for v in coords[i]) + f" {flat[i]}" for i in range(len(flat))
    ]
    atomic_write_text(Path(path), "\n".join(rows) + "\n")


# -- metadata sidecars -----------------------------------------------------------


def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_meta(path, payload: dict) -> None:
    body = dict(payload)
    body["version"] = __version__
    body["config_sha256"] = config_hash(payload.get("config", {}))
    atomic_write_text(Path(path), json.dumps(body, sort_keys=True, indent=2) + "\n")
