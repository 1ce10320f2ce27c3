"""Command-line interface: thin shells over the library operations.

Angles are degrees at this boundary and radians inside the library. Exit
codes: 0 success, 2 flag/validation errors, 1 runtime failures. ``--json``
switches stdout to machine-readable JSON.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math

import click
import numpy as np

from . import bins as bins_mod
from . import dataset as dataset_mod
from . import horizon as horizon_mod
from . import perceptual as perceptual_mod
from . import pngio
from .camera import (
    Intrinsics,
    Orientation,
    effective_hfov,
    focal_from_fov,
    horizon_endpoints,
    horizon_midpoint,
    pitch_from_midpoint,
    xi_from_fov_focal,
)
from .errors import SpherecalError
from .undistort import TargetSpec, default_target, undistort as undistort_op


def lib_errors(f):
    """Map library failures to exit code 1 (validation stays 2)."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except click.ClickException:
            raise
        except (SpherecalError, OSError, ValueError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


def emit(payload: dict, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(payload))
    else:
        for key, value in payload.items():
            click.echo(f"{key}: {value}")


@click.group()
def cli() -> None:
    """Unified spherical camera toolkit."""


def _resolve_intrinsics(width, height, xi, focal_px, hfov_deg) -> Intrinsics:
    if width is None:
        raise click.UsageError("--width is required for this conversion")
    if height is None:
        height = width
    if xi is None:
        xi = 0.0
    if focal_px is None:
        if hfov_deg is None:
            raise click.UsageError("provide --focal-px or --hfov-deg")
        focal_px = focal_from_fov(math.radians(hfov_deg), xi, width / 2.0)
    return Intrinsics(focal_px, xi, (width, height))


@cli.command()
@click.option("--focal-px", type=float, default=None)
@click.option("--hfov-deg", type=float, default=None)
@click.option("--xi", type=float, default=None)
@click.option("--width", type=float, default=None)
@click.option("--height", type=float, default=None)
@click.option("--midpoint", type=float, default=None, help="Horizon midpoint, image units (top=+1).")
@click.option("--pitch-deg", type=float, default=None)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def params(focal_px, hfov_deg, xi, width, height, midpoint, pitch_deg, as_json):
    """Convert among focal length, field of view, distortion, horizon and pitch."""
    hfov_rad = math.radians(hfov_deg) if hfov_deg is not None else None
    if width is None:
        raise click.UsageError("--width is required")
    u0 = width / 2.0
    if xi is None and hfov_rad is not None and focal_px is not None:
        xi = xi_from_fov_focal(hfov_rad, focal_px, u0)
    if xi is None:
        xi = 0.0
    if focal_px is None and hfov_rad is not None:
        focal_px = focal_from_fov(hfov_rad, xi, u0)
    if focal_px is None:
        raise click.UsageError("provide --focal-px or --hfov-deg")
    intr = Intrinsics(focal_px, xi, (width, height if height is not None else width))
    if hfov_rad is None:
        hfov_rad = effective_hfov(intr)
    out = {
        "focal_px": focal_px,
        "hfov_deg": math.degrees(hfov_rad),
        "xi": xi,
        "width": width,
        "height": intr.height,
    }
    if pitch_deg is not None:
        out["midpoint_units"] = horizon_midpoint(
            Orientation(math.radians(pitch_deg), 0.0), intr
        )
        out["pitch_deg"] = pitch_deg
    elif midpoint is not None:
        out["pitch_deg"] = math.degrees(pitch_from_midpoint(midpoint, intr))
        out["midpoint_units"] = midpoint
    emit(out, as_json)


@cli.group()
def dataset() -> None:
    """Training-data generation from equirectangular panoramas."""


@dataset.command("generate")
@click.option("--panos", "pano_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--threads", type=int, default=None, envvar="CALIB_THREADS")
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def dataset_generate(pano_dir, out_dir, count, seed, config_path, threads, as_json):
    """Sample camera parameters and render labeled crops plus a manifest."""
    if count < 0:
        raise click.UsageError("--count must be >= 0")
    config = dataset_mod.SamplingConfig()
    if config_path:
        overrides = json.loads(open(config_path).read())
        known = {f.name for f in dataclasses.fields(dataset_mod.SamplingConfig)}
        bad = set(overrides) - known
        if bad:
            raise click.UsageError(f"unknown config keys: {sorted(bad)}")
        coerced = {}
        for key, val in overrides.items():
            if isinstance(val, list):
                val = tuple(tuple(v) if isinstance(v, list) else v for v in val)
            coerced[key] = val
        config = dataclasses.replace(config, **coerced)
    records = dataset_mod.generate_dataset(
        pano_dir, out_dir, config, count, seed, threads=threads
    )
    emit(
        {"crops": len(records), "manifest": f"{out_dir}/manifest.jsonl"},
        as_json,
    )


@cli.command("undistort")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--xi", type=float, required=True)
@click.option("--focal-px", type=float, default=None)
@click.option("--hfov-deg", type=float, default=None)
@click.option("--target-hfov-deg", type=float, default=None)
@click.option("--target-size", type=str, default=None, help="WxH, defaults to source size.")
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default="8")
@click.option("--threads", type=int, default=4, envvar="CALIB_THREADS")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def undistort_cmd(
    input_path, xi, focal_px, hfov_deg, target_hfov_deg, target_size,
    bit_depth, threads, out_path, as_json,
):
    """Rectify a distorted image to a pinhole view given (focal, xi)."""
    if (focal_px is None) == (hfov_deg is None):
        raise click.UsageError("provide exactly one of --focal-px / --hfov-deg")
    src = pngio.load_png(input_path)
    if focal_px is None:
        focal_px = focal_from_fov(math.radians(hfov_deg), xi, src.width / 2.0)
    intr = Intrinsics(focal_px, xi, (src.width, src.height))
    if target_size is not None:
        try:
            tw, th = (int(part) for part in target_size.lower().split("x"))
        except ValueError:
            raise click.UsageError("--target-size must look like 1024x768")
        size = (tw, th)
    else:
        size = (src.width, src.height)
    if target_hfov_deg is not None:
        target = TargetSpec(size=size, hfov_rad=math.radians(target_hfov_deg))
    elif target_size is None:
        target = default_target(intr)
    else:
        target = TargetSpec(size=size, focal_px=default_target(intr).focal_px)
    out = undistort_op(src, intr, target, threads=max(1, threads))
    pngio.save_png(out, out_path, bit_depth=int(bit_depth))
    emit(
        {
            "out": out_path,
            "target_focal_px": target.resolve_focal(),
            "target_width": target.size[0],
            "target_height": target.size[1],
        },
        as_json,
    )


@cli.group()
def horizon() -> None:
    """Horizon overlays, endpoints and retrieval."""


@horizon.command("draw")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--pitch-deg", type=float, default=0.0)
@click.option("--roll-deg", type=float, default=0.0)
@click.option("--xi", type=float, default=0.0)
@click.option("--focal-px", type=float, default=None)
@click.option("--hfov-deg", type=float, default=None)
@click.option("--thickness", type=float, default=2.0)
@click.option("--color", type=str, default="1,0.2,0.1", help="R,G,B in [0,1].")
@lib_errors
def horizon_draw(input_path, out_path, pitch_deg, roll_deg, xi, focal_px, hfov_deg, thickness, color):
    """Overlay the (possibly curved) horizon line onto an image."""
    img = pngio.load_png(input_path)
    intr = _resolve_intrinsics(float(img.width), float(img.height), xi, focal_px, hfov_deg)
    try:
        rgb = tuple(float(part) for part in color.split(","))
        if len(rgb) != 3:
            raise ValueError
    except ValueError:
        raise click.UsageError("--color must look like 1,0.2,0.1")
    out = horizon_mod.draw_horizon(
        img,
        Orientation(math.radians(pitch_deg), math.radians(roll_deg)),
        intr,
        color=rgb,
        thickness=thickness,
    )
    pngio.save_png(out, out_path)
    click.echo(f"wrote {out_path}")


@horizon.command("endpoints")
@click.option("--width", type=float, required=True)
@click.option("--height", type=float, required=True)
@click.option("--pitch-deg", type=float, default=0.0)
@click.option("--roll-deg", type=float, default=0.0)
@click.option("--xi", type=float, default=0.0)
@click.option("--focal-px", type=float, default=None)
@click.option("--hfov-deg", type=float, default=None)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def horizon_endpoints_cmd(width, height, pitch_deg, roll_deg, xi, focal_px, hfov_deg, as_json):
    """Horizon crossings at the left/right image boundaries (image units)."""
    intr = _resolve_intrinsics(width, height, xi, focal_px, hfov_deg)
    v_left, v_right = horizon_endpoints(
        Orientation(math.radians(pitch_deg), math.radians(roll_deg)), intr
    )
    emit({"v_left": v_left, "v_right": v_right}, as_json)


@horizon.command("index")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def horizon_index(manifest, out_path, as_json):
    """Build a horizon-feature retrieval index from a dataset manifest."""
    index, skipped = horizon_mod.build_index(dataset_mod.load_manifest(manifest))
    horizon_mod.save_index(index, out_path)
    payload = {"entries": len(index), "skipped": len(skipped), "out": out_path}
    if skipped:
        payload["skipped_ids"] = skipped
    emit(payload, as_json)


@horizon.command("retrieve")
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--v-left", type=float, default=None)
@click.option("--v-right", type=float, default=None)
@click.option("--width", type=float, default=None)
@click.option("--height", type=float, default=None)
@click.option("--pitch-deg", type=float, default=0.0)
@click.option("--roll-deg", type=float, default=0.0)
@click.option("--xi", type=float, default=0.0)
@click.option("--focal-px", type=float, default=None)
@click.option("--hfov-deg", type=float, default=None)
@click.option("-k", type=int, default=4)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def horizon_retrieve(
    index_path, v_left, v_right, width, height, pitch_deg, roll_deg, xi,
    focal_px, hfov_deg, k, as_json,
):
    """Query the index for the k nearest horizons (L2 feature distance)."""
    index = horizon_mod.load_index(index_path)
    if (v_left is None) != (v_right is None):
        raise click.UsageError("--v-left and --v-right go together")
    if v_left is None:
        intr = _resolve_intrinsics(width, height, xi, focal_px, hfov_deg)
        v_left, v_right = horizon_endpoints(
            Orientation(math.radians(pitch_deg), math.radians(roll_deg)), intr
        )
    matches = horizon_mod.query(index, (v_left, v_right), k)
    payload = {
        "query": {"v_left": v_left, "v_right": v_right},
        "matches": [{"id": mid, "distance": d} for mid, d in matches],
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        for m in payload["matches"]:
            click.echo(f"{m['id']}\t{m['distance']:.6g}")


@cli.group()
def perceptual() -> None:
    """Fit, evaluate and score the human-sensitivity measure."""


@perceptual.command("fit")
@click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--parameter", type=str, required=True)
@click.option("--surface", "surface_path", type=click.Path(dir_okay=False), required=True)
@click.option("--min-count", type=int, default=5)
@click.option("--value-range", type=(float, float), default=None)
@click.option("--error-range", type=(float, float), default=None)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def perceptual_fit(csv_path, parameter, surface_path, min_count, value_range, error_range, as_json):
    """Fit the 7x7 detection-rate surface from study judgments."""
    records = perceptual_mod.read_judgments(csv_path)
    surface = perceptual_mod.fit_surface(
        records, parameter, value_range, error_range, min_count
    )
    perceptual_mod.save_surface(surface, surface_path)
    emit(
        {
            "parameter": parameter,
            "cells_fitted": int(surface.mask.sum()),
            "records": sum(1 for r in records if r.parameter == parameter),
            "surface": surface_path,
        },
        as_json,
    )


@perceptual.command("eval")
@click.option("--surface", "surface_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--value", type=float, required=True)
@click.option("--error", type=float, required=True)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def perceptual_eval(surface_path, value, error, as_json):
    """Evaluate detectability of one (value, error) combination."""
    surface = perceptual_mod.load_surface(surface_path)
    detectability, degraded = perceptual_mod.evaluate_detailed(surface, value, error)
    emit({"detectability": detectability, "degraded": degraded}, as_json)


@perceptual.command("score")
@click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV with header parameter,gt_value,estimate.")
@click.option("--surface", "surface_paths", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def perceptual_score(csv_path, surface_paths, as_json):
    """Score a method's per-image estimates through fitted surfaces."""
    import csv as csv_lib

    surfaces = {}
    for path in surface_paths:
        s = perceptual_mod.load_surface(path)
        surfaces[s.parameter] = s
    estimates = []
    with open(csv_path, newline="") as fh:
        for row in csv_lib.DictReader(fh):
            estimates.append(
                (row["parameter"].strip(), float(row["gt_value"]), float(row["estimate"]))
            )
    summaries = perceptual_mod.score_method(surfaces, estimates)
    payload = {
        param: {"median": s.median, "q1": s.q1, "q3": s.q3, "mean": s.mean, "n": s.n}
        for param, s in summaries.items()
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        for param, s in payload.items():
            click.echo(
                f"{param}: median={s['median']:.4f} q1={s['q1']:.4f} "
                f"q3={s['q3']:.4f} mean={s['mean']:.4f} n={s['n']}"
            )


@cli.group("bins")
def bins_group() -> None:
    """Classification-bin layouts and target encodings."""


@bins_group.command("export")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--json", "as_json", is_flag=True)
@lib_errors
def bins_export(out_path, as_json):
    """Write the four head bin layouts as JSON (consumed by trainers)."""
    specs = bins_mod.default_bin_specs()
    bins_mod.save_bin_specs(specs, out_path)
    emit(
        {name: spec.n_bins for name, spec in specs.items()} | {"out": out_path},
        as_json,
    )


@bins_group.command("encode")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--bins", "bins_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--sigma", type=float, default=None, help="Smoothing sigma; default one bin width.")
@click.option("--limit", type=int, default=None)
@lib_errors
def bins_encode(manifest, bins_path, out_path, sigma, limit):
    """Encode manifest labels into head target distributions (golden file)."""
    specs = bins_mod.load_bin_specs(bins_path)
    records = dataset_mod.load_manifest(manifest)
    if limit is not None:
        records = records[:limit]
    with open(out_path, "w") as fh:
        for rec in records:
            values = {
                "roll": rec["roll_rad"],
                "midpoint": rec["midpoint_units"],
                "hfov": rec["hfov_rad"],
                "xi": rec["xi"],
            }
            targets = {}
            for name, value in values.items():
                dist = bins_mod.encode(value, specs[name], smoothing_sigma=sigma)
                targets[name] = {
                    "argmax": int(np.argmax(dist.probs)),
                    "probs": [format(p, ".17g") for p in dist.probs],
                }
            fh.write(json.dumps({"id": rec["id"], "targets": targets}) + "\n")
    click.echo(f"wrote {out_path} ({len(records)} records)")


def main() -> None:
    cli(prog_name="spherecal")


if __name__ == "__main__":
    main()
