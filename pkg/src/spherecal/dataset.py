"""Labeled crop synthesis from equirectangular panoramas.

Camera parameters for each crop are drawn from fixed distributions (wide
focal spread, horizon near but above center, mostly-level roll, long-tail
distortion), the crop is rendered through the spherical model by inverse
mapping into the panorama, and the ground-truth label is emitted alongside.

Focal lengths are sampled in millimeters and converted through the
35mm-equivalent rule (horizontal sensor width 36mm):
``f_px = f_mm / 36 * render_width``. Since the principal point sits at
``render_width / 2``, the resulting field of view depends only on
``(f_mm, xi)`` and is aspect-independent.

Labels live in the pre-resize render frame; the final resize to the network
input size never alters them. Each crop owns a counter-based RNG stream
keyed by ``(seed, pano_id, crop_index)`` so generation parallelizes without
ordering effects, and the JSONL manifest is byte-identical across runs with
the same seed.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels, pngio
from .camera import (
    Intrinsics,
    Orientation,
    backproject,
    effective_hfov,
    focal_from_fov,
    horizon_midpoint,
    pitch_from_midpoint,
    rot_x,
    rot_y,
    rot_z,
)
from .errors import BadPanoramaAspect, NoValidPitch, SamplingExhausted
from .warp import Image, InverseMap, remap, scale_map

ASPECT_RATIOS = {"1:1": 1.0, "5:4": 5 / 4, "4:3": 4 / 3, "3:2": 3 / 2, "16:9": 16 / 9}

# 35mm-equivalent horizontal sensor width used for the mm -> px conversion.
SENSOR_WIDTH_MM = 36.0

MANIFEST_FIELDS = (
    "id",
    "file",
    "pano_id",
    "pitch_rad",
    "roll_rad",
    "yaw_rad",
    "hfov_rad",
    "xi",
    "focal_px",
    "midpoint_units",
    "aspect",
    "seed",
    "split",
)


@dataclass(frozen=True)
class SamplingConfig:
    """Distribution parameters for crop sampling.

    ``focal_mm_mean`` / ``focal_mm_std`` describe the lognormal focal
    distribution by its own mean and standard deviation (moment matching),
    truncated to ``focal_mm_range``. Roll is a two-component Cauchy mixture
    truncated to [-pi/2, pi/2]; distortion is a two-mode triangular mixture
    on [0, 1]; the horizon midpoint is normal in normalized image units.
    Weights are normalized on access.
    """

    focal_mm_mean: float = 14.0
    focal_mm_std: float = 16.0
    focal_mm_range: tuple[float, float] = (8.0, 400.0)
    horizon_mean: float = 0.523
    horizon_std: float = 0.3
    roll_gammas: tuple[float, ...] = (0.001, 0.1)
    roll_weights: tuple[float, ...] = (0.33, 0.66)
    xi_modes: tuple[float, ...] = (0.03, 0.0)
    xi_weights: tuple[float, ...] = (0.8, 0.2)
    aspect_weights: tuple[tuple[str, float], ...] = (
        ("1:1", 0.1),
        ("5:4", 0.1),
        ("4:3", 0.6),
        ("3:2", 0.1),
        ("16:9", 0.1),
    )
    hfov_range: tuple[float, float] = (0.33, 2.6)
    midpoint_range: tuple[float, float] = (-1.6, 1.6)
    crops_per_pano: int = 7
    base_height: int = 224
    output_size: tuple[int, int] = (224, 224)
    split_fractions: tuple[float, float, float] = (0.90, 0.01, 0.09)
    max_retries: int = 1000

    def normalized_roll_weights(self) -> np.ndarray:
        w = np.asarray(self.roll_weights, dtype=np.float64)
        return w / w.sum()

    def normalized_xi_weights(self) -> np.ndarray:
        w = np.asarray(self.xi_weights, dtype=np.float64)
        return w / w.sum()

    def normalized_aspect_weights(self) -> tuple[tuple[str, ...], np.ndarray]:
        names = tuple(n for n, _ in self.aspect_weights)
        w = np.asarray([x for _, x in self.aspect_weights], dtype=np.float64)
        return names, w / w.sum()

    def lognormal_params(self) -> tuple[float, float]:
        """(mu, sigma) of the underlying normal, moment-matched."""
        m, s = self.focal_mm_mean, self.focal_mm_std
        sigma2 = math.log(1.0 + (s / m) ** 2)
        return math.log(m) - sigma2 / 2.0, math.sqrt(sigma2)

    def render_size(self, aspect: str) -> tuple[int, int]:
        ratio = ASPECT_RATIOS[aspect]
        return int(round(self.base_height * ratio)), self.base_height


@dataclass(frozen=True)
class CropSpec:
    """Sampled camera parameters for one training crop."""

    pano_id: str
    yaw_rad: float
    pitch_rad: float
    roll_rad: float
    hfov_rad: float
    xi: float
    aspect_ratio: str
    render_size: tuple[int, int]
    seed: int


@dataclass(frozen=True)
class CropLabel:
    """Ground-truth record for one crop, in the pre-resize frame."""

    roll_rad: float
    midpoint_units: float
    hfov_rad: float
    xi: float
    focal_px: float
    pitch_rad: float


def crop_intrinsics(spec: CropSpec) -> Intrinsics:
    w, h = spec.render_size
    return Intrinsics(
        focal_px=focal_from_fov(spec.hfov_rad, spec.xi, w / 2.0),
        xi=spec.xi,
        image_size=(float(w), float(h)),
    )


def crop_label(spec: CropSpec) -> CropLabel:
    intr = crop_intrinsics(spec)
    return CropLabel(
        roll_rad=spec.roll_rad,
        midpoint_units=horizon_midpoint(Orientation(spec.pitch_rad, 0.0), intr),
        hfov_rad=spec.hfov_rad,
        xi=spec.xi,
        focal_px=intr.focal_px,
        pitch_rad=spec.pitch_rad,
    )


def derive_crop_seed(seed: int, pano_id: str, crop_index: int) -> int:
    """Stable 64-bit stream key for one crop."""
    digest = hashlib.sha256(f"{seed}/{pano_id}/{crop_index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def crop_rng(rng_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=rng_seed))


def _weighted_pick(rng: np.random.Generator, cum_weights: np.ndarray) -> int:
    return int(np.searchsorted(cum_weights, rng.random(), side="right"))


@functools.lru_cache(maxsize=64)
def _cumsum_normalized(weights: tuple) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    return np.cumsum(w / w.sum())


@functools.lru_cache(maxsize=64)
def _lognormal_params(mean: float, std: float) -> tuple:
    sigma2 = math.log(1.0 + (std / mean) ** 2)
    return math.log(mean) - sigma2 / 2.0, math.sqrt(sigma2)


def _hfov_scalar(f_px: float, xi: float, u0: float) -> float:
    u_hat = u0 / f_px
    s = math.sqrt(1.0 + (1.0 - xi * xi) * u_hat * u_hat)
    omega = (xi + s) / (u_hat * u_hat + 1.0)
    return 2.0 * math.atan2(omega * u_hat, omega - xi)


def _sample_focal_and_fov(
    rng: np.random.Generator, config: SamplingConfig, xi: float, render_w: int
) -> float:
    mu, sigma = _lognormal_params(config.focal_mm_mean, config.focal_mm_std)
    lo_mm, hi_mm = config.focal_mm_range
    lo_fov, hi_fov = config.hfov_range
    u0 = render_w / 2.0
    for _ in range(config.max_retries):
        f_mm = rng.lognormal(mean=mu, sigma=sigma)
        if not lo_mm <= f_mm <= hi_mm:
            continue
        hfov = _hfov_scalar(f_mm / SENSOR_WIDTH_MM * render_w, xi, u0)
        if lo_fov <= hfov <= hi_fov:
            return hfov
    raise SamplingExhausted(
        f"no focal draw gave hfov in {config.hfov_range} at xi={xi}"
    )


def _sample_roll(rng: np.random.Generator, config: SamplingConfig) -> float:
    cum = _cumsum_normalized(config.roll_weights)
    for _ in range(config.max_retries):
        gamma = config.roll_gammas[_weighted_pick(rng, cum)]
        roll = rng.standard_cauchy() * gamma
        if abs(roll) <= math.pi / 2.0:
            return float(roll)
    raise SamplingExhausted("roll sampling exhausted")


def _sample_pitch(
    rng: np.random.Generator, config: SamplingConfig, intr: Intrinsics
) -> tuple[float, float]:
    lo, hi = config.midpoint_range
    for _ in range(config.max_retries):
        v_m = rng.normal(config.horizon_mean, config.horizon_std)
        if not lo <= v_m <= hi:
            continue
        try:
            return pitch_from_midpoint(v_m, intr), float(v_m)
        except NoValidPitch:
            continue
    raise SamplingExhausted("no sampled horizon midpoint admits a valid pitch")


def sample_crop_spec(rng_seed: int, config: SamplingConfig, pano_id: str) -> CropSpec:
    """Draw one crop's camera parameters from the configured distributions.

    The draw order is fixed (yaw, aspect, distortion, focal, roll,
    midpoint) and each rejection loop redraws only its own quantity, so the
    accepted distortion marginal stays exactly the configured mixture.
    Deterministic in ``rng_seed``.
    """
    rng = crop_rng(rng_seed)
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    names = tuple(n for n, _ in config.aspect_weights)
    aspect = names[_weighted_pick(rng, _cumsum_normalized(tuple(w for _, w in config.aspect_weights)))]
    render_w, render_h = config.render_size(aspect)
    mode = config.xi_modes[_weighted_pick(rng, _cumsum_normalized(config.xi_weights))]
    xi = float(rng.triangular(0.0, mode, 1.0))
    hfov = _sample_focal_and_fov(rng, config, xi, render_w)
    roll = _sample_roll(rng, config)
    intr = Intrinsics(
        focal_from_fov(hfov, xi, render_w / 2.0), xi, (render_w, render_h)
    )
    pitch, _ = _sample_pitch(rng, config, intr)
    return CropSpec(
        pano_id=pano_id,
        yaw_rad=float(yaw),
        pitch_rad=pitch,
        roll_rad=roll,
        hfov_rad=hfov,
        xi=xi,
        aspect_ratio=aspect,
        render_size=(render_w, render_h),
        seed=rng_seed,
    )


def triangular_cdf(x, low: float, mode: float, high: float):
    """Analytic CDF of the triangular distribution (degenerate modes allowed)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    span = high - low
    left = mode - low
    right = high - mode
    rising = (x > low) & (x < mode)
    if left > 0:
        out[rising] = (x[rising] - low) ** 2 / (span * left)
    falling = (x >= mode) & (x < high)
    if right > 0:
        out[falling] = 1.0 - (high - x[falling]) ** 2 / (span * right)
    else:
        out[falling] = 1.0
    out[x >= high] = 1.0
    return out


def xi_mixture_cdf(x, config: SamplingConfig):
    """Analytic CDF of the configured triangular distortion mixture."""
    w = config.normalized_xi_weights()
    return sum(
        wi * triangular_cdf(x, 0.0, mode, 1.0)
        for wi, mode in zip(w, config.xi_modes)
    )


def equirect_inverse_map(
    intr: Intrinsics,
    pitch_rad: float,
    roll_rad: float,
    yaw_rad: float,
    pano_width: int,
    pano_height: int,
) -> InverseMap:
    """Inverse map from crop pixels into an equirectangular panorama.

    Crop pixels back-project to the unit sphere, rotate into the world by
    the transpose of ``Rz(roll) Rx(pitch) Ry(yaw)``, and land at longitude
    ``atan2(x, z)`` / latitude ``asin(-y)`` scaled to panorama pixels.
    """
    rot = rot_z(roll_rad) @ rot_x(pitch_rad) @ rot_y(yaw_rad)

    if _kernels.HAVE_NUMBA:

        def _map(xs: np.ndarray, ys: np.ndarray):
            sx = np.empty_like(xs)
            sy = np.empty_like(ys)
            _kernels.equirect_map_kernel(
                np.ascontiguousarray(xs),
                np.ascontiguousarray(ys),
                intr.focal_px,
                intr.xi,
                intr.u0,
                intr.v0,
                rot,
                float(pano_width),
                float(pano_height),
                sx,
                sy,
            )
            return sx, sy, None

        return _map

    def _map(xs: np.ndarray, ys: np.ndarray):
        d_cam = backproject(np.stack((xs, ys), axis=-1), intr)
        d_world = d_cam @ rot  # row-vector form of R^T @ d_cam
        lam = np.arctan2(d_world[..., 0], d_world[..., 2])
        phi = np.arcsin(np.clip(-d_world[..., 1], -1.0, 1.0))
        sx = (lam / (2.0 * math.pi) + 0.5) * pano_width
        sy = (0.5 - phi / math.pi) * pano_height
        return sx, sy, None

    return _map


def render_crop(
    pano: Image,
    spec: CropSpec,
    output_size: tuple[int, int] = (224, 224),
    threads: int = 1,
) -> tuple[Image, CropLabel]:
    """Render one labeled crop from an equirectangular panorama.

    The crop is rendered at ``spec.render_size`` (where the label is
    defined) and then resized, possibly anisotropically, to
    ``output_size``.

    Raises:
        BadPanoramaAspect: if the panorama is not 2:1 within 2%.
    """
    if abs(pano.width / (2.0 * pano.height) - 1.0) > 0.02:
        raise BadPanoramaAspect(
            f"panorama is {pano.width}x{pano.height}, expected 2:1 within 2%"
        )
    intr = crop_intrinsics(spec)
    raw = remap(
        pano,
        spec.render_size,
        equirect_inverse_map(
            intr, spec.pitch_rad, spec.roll_rad, spec.yaw_rad, pano.width, pano.height
        ),
        border="wrap_horizontal",
        threads=threads,
    )
    label = crop_label(spec)
    if tuple(output_size) != tuple(spec.render_size):
        sx = spec.render_size[0] / output_size[0]
        sy = spec.render_size[1] / output_size[1]
        raw = remap(raw, output_size, scale_map(sx, sy), border="clamp")
    return raw, label


def assign_splits(
    pano_ids: list[str], fractions: tuple[float, float, float], seed: int
) -> dict[str, str]:
    """Deterministic per-panorama split so no panorama spans two splits."""
    order = sorted(pano_ids)
    rng = crop_rng(derive_crop_seed(seed, "__splits__", 0))
    rng.shuffle(order)
    n = len(order)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    out = {}
    for i, pid in enumerate(order):
        if i < n_train:
            out[pid] = "train"
        elif i < n_train + n_val:
            out[pid] = "val"
        else:
            out[pid] = "test"
    return out


def _format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return json.dumps(v)


def record_to_json_line(rec: dict) -> str:
    parts = [f'"{k}": {_format_value(rec[k])}' for k in MANIFEST_FIELDS]
    return "{" + ", ".join(parts) + "}"


def load_manifest(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _record_for(spec: CropSpec, crop_id: str, rel_file: str, split: str) -> dict:
    label = crop_label(spec)
    return {
        "id": crop_id,
        "file": rel_file,
        "pano_id": spec.pano_id,
        "pitch_rad": label.pitch_rad,
        "roll_rad": label.roll_rad,
        "yaw_rad": spec.yaw_rad,
        "hfov_rad": label.hfov_rad,
        "xi": label.xi,
        "focal_px": label.focal_px,
        "midpoint_units": label.midpoint_units,
        "aspect": spec.aspect_ratio,
        "seed": spec.seed,
        "split": split,
    }


def generate_dataset(
    pano_dir: str | Path,
    out_dir: str | Path,
    config: SamplingConfig,
    count: int,
    seed: int,
    threads: int | None = None,
) -> list[dict]:
    """Render ``count`` labeled crops and write PNGs plus a JSONL manifest.

    Deterministic in ``seed``: the manifest is byte-identical across runs.
    Crops whose PNG already exists are not re-rendered, so interrupted runs
    resume by id. Returns the manifest records in generation order.
    """
    pano_dir = Path(pano_dir)
    out_dir = Path(out_dir)
    pano_paths = sorted(p for p in pano_dir.iterdir() if p.suffix.lower() == ".png")
    if not pano_paths:
        raise ValueError(f"no panoramas (*.png) found in {pano_dir}")
    pano_ids = [p.stem for p in pano_paths]
    splits = assign_splits(pano_ids, config.split_fractions, seed)
    path_by_id = {p.stem: p for p in pano_paths}

    counters: dict[str, int] = {}
    plan = []
    for g in range(count):
        pano_id = pano_ids[(g // config.crops_per_pano) % len(pano_ids)]
        crop_index = counters.get(pano_id, 0)
        counters[pano_id] = crop_index + 1
        crop_seed = derive_crop_seed(seed, pano_id, crop_index)
        spec = sample_crop_spec(crop_seed, config, pano_id)
        crop_id = f"{pano_id}_{crop_index:04d}"
        plan.append((spec, crop_id, f"crops/{crop_id}.png", splits[pano_id]))

    (out_dir / "crops").mkdir(parents=True, exist_ok=True)

    def _render_one(pano: Image, item) -> None:
        spec, _, rel_file, _ = item
        out_path = out_dir / rel_file
        if out_path.exists():
            return
        img, _ = render_crop(pano, spec, output_size=config.output_size)
        pngio.save_png(img, out_path, bit_depth=8)

    n_workers = threads if threads and threads > 0 else min(8, os.cpu_count() or 1)
    by_pano: dict[str, list] = {}
    for item in plan:
        by_pano.setdefault(item[0].pano_id, []).append(item)
    for pano_id, items in by_pano.items():
        pending = [it for it in items if not (out_dir / it[2]).exists()]
        if not pending:
            continue
        pano = pngio.load_png(path_by_id[pano_id])
        if n_workers == 1 or len(pending) == 1:
            for it in pending:
                _render_one(pano, it)
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                for f in [pool.submit(_render_one, pano, it) for it in pending]:
                    f.result()

    records = [
        _record_for(spec, crop_id, rel_file, split)
        for spec, crop_id, rel_file, split in plan
    ]
    manifest_path = out_dir / "manifest.jsonl"
    tmp = manifest_path.with_suffix(".jsonl.tmp")
    with open(tmp, "w") as fh:
        for rec in records:
            fh.write(record_to_json_line(rec) + "\n")
    tmp.replace(manifest_path)
    return records
