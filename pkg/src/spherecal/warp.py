"""Inverse-mapping image resampler shared by dataset generation and undistortion.

An :class:`Image` is a float32 array of shape ``(h, w, c)`` with samples in
``[0, 1]``. Resampling follows the corner convention: continuous coordinate
``(0, 0)`` is the top-left image corner and the pixel at array index
``(j, i)`` has its center at ``(i + 0.5, j + 0.5)``. Every map constructor
in this package receives target pixel centers and must return source
coordinates in the same convention, which makes ``remap`` with the identity
map exact.

An inverse map is a vectorized callable::

    map(xs, ys) -> (src_x, src_y, valid_or_None)

where ``xs, ys`` are float64 arrays of target pixel centers and ``valid``
is an optional boolean mask (``None`` means every pixel maps). Maps must be
pure functions; ``remap`` relies on that for its determinism guarantees.

``remap`` splits the target into disjoint row bands processed by a thread
pool. Bands share the source read-only and never exchange data, so the
output is bit-identical regardless of schedule or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Tuple

import numpy as np

from . import _kernels

BorderMode = Literal["clamp", "wrap_horizontal"]

InverseMap = Callable[
    [np.ndarray, np.ndarray],
    Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]],
]


@dataclass
class Image:
    """Row-major raster with 1 or 3 channels and samples in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.pixels)
        if p.ndim == 2:
            p = p[:, :, None]
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, 1|3) pixels, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {p.shape}")
        self.pixels = np.ascontiguousarray(p, dtype=np.float32)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def identity_map(xs: np.ndarray, ys: np.ndarray):
    return xs, ys, None


def scale_map(sx: float, sy: float) -> InverseMap:
    """Map a target onto a source ``sx, sy`` times its size (for resizing)."""

    def _map(xs: np.ndarray, ys: np.ndarray):
        return xs * sx, ys * sy, None

    return _map


def _gather(src: np.ndarray, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    return src[iy, ix, :]


def _bilinear_numpy(src: Image, x: np.ndarray, y: np.ndarray, border: BorderMode) -> np.ndarray:
    """Reference implementation; the numba kernel mirrors it bit-for-bit."""
    w, h = src.width, src.height
    xf = x - 0.5
    yf = y - 0.5
    x0 = np.floor(xf).astype(np.int64)
    y0 = np.floor(yf).astype(np.int64)
    tx = (xf - x0)[..., None]
    ty = (yf - y0)[..., None]
    if border == "wrap_horizontal":
        x0w, x1w = x0 % w, (x0 + 1) % w
    else:
        x0w, x1w = np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)
    y0c, y1c = np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)
    p = src.pixels
    top = _gather(p, x0w, y0c) * (1.0 - tx) + _gather(p, x1w, y0c) * tx
    bot = _gather(p, x0w, y1c) * (1.0 - tx) + _gather(p, x1w, y1c) * tx
    return (top * (1.0 - ty) + bot * ty).astype(np.float32)


def bilinear_sample(
    src: Image, x, y, border: BorderMode = "clamp"
) -> np.ndarray:
    """Bilinearly interpolate ``src`` at continuous coordinates ``(x, y)``.

    ``wrap_horizontal`` wraps x only and clamps y (equirectangular sources);
    ``clamp`` clamps both axes. Interpolation weights live in float64 so the
    result is a convex combination of the four neighbors and stays inside
    the source value range. Returns an array of shape
    ``x.shape + (channels,)``.
    """
    if border not in ("clamp", "wrap_horizontal"):
        raise ValueError(f"unknown border mode: {border!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not _kernels.HAVE_NUMBA:
        return _bilinear_numpy(src, x, y, border)
    out = np.empty(x.shape + (src.channels,), dtype=np.float32)
    _kernels.bilinear_kernel(
        src.pixels,
        np.ascontiguousarray(x),
        np.ascontiguousarray(y),
        border == "wrap_horizontal",
        out,
    )
    return out


def _remap_band(
    src: Image,
    out: np.ndarray,
    target_w: int,
    row0: int,
    row1: int,
    inverse_map: InverseMap,
    border: BorderMode,
) -> None:
    xs = np.arange(target_w, dtype=np.float64) + 0.5
    ys = np.arange(row0, row1, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    sx, sy, valid = inverse_map(gx, gy)
    band = bilinear_sample(src, sx, sy, border)
    if valid is not None:
        band[~valid] = 0.0
    out[row0:row1] = band


def remap(
    src: Image,
    target_size: tuple[int, int],
    inverse_map: InverseMap,
    border: BorderMode = "clamp",
    threads: int = 1,
) -> Image:
    """Render a target image by pulling each pixel from ``inverse_map``.

    Unmapped pixels (``valid`` False) are filled with 0. Row bands are
    processed independently; the result does not depend on ``threads``.
    """
    tw, th = target_size
    if tw < 1 or th < 1:
        raise ValueError(f"target_size must be positive, got {target_size}")
    out = np.empty((th, tw, src.channels), dtype=np.float32)
    threads = max(1, threads)
    if threads == 1 or th < 2 * threads:
        _remap_band(src, out, tw, 0, th, inverse_map, border)
        return Image(out)
    bounds = np.linspace(0, th, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_remap_band, src, out, tw, int(r0), int(r1), inverse_map, border)
            for r0, r1 in zip(bounds[:-1], bounds[1:])
            if r1 > r0
        ]
        for f in futures:
            f.result()
    return Image(out)
