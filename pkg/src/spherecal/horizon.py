"""Horizon overlays and horizon-feature image retrieval.

The retrieval feature for an image is the pair of normalized v-coordinates
where its horizon crosses the left and right image boundaries. Features are
compared with plain L2 distance over an exhaustive scan, which is ample at
the ten-thousand-image scale this is meant for; swap in a spatial index if
that ever changes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import (
    Intrinsics,
    Orientation,
    horizon_curve,
    horizon_endpoints,
)
from .dataset import ASPECT_RATIOS
from .errors import EmptyIndex, SpherecalError
from .warp import Image


def draw_horizon(
    img: Image,
    orient: Orientation,
    intr: Intrinsics,
    color: tuple[float, float, float] = (1.0, 0.2, 0.1),
    thickness: float = 2.0,
    n_samples: int = 512,
) -> Image:
    """Rasterize the horizon curve as an anti-aliased polyline onto a copy.

    Coverage falls off linearly within half a pixel of the stroke edge, so
    pixels further than ``thickness + 1`` from the curve are untouched.
    """
    pts = horizon_curve(orient, intr, n_samples)
    out = img.pixels.copy()
    h, w, c = out.shape
    col = np.asarray(color[:c] if c == 3 else [float(np.mean(color))], dtype=np.float32)
    radius = thickness / 2.0
    pad = int(math.ceil(radius + 1.0))
    for (x1, y1), (x2, y2) in zip(pts[:-1], pts[1:]):
        lo_x = int(math.floor(min(x1, x2))) - pad
        hi_x = int(math.ceil(max(x1, x2))) + pad
        lo_y = int(math.floor(min(y1, y2))) - pad
        hi_y = int(math.ceil(max(y1, y2))) + pad
        lo_x, hi_x = max(lo_x, 0), min(hi_x, w)
        lo_y, hi_y = max(lo_y, 0), min(hi_y, h)
        if lo_x >= hi_x or lo_y >= hi_y:
            continue
        gx, gy = np.meshgrid(
            np.arange(lo_x, hi_x) + 0.5, np.arange(lo_y, hi_y) + 0.5
        )
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            t = np.zeros_like(gx)
        else:
            t = np.clip(((gx - x1) * dx + (gy - y1) * dy) / seg2, 0.0, 1.0)
        dist = np.hypot(gx - (x1 + t * dx), gy - (y1 + t * dy))
        cov = np.clip(radius + 0.5 - dist, 0.0, 1.0).astype(np.float32)[..., None]
        patch = out[lo_y:hi_y, lo_x:hi_x]
        np.maximum(cov, 0.0, out=cov)
        patch[:] = patch * (1.0 - cov) + col * cov
    return Image(out)


@dataclass
class RetrievalIndex:
    """Immutable id -> (v_left, v_right) feature table."""

    ids: list[str]
    features: np.ndarray  # (n, 2) float64

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=np.float64).reshape(-1, 2)
        if len(self.ids) != f.shape[0]:
            raise ValueError("ids and features disagree in length")
        self.features = f

    def __len__(self) -> int:
        return len(self.ids)


def intrinsics_from_record(rec: dict) -> Intrinsics:
    """Rebuild crop intrinsics from a manifest record.

    The render width follows from (hfov, xi, focal): the left image edge
    sits at ``u0 = f sin(hfov/2) / (xi + cos(hfov/2))`` from center, and the
    height follows from the aspect ratio. Crop renders have integral sizes,
    so both dimensions are rounded to recover them exactly.
    """
    half = rec["hfov_rad"] / 2.0
    u0 = rec["focal_px"] * math.sin(half) / (rec["xi"] + math.cos(half))
    w = round(2.0 * u0)
    h = round(w / ASPECT_RATIOS[rec["aspect"]])
    return Intrinsics(rec["focal_px"], rec["xi"], (float(w), float(h)))


def build_index(records: list[dict]) -> tuple[RetrievalIndex, list[str]]:
    """Index manifest records by horizon-boundary features.

    Records whose horizon endpoints cannot be computed are skipped and
    reported in the second return value.
    """
    ids: list[str] = []
    feats: list[tuple[float, float]] = []
    skipped: list[str] = []
    for rec in records:
        try:
            intr = intrinsics_from_record(rec)
            orient = Orientation(rec["pitch_rad"], rec["roll_rad"])
            feats.append(horizon_endpoints(orient, intr))
            ids.append(rec["id"])
        except (SpherecalError, KeyError, ZeroDivisionError):
            skipped.append(rec.get("id", "<missing-id>"))
    return RetrievalIndex(ids, np.asarray(feats).reshape(-1, 2)), skipped


def query(
    index: RetrievalIndex, feature: tuple[float, float], k: int
) -> list[tuple[str, float]]:
    """Top-k ids by ascending L2 feature distance; ties break by id.

    Raises:
        EmptyIndex: if the index holds no entries.
    """
    if len(index) == 0:
        raise EmptyIndex("query against an empty index")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    d = np.linalg.norm(index.features - np.asarray(feature, dtype=np.float64), axis=1)
    order = sorted(range(len(index)), key=lambda i: (d[i], index.ids[i]))
    return [(index.ids[i], float(d[i])) for i in order[:k]]


def save_index(index: RetrievalIndex, path: str | Path) -> None:
    with open(path, "w") as fh:
        for crop_id, (v_left, v_right) in zip(index.ids, index.features):
            fh.write(
                json.dumps({"id": crop_id, "v_left": v_left, "v_right": v_right})
                + "\n"
            )


def load_index(path: str | Path) -> RetrievalIndex:
    ids: list[str] = []
    feats: list[tuple[float, float]] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            ids.append(rec["id"])
            feats.append((rec["v_left"], rec["v_right"]))
    return RetrievalIndex(ids, np.asarray(feats).reshape(-1, 2))
