"""PNG input/output at the CLI boundary (8-bit and 16-bit, gray or RGB).

Samples are converted to and from the library's [0, 1] float representation.
OpenCV handles the codec work; channel order is converted so the in-memory
layout is always RGB.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .warp import Image


def load_png(path: str | Path) -> Image:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise IOError(f"could not read image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise IOError(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        if raw.shape[2] == 3:
            raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    return Image(raw.astype(np.float32) / scale)


def save_png(img: Image, path: str | Path, bit_depth: int = 8) -> None:
    if bit_depth == 8:
        q = np.rint(np.clip(img.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        q = np.rint(np.clip(img.pixels, 0.0, 1.0) * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    if q.shape[2] == 1:
        q = q[:, :, 0]
    else:
        q = cv2.cvtColor(q, cv2.COLOR_RGB2BGR)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.png")
    if not cv2.imwrite(str(tmp), q):
        raise IOError(f"could not write image: {path}")
    tmp.replace(path)
