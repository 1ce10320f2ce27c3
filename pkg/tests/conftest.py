import math

import numpy as np
import pytest

from spherecal.warp import Image


def make_pano(width=512, height=256, equator_rows=2, stripes=0):
    """Synthetic equirectangular pano: dark field, white equator band.

    Optional longitude stripes give yaw-dependent texture when needed.
    """
    img = np.zeros((height, width, 3), dtype=np.float32)
    img[:, :, 2] = 0.15
    half = equator_rows // 2
    img[height // 2 - half : height // 2 + half, :, :] = 1.0
    if stripes:
        xx = np.arange(width)
        mask = ((xx * stripes) // width) % 2 == 0
        img[:, mask, 1] += 0.2
    return Image(np.clip(img, 0.0, 1.0))


def make_latitude_pano(width=512, height=256, bands=16):
    """Pano whose value depends only on latitude (yaw-invariant by design)."""
    row = np.linspace(0.0, 1.0, height, dtype=np.float32)
    banded = np.floor(row * bands) / bands
    img = np.repeat(banded[:, None], width, axis=1)
    return Image(np.stack([img, img, img], axis=-1))


def smooth_image(width=256, height=256, seed=0):
    """Low-frequency smooth test image (resampling-friendly)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0, 1, height), np.linspace(0, 1, width), indexing="ij"
    )
    img = 0.5 + 0.18 * np.sin(2 * math.pi * (1.3 * xx + 0.4)) * np.cos(
        2 * math.pi * (0.9 * yy - 0.1)
    )
    img += 0.12 * np.sin(2 * math.pi * (0.5 * xx + 1.7 * yy))
    img += 0.02 * rng.standard_normal((height, width))
    img = np.clip(img, 0.02, 0.98).astype(np.float32)
    return Image(np.stack([img, img * 0.9 + 0.05, 1.0 - img * 0.7], axis=-1))


@pytest.fixture(scope="session")
def equator_pano():
    return make_pano()
