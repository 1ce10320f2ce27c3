"""Rectify a spherically-distorted image onto a flat (pinhole) target.

Each target pixel is back-projected through an ideal pinhole, the ray is
re-projected through the source's spherical model, and the source is
bilinearly sampled there. Pixels whose ray lands outside the source are
black rather than extrapolated. The pinhole target cannot represent
hemispheric content, so target fields of view are capped below pi; content
beyond the target's view is cropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics, focal_from_fov, project_with_mask
from .errors import InvalidTarget
from .warp import Image, InverseMap, remap


@dataclass(frozen=True)
class TargetSpec:
    """Pinhole target geometry: size plus exactly one of focal or hfov."""

    size: tuple[int, int]
    focal_px: float | None = None
    hfov_rad: float | None = None

    def resolve_focal(self) -> float:
        if (self.focal_px is None) == (self.hfov_rad is None):
            raise InvalidTarget("specify exactly one of focal_px or hfov_rad")
        if self.focal_px is not None:
            if self.focal_px <= 0:
                raise InvalidTarget(f"target focal must be positive, got {self.focal_px}")
            return self.focal_px
        if not 0.0 < self.hfov_rad < math.pi:
            raise InvalidTarget(
                f"pinhole target hfov must lie in (0, pi), got {self.hfov_rad}"
            )
        return focal_from_fov(self.hfov_rad, 0.0, self.size[0] / 2.0)


def default_target(intr: Intrinsics) -> TargetSpec:
    """Target preserving the source's center-pixel scale at the same size.

    The spherical projection's Jacobian at the optical axis is
    ``f / (1 + xi)`` pixels per radian, so a pinhole with that focal length
    renders the image center at unit magnification.
    """
    return TargetSpec(
        size=(int(round(intr.width)), int(round(intr.height))),
        focal_px=intr.focal_px / (1.0 + intr.xi),
    )


def undistort_inverse_map(intr: Intrinsics, target: TargetSpec) -> InverseMap:
    tw, th = target.size
    f_t = target.resolve_focal()
    u0_t, v0_t = tw / 2.0, th / 2.0
    w_s, h_s = intr.width, intr.height

    def _map(xs: np.ndarray, ys: np.ndarray):
        d = np.stack(
            ((xs - u0_t) / f_t, (ys - v0_t) / f_t, np.ones_like(xs)), axis=-1
        )
        pix, valid = project_with_mask(d, intr)
        sx, sy = pix[..., 0], pix[..., 1]
        inside = (sx >= 0.0) & (sx <= w_s) & (sy >= 0.0) & (sy <= h_s)
        return sx, sy, valid & inside

    return _map


def undistort(
    src: Image, intr: Intrinsics, target: TargetSpec, threads: int = 1
) -> Image:
    """Reproject ``src`` (captured with ``intr``) onto a flat pinhole target.

    Raises:
        InvalidTarget: if the target spec is inconsistent or its hfov >= pi.
    """
    if (src.width, src.height) != (int(round(intr.width)), int(round(intr.height))):
        raise ValueError(
            f"intrinsics are {intr.width}x{intr.height} but image is "
            f"{src.width}x{src.height}"
        )
    return remap(
        src,
        target.size,
        undistort_inverse_map(intr, target),
        border="clamp",
        threads=threads,
    )
