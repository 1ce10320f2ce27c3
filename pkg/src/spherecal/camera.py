"""Closed-form unified spherical camera model and parameter conversions.

The model projects a camera-frame point onto the unit sphere and then onto
the image plane from a projection center offset by ``xi`` below the sphere
center. ``xi = 0`` reduces to the pinhole model; ``xi`` near 1 covers strong
fisheye distortion. All operations here are pure functions of immutable
value types and are safe to call concurrently.

Conventions used throughout the package:

* Camera frame: right-handed, x right, y down, z forward (optical axis).
* World frame: aligned with the camera frame at identity orientation; the
  zero-elevation (horizon) plane is ``y = 0``.
* ``rotation_matrix`` maps world directions to camera directions,
  ``d_cam = R @ d_world`` with ``R = Rz(roll) @ Rx(pitch)``. Yaw and
  translation are structurally absent.
* Pixel coordinates: u right, v down, origin at the top-left image corner;
  the pixel at array index ``(row j, col i)`` covers the continuous square
  ``[i, i+1) x [j, j+1)`` and has its center at ``(i + 0.5, j + 0.5)``.
* Normalized vertical units: the top edge of the image is +1 and the bottom
  edge is -1, i.e. ``v_units = 2 (v0 - v_px) / height``.
* Angles are radians everywhere; degrees exist only at the CLI boundary.

With these choices the pixel-space horizon midpoint for a camera with pitch
``theta`` is ``b_p = -f sin(theta) / (xi + cos(theta)) + v0`` (pinhole:
``b_p = -f tan(theta) + v0``) and its normalized form is
``v_m = 2 f sin(theta) / (h (xi + cos(theta)))``. Positive pitch therefore
moves the horizon toward the image top (positive ``v_m``).

Point batches are plain numpy arrays: camera points have shape ``(..., 3)``,
pixels ``(..., 2)``. Scalar convenience follows from shape ``(3,)`` /
``(2,)`` inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProjection,
    EmptyHorizon,
    HorizonAtInfinity,
    InvalidFov,
    NoIntersection,
    NoValidPitch,
    OutOfModelRange,
)

# Relative threshold for "point in front of the projection center".
DEGENERACY_EPS = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Spherical-model intrinsics: focal length (px), distortion and geometry.

    ``image_size`` is kept as reals so rescaling never forces a rounding
    decision; callers round at raster boundaries. The principal point
    defaults to the image center, which every derived formula assumes.
    """

    focal_px: float
    xi: float
    image_size: tuple[float, float]
    principal_point: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        w, h = self.image_size
        if not self.focal_px > 0:
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if not (w > 0 and h > 0):
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point", (w / 2.0, h / 2.0))

    @property
    def width(self) -> float:
        return self.image_size[0]

    @property
    def height(self) -> float:
        return self.image_size[1]

    @property
    def u0(self) -> float:
        return self.principal_point[0]  # type: ignore[index]

    @property
    def v0(self) -> float:
        return self.principal_point[1]  # type: ignore[index]


@dataclass(frozen=True)
class Orientation:
    """Camera orientation as pitch and roll; yaw is structurally absent."""

    pitch_rad: float = 0.0
    roll_rad: float = 0.0


@dataclass(frozen=True)
class HorizonLine:
    """(midpoint, roll) parameterization of the horizon.

    ``midpoint_units`` is the normalized v-coordinate where the horizon
    crosses the vertical center axis (top = +1, bottom = -1). For pinhole
    cameras the straight line through this point at angle ``roll_rad``
    coincides with the true horizon whenever pitch or roll is zero; for
    ``xi > 0`` the rendered horizon is a curve and this type stores only
    the parameterization.
    """

    midpoint_units: float
    roll_rad: float

    def v_units_at(self, u_px: float, intr: Intrinsics) -> float:
        """Normalized v of the parameterized line at pixel column ``u_px``."""
        v_px = v_units_to_pixel(self.midpoint_units, intr)
        v_at = v_px + (u_px - intr.u0) * math.tan(self.roll_rad)
        return v_pixel_to_units(v_at, intr)


def v_pixel_to_units(v_px, intr: Intrinsics):
    """Pixel v (down-positive) to normalized units (top = +1, bottom = -1)."""
    return 2.0 * (intr.v0 - np.asarray(v_px, dtype=np.float64)) / intr.height


def v_units_to_pixel(v_units, intr: Intrinsics):
    """Normalized units (top = +1) back to pixel v (down-positive)."""
    return intr.v0 - 0.5 * np.asarray(v_units, dtype=np.float64) * intr.height


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix(orient: Orientation) -> np.ndarray:
    """World-to-camera rotation ``Rz(roll) @ Rx(pitch)``."""
    return rot_z(orient.roll_rad) @ rot_x(orient.pitch_rad)


def project_with_mask(p_cam, intr: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Project camera points, flagging directions outside the forward image.

    Returns ``(pixels, valid)`` where invalid entries hold unspecified
    values. This is the masked variant used by the warping pipelines;
    :func:`project` raises instead.
    """
    p = np.asarray(p_cam, dtype=np.float64)
    alpha = np.linalg.norm(p, axis=-1)
    denom = intr.xi * alpha + p[..., 2]
    valid = (alpha > 0.0) & (denom > DEGENERACY_EPS * alpha)
    safe = np.where(valid, denom, 1.0)
    scale = intr.focal_px / safe
    pix = np.stack((p[..., 0] * scale + intr.u0, p[..., 1] * scale + intr.v0), axis=-1)
    return pix, valid


def project(p_cam, intr: Intrinsics) -> np.ndarray:
    """Spherical-model projection ``u = x f / (xi |p| + z) + u0`` (v alike).

    Raises:
        DegenerateProjection: if any point has ``xi |p| + z <= eps |p|``,
            i.e. lies outside the model's forward image.
    """
    pix, valid = project_with_mask(p_cam, intr)
    if not np.all(valid):
        raise DegenerateProjection(
            "point(s) project behind the spherical projection center"
        )
    return pix


def backproject(pix, intr: Intrinsics) -> np.ndarray:
    """Lift pixels to unit-sphere points.

    Normalizes the pixel through the intrinsic matrix, then applies the
    closed-form inverse of the spherical projection. Total for
    ``xi in [0, 1]``; the result always has unit norm.
    """
    p = np.asarray(pix, dtype=np.float64)
    u_hat = (p[..., 0] - intr.u0) / intr.focal_px
    v_hat = (p[..., 1] - intr.v0) / intr.focal_px
    r2 = u_hat * u_hat + v_hat * v_hat
    omega = (intr.xi + np.sqrt(1.0 + (1.0 - intr.xi**2) * r2)) / (r2 + 1.0)
    return np.stack((omega * u_hat, omega * v_hat, omega - intr.xi), axis=-1)


def effective_hfov(intr: Intrinsics) -> float:
    """Effective horizontal field of view in radians.

    Angle between the back-projections of the left image edge and the
    principal point, doubled. The edge back-projects to
    ``(omega u_hat, 0, omega - xi)`` on the unit sphere, so the half-angle
    is ``atan2(omega u_hat, omega - xi)`` — equal to the textbook
    ``acos(omega - xi)`` but conditioned well for long focals. Reduces to
    ``2 atan(u0 / f)`` for ``xi = 0`` and grows toward ``2 pi`` as
    ``xi -> 1`` with short focals.
    """
    u_hat = intr.u0 / intr.focal_px
    s = math.sqrt(1.0 + (1.0 - intr.xi**2) * u_hat * u_hat)
    omega = (intr.xi + s) / (u_hat * u_hat + 1.0)
    return 2.0 * math.atan2(omega * u_hat, omega - intr.xi)


def focal_from_fov(hfov_rad: float, xi: float, u0: float) -> float:
    """Focal length (px) realizing a horizontal FoV at distortion ``xi``.

    Places the left-edge back-projection at ``(X, 0, Z)`` with
    ``X = -sin(hfov/2)``, ``Z = +sqrt(1 - X^2)`` and solves
    ``f = -u0 (xi + Z) / X``.

    Raises:
        InvalidFov: if ``hfov_rad`` is outside ``(0, pi)`` (the positive-Z
            branch of the construction).
    """
    if not 0.0 < hfov_rad < math.pi:
        raise InvalidFov(f"hfov must lie in (0, pi), got {hfov_rad}")
    half = hfov_rad / 2.0
    return u0 * (xi + math.cos(half)) / math.sin(half)


def xi_from_fov_focal(hfov_rad: float, focal_px: float, u0: float) -> float:
    """Distortion ``xi`` consistent with a (FoV, focal) pair.

    Raises:
        InvalidFov: if ``hfov_rad`` is outside ``(0, pi)``.
        OutOfModelRange: if the implied ``xi`` falls outside ``[0, 1]``
            beyond floating-point slack.
    """
    if not 0.0 < hfov_rad < math.pi:
        raise InvalidFov(f"hfov must lie in (0, pi), got {hfov_rad}")
    if not focal_px > 0:
        raise ValueError(f"focal_px must be positive, got {focal_px}")
    half = hfov_rad / 2.0
    xi = focal_px * math.sin(half) / u0 - math.cos(half)
    if xi < -1e-9 or xi > 1.0 + 1e-9:
        raise OutOfModelRange(
            f"(hfov={hfov_rad}, f={focal_px}) implies xi={xi} outside [0, 1]"
        )
    return xi


def horizon_midpoint(orient: Orientation, intr: Intrinsics) -> float:
    """Normalized v where the horizon crosses the vertical center axis.

    ``v_m = 2 f sin(pitch) / (h (xi + cos(pitch)))``; exact for zero roll
    (the (v_m, roll) horizon parameterization applies roll about this
    point).

    Raises:
        HorizonAtInfinity: when ``xi + cos(pitch)`` vanishes.
    """
    denom = intr.xi + math.cos(orient.pitch_rad)
    if abs(denom) < 1e-12:
        raise HorizonAtInfinity("xi + cos(pitch) vanishes; midpoint undefined")
    return 2.0 * intr.focal_px * math.sin(orient.pitch_rad) / (intr.height * denom)


def pitch_from_midpoint(v_m: float, intr: Intrinsics) -> float:
    """Pitch in ``(-pi/2, pi/2)`` whose horizon midpoint equals ``v_m``.

    Solves ``k (1 - xi) t^2 + 2 t - k (1 + xi) = 0`` in ``t = tan(pitch/2)``
    with ``k = v_m h / (2 f)``, using the numerically stable root pairing.
    When two roots land inside ``(-pi/2, pi/2)`` the smaller ``|pitch|``
    wins (cannot happen for ``xi in [0, 1]`` and finite ``k``, but guarded).

    Raises:
        NoValidPitch: if no real root gives ``|pitch| < pi/2``.
    """
    k = v_m * intr.height / (2.0 * intr.focal_px)
    if k == 0.0:
        return 0.0
    a = k * (1.0 - intr.xi)
    c = -k * (1.0 + intr.xi)
    if a == 0.0:
        # xi == 1: the equation is linear, 2 t = k (1 + xi).
        roots = [-c / 2.0]
    else:
        disc = 1.0 + k * k * (1.0 - intr.xi**2)
        if disc < 0.0:
            raise NoValidPitch(f"no real pitch reproduces v_m={v_m}")
        q = -(1.0 + math.sqrt(disc))
        roots = [q / a, c / q]
    pitches = [2.0 * math.atan(t) for t in roots]
    valid = [th for th in pitches if abs(th) < math.pi / 2.0]
    if not valid:
        raise NoValidPitch(f"v_m={v_m} unreachable with |pitch| < pi/2")
    return min(valid, key=abs)


def rescale_intrinsics(intr: Intrinsics, s: float) -> Intrinsics:
    """Intrinsics of the image downscaled by ``s`` (``f' = f/s``, ``xi' = xi``)."""
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    return Intrinsics(
        focal_px=intr.focal_px / s,
        xi=intr.xi,
        image_size=(intr.width / s, intr.height / s),
        principal_point=(intr.u0 / s, intr.v0 / s),
    )


def _horizon_samples(
    orient: Orientation, intr: Intrinsics, n_samples: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project ``n_samples`` zero-elevation directions, azimuth-ordered."""
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    az = np.linspace(-math.pi, math.pi, n_samples, endpoint=False)
    d_world = np.stack((np.sin(az), np.zeros_like(az), np.cos(az)), axis=-1)
    d_cam = d_world @ rotation_matrix(orient).T
    pix, valid = project_with_mask(d_cam, intr)
    return az, pix, valid


def horizon_curve(
    orient: Orientation, intr: Intrinsics, n_samples: int = 512
) -> np.ndarray:
    """Image-space polyline of the horizon, ordered by world azimuth.

    Zero-elevation directions that fail the projection precondition are
    dropped; returned points may lie outside the image bounds. A pinhole
    horizon is an exact line; ``xi > 0`` bends it.

    Raises:
        EmptyHorizon: if no sampled direction projects (e.g. a pinhole
            camera looking straight up or down).
    """
    _, pix, valid = _horizon_samples(orient, intr, n_samples)
    if not valid.any():
        raise EmptyHorizon("no zero-elevation direction projects")
    return pix[valid]


def _forward_arc(valid: np.ndarray, n: int) -> np.ndarray:
    """Indices of the circularly contiguous valid run nearest azimuth zero."""
    center = n // 2  # linspace(-pi, pi) places azimuth 0 here
    idx = np.flatnonzero(valid)
    start = idx[np.argmin(np.minimum(np.abs(idx - center), n - np.abs(idx - center)))]
    arc = [start]
    right = start
    while valid[(right + 1) % n] and len(arc) < n:
        right = (right + 1) % n
        arc.append(right)
    left = start
    while valid[(left - 1) % n] and len(arc) < n:
        left = (left - 1) % n
        arc.insert(0, left)
    return np.asarray(arc)


def _boundary_crossing(us: np.ndarray, vs: np.ndarray, u_edge: float, v0: float) -> float:
    """v at the polyline's crossing of the vertical line ``u = u_edge``.

    Falls back to end-tangent extrapolation when the crossing lies outside
    the sampled span (approximate for extreme distortion).
    """
    d = us - u_edge
    sign_change = np.flatnonzero(d[:-1] * d[1:] <= 0.0)
    hits = []
    for i in sign_change:
        du = us[i + 1] - us[i]
        if du == 0.0:
            continue
        t = (u_edge - us[i]) / du
        if 0.0 <= t <= 1.0:
            hits.append(vs[i] + t * (vs[i + 1] - vs[i]))
    if hits:
        # Wrap-around curves can cross twice; keep the crossing nearest the
        # image's vertical center.
        return min(hits, key=lambda v: abs(v - v0))
    # Extrapolate along the end tangent on the side nearest the boundary.
    if abs(us[0] - u_edge) <= abs(us[-1] - u_edge):
        (u1, v1), (u2, v2) = (us[0], vs[0]), (us[1], vs[1])
    else:
        (u1, v1), (u2, v2) = (us[-2], vs[-2]), (us[-1], vs[-1])
    if u2 == u1:
        raise NoIntersection(f"horizon tangent never crosses u={u_edge}")
    return v1 + (u_edge - u1) * (v2 - v1) / (u2 - u1)


def horizon_endpoints(
    orient: Orientation, intr: Intrinsics, n_samples: int = 2048
) -> tuple[float, float]:
    """Normalized v of the horizon at the left and right image boundaries.

    Crossings are read off the forward arc of the sampled horizon curve;
    when a boundary is not reached within the sampled span, the curve's end
    tangent is extrapolated (documented as approximate for extreme xi).

    Raises:
        EmptyHorizon: propagated when nothing projects.
        NoIntersection: when the curve cannot reach a boundary at all.
    """
    _, pix, valid = _horizon_samples(orient, intr, n_samples)
    if not valid.any():
        raise EmptyHorizon("no zero-elevation direction projects")
    arc = _forward_arc(valid, n_samples)
    us = pix[arc, 0]
    vs = pix[arc, 1]
    if us[0] > us[-1]:
        us, vs = us[::-1], vs[::-1]
    v_left_px = _boundary_crossing(us, vs, 0.0, intr.v0)
    v_right_px = _boundary_crossing(us, vs, intr.width, intr.v0)
    return (
        float(v_pixel_to_units(v_left_px, intr)),
        float(v_pixel_to_units(v_right_px, intr)),
    )
