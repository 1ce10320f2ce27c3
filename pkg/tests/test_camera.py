import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from spherecal.camera import (
    HorizonLine,
    Intrinsics,
    Orientation,
    backproject,
    effective_hfov,
    focal_from_fov,
    horizon_curve,
    horizon_endpoints,
    horizon_midpoint,
    pitch_from_midpoint,
    project,
    project_with_mask,
    rescale_intrinsics,
    rotation_matrix,
    v_pixel_to_units,
    v_units_to_pixel,
    xi_from_fov_focal,
)
from spherecal.errors import (
    DegenerateProjection,
    EmptyHorizon,
    HorizonAtInfinity,
    InvalidFov,
    NoValidPitch,
    OutOfModelRange,
)

INTR = Intrinsics(500.0, 0.5, (640, 480))


def random_intrinsics(rng, width=640.0, height=480.0):
    return Intrinsics(
        focal_px=rng.uniform(80, 2000),
        xi=rng.uniform(0, 1),
        image_size=(width, height),
    )


class TestRotation:
    def test_identity(self):
        assert np.allclose(rotation_matrix(Orientation(0, 0)), np.eye(3))

    def test_pure_z(self):
        R = rotation_matrix(Orientation(0, math.pi / 2))
        assert np.allclose(R, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)

    def test_against_axis_angle_oracle(self):
        # Rz(psi) Rx(theta) composed from generic axis-angle rotations.
        theta, psi = 0.3, 0.2
        oracle = (
            Rotation.from_rotvec([0, 0, psi]) * Rotation.from_rotvec([theta, 0, 0])
        ).as_matrix()
        R = rotation_matrix(Orientation(theta, psi))
        assert np.allclose(R, oracle, atol=1e-12)
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


class TestProject:
    def test_optical_axis_hits_principal_point(self):
        assert np.allclose(project([0, 0, 1], INTR), (320, 240))

    def test_pinhole_reduction(self):
        intr = Intrinsics(500.0, 0.0, (640, 480))
        assert np.allclose(project([1, 0, 1], intr), (820, 240), atol=1e-12)

    def test_distorted_point_matches_high_precision_oracle(self):
        # 500 / (0.5 sqrt(2) + 1) + 320 evaluated at 50 digits.
        u, v = project([1, 0, 1], INTR)
        assert u == pytest.approx(612.8932188134524756, abs=1e-10)
        assert v == pytest.approx(240.0, abs=1e-12)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateProjection):
            project([0, 0, -1.0], Intrinsics(500.0, 0.0, (640, 480)))
        # xi alpha + z barely negative for xi=0.5 at z = -0.6|p|
        d = np.array([0.8, 0.0, -0.6])
        with pytest.raises(DegenerateProjection):
            project(d, INTR)

    def test_mask_variant_flags_instead(self):
        pts = np.array([[0, 0, 1.0], [0, 0, -1.0]])
        pix, valid = project_with_mask(pts, Intrinsics(500.0, 0.0, (640, 480)))
        assert valid.tolist() == [True, False]
        assert np.allclose(pix[0], (320, 240))

    def test_scale_invariant_degeneracy_threshold(self):
        d = np.array([1.0, 0.0, -1.0])
        for scale in (1e-6, 1.0, 1e6):
            _, valid = project_with_mask(d * scale, Intrinsics(500.0, 1.0, (640, 480)))
            # xi*alpha + z = sqrt(2) - 1 > 0 regardless of scale
            assert valid


class TestBackproject:
    def test_principal_point_is_forward(self):
        assert np.allclose(backproject([320.0, 240.0], INTR), (0, 0, 1), atol=1e-15)

    def test_pinhole_45_degree_ray(self):
        intr = Intrinsics(500.0, 0.0, (640, 480))
        p = backproject([820.0, 240.0], intr)  # u_hat = 1
        s = math.sqrt(2) / 2
        assert np.allclose(p, (s, 0, s), atol=1e-15)

    def test_unit_norm(self):
        rng = np.random.default_rng(1)
        pix = rng.uniform(-200, 900, size=(5000, 2))
        for xi in (0.0, 0.3, 0.7, 1.0):
            intr = Intrinsics(321.0, xi, (640, 480))
            norms = np.linalg.norm(backproject(pix, intr), axis=-1)
            assert np.max(np.abs(norms - 1.0)) < 1e-12

    def test_round_trip_xi_07(self):
        intr = Intrinsics(400.0, 0.7, (640, 480))
        rng = np.random.default_rng(2)
        pix = np.stack(
            [rng.uniform(0, 640, 2000), rng.uniform(0, 480, 2000)], axis=-1
        )
        again = project(backproject(pix, intr), intr)
        assert np.max(np.abs(again - pix)) < 1e-9


class TestRoundTripProperty:
    def test_project_backproject_identity_100k(self):
        rng = np.random.default_rng(3)
        n = 100_000
        xis = rng.uniform(0, 1, n)
        pix = np.stack([rng.uniform(0, 640, n), rng.uniform(0, 480, n)], axis=-1)
        worst = 0.0
        for xi in np.unique(np.round(xis, 2)):
            sel = np.round(xis, 2) == xi
            intr = Intrinsics(350.0, float(xi), (640, 480))
            again = project(backproject(pix[sel], intr), intr)
            worst = max(worst, float(np.max(np.abs(again - pix[sel]))))
        assert worst < 1e-9

    def test_pinhole_agreement(self):
        intr = Intrinsics(263.0, 0.0, (640, 480))
        rng = np.random.default_rng(4)
        pts = rng.uniform(-1, 1, size=(10_000, 3))
        pts[:, 2] = rng.uniform(0.1, 5.0, 10_000)
        uv = project(pts, intr)
        ref_u = intr.focal_px * pts[:, 0] / pts[:, 2] + intr.u0
        ref_v = intr.focal_px * pts[:, 1] / pts[:, 2] + intr.v0
        assert np.max(np.abs(uv[:, 0] - ref_u)) < 1e-12
        assert np.max(np.abs(uv[:, 1] - ref_v)) < 1e-12


class TestFov:
    def test_pinhole_90_degrees(self):
        intr = Intrinsics(112.0, 0.0, (224, 224))
        assert effective_hfov(intr) == pytest.approx(math.pi / 2, abs=1e-12)

    def test_wide_fisheye_operating_point_round_trips(self):
        hfov = math.radians(145.0)
        f = focal_from_fov(hfov, 0.93, 112.0)
        intr = Intrinsics(f, 0.93, (224, 224))
        assert effective_hfov(intr) == pytest.approx(hfov, abs=1e-9)

    def test_long_focal_limit(self):
        intr = Intrinsics(1e6 * 112.0, 0.0, (224, 224))
        assert effective_hfov(intr) < 1e-3

    def test_monotone_decreasing_in_focal(self):
        fs = np.linspace(60, 4000, 50)
        for xi in (0.0, 0.5, 1.0):
            h = [effective_hfov(Intrinsics(f, xi, (224, 224))) for f in fs]
            assert all(a > b for a, b in zip(h, h[1:]))

    def test_focal_from_fov_pinhole(self):
        assert focal_from_fov(math.pi / 2, 0.0, 112.0) == pytest.approx(112.0, abs=1e-12)

    def test_focal_from_fov_matches_bisection_oracle(self):
        # oracle frozen from a 200-step bisection of effective_hfov
        f = focal_from_fov(math.radians(145.0), 0.93, 112.0)
        assert f == pytest.approx(144.528258029113, abs=1e-8)

    def test_invalid_fov(self):
        for bad in (0.0, -0.2, math.pi, 4.0):
            with pytest.raises(InvalidFov):
                focal_from_fov(bad, 0.2, 112.0)

    def test_scale_invariance(self):
        base = Intrinsics(300.0, 0.4, (640, 480))
        h0 = effective_hfov(base)
        for s in (0.25, 2.0, 17.0):
            scaled = Intrinsics(300.0 * s, 0.4, (640 * s, 480 * s))
            assert effective_hfov(scaled) == pytest.approx(h0, abs=1e-12)

    def test_xi_from_fov_focal_pinhole(self):
        assert xi_from_fov_focal(math.pi / 2, 112.0, 112.0) == pytest.approx(0.0, abs=1e-12)
        for f in (80.0, 250.0, 1234.5):
            hfov = 2 * math.atan(112.0 / f)
            assert xi_from_fov_focal(hfov, f, 112.0) == pytest.approx(0.0, abs=1e-12)

    def test_xi_out_of_model_range(self):
        hfov = 2 * math.atan(112.0 / 200.0)
        # xi exceeds 1 once f grows past (1 + 1/cos(hfov/2)) times the
        # pinhole-consistent focal; tripling is comfortably beyond.
        with pytest.raises(OutOfModelRange):
            xi_from_fov_focal(hfov, 600.0, 112.0)
        with pytest.raises(OutOfModelRange):
            xi_from_fov_focal(hfov, 100.0, 112.0)  # below pinhole: xi < 0

    def test_round_trip_grid(self):
        for f in np.linspace(50, 5000, 12):
            for xi in (0.0, 0.25, 0.5, 0.75, 1.0):
                intr = Intrinsics(float(f), xi, (224, 224))
                h = effective_hfov(intr)
                if not 0 < h < math.pi:
                    continue
                assert focal_from_fov(h, xi, 112.0) == pytest.approx(f, abs=1e-9)
                assert xi_from_fov_focal(h, float(f), 112.0) == pytest.approx(
                    xi, abs=1e-9
                )


class TestHorizonMidpoint:
    def test_level_camera(self):
        assert horizon_midpoint(Orientation(0, 0), INTR) == 0.0

    def test_pinhole_matches_tan_formula(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        for theta in (-0.8, -0.2, 0.1, 0.6):
            v_m = horizon_midpoint(Orientation(theta, 0), intr)
            b_p = v_units_to_pixel(v_m, intr)
            assert b_p == pytest.approx(-intr.focal_px * math.tan(theta) + intr.v0, abs=1e-9)

    def test_matches_projected_forward_horizon_direction(self):
        intr = Intrinsics(300.0, 0.5, (448, 224))
        theta = 0.2
        R = rotation_matrix(Orientation(theta, 0))
        uv = project(R @ np.array([0.0, 0.0, 1.0]), intr)
        v_m = horizon_midpoint(Orientation(theta, 0), intr)
        assert uv[1] == pytest.approx(v_units_to_pixel(v_m, intr), abs=1e-9)
        assert uv[0] == pytest.approx(intr.u0, abs=1e-9)

    def test_at_infinity(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        with pytest.raises(HorizonAtInfinity):
            horizon_midpoint(Orientation(math.pi / 2, 0), intr)


class TestPitchFromMidpoint:
    def test_zero(self):
        assert pitch_from_midpoint(0.0, INTR) == 0.0

    def test_round_trip_1000_random(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(1000):
            theta = rng.uniform(-1.2, 1.2)
            intr = Intrinsics(rng.uniform(80, 2000), rng.uniform(0, 1), (640, 480))
            v_m = horizon_midpoint(Orientation(theta, 0), intr)
            worst = max(worst, abs(pitch_from_midpoint(v_m, intr) - theta))
        assert worst < 1e-9

    def test_pinhole_closed_form(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        b_p = -intr.focal_px * math.tan(0.3) + intr.v0
        v_m = float(v_pixel_to_units(b_p, intr))
        assert pitch_from_midpoint(v_m, intr) == pytest.approx(0.3, abs=1e-12)

    def test_unreachable_midpoint(self):
        intr = Intrinsics(112.0, 1.0, (224, 224))
        with pytest.raises(NoValidPitch):
            pitch_from_midpoint(1.5, intr)  # k = 1.5 > 1/xi


class TestRescale:
    def test_halving(self):
        intr = Intrinsics(1000.0, 0.37, (640, 480))
        out = rescale_intrinsics(intr, 2.0)
        assert out.focal_px == 500.0
        assert out.xi == 0.37
        assert out.image_size == (320.0, 240.0)
        assert out.principal_point == (160.0, 120.0)

    def test_identity(self):
        assert rescale_intrinsics(INTR, 1.0) == INTR

    def test_hfov_invariant(self):
        h0 = effective_hfov(INTR)
        for s in (0.5, 2, 3.7):
            assert effective_hfov(rescale_intrinsics(INTR, s)) == pytest.approx(
                h0, abs=1e-12
            )

    def test_projection_commutes(self):
        rng = np.random.default_rng(6)
        pts = rng.uniform(-1, 1, (500, 3))
        pts[:, 2] = rng.uniform(0.5, 4.0, 500)
        for s in (0.5, 2.0, 3.0):
            small = rescale_intrinsics(INTR, s)
            assert np.max(np.abs(project(pts, small) - project(pts, INTR) / s)) < 1e-9


def tls_line_residual(points):
    """Max orthogonal residual of a total-least-squares line fit."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    return float(np.max(np.abs(centered @ normal)))


class TestHorizonCurve:
    def test_pinhole_curve_is_straight(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        pts = horizon_curve(Orientation(0.2, 0.1), intr, 256)
        assert len(pts) > 10
        assert tls_line_residual(pts) < 1e-6

    def test_distorted_curve_bends(self):
        intr = Intrinsics(
            focal_from_fov(2.2, 0.9, 112.0), 0.9, (224, 224)
        )
        pts = horizon_curve(Orientation(0.2, 0.0), intr, 512)
        inside = pts[(pts[:, 0] >= 0) & (pts[:, 0] <= 224)]
        assert tls_line_residual(inside) > 1.0  # visible sagitta

    def test_level_camera_any_xi(self):
        for xi in (0.0, 0.4, 1.0):
            intr = Intrinsics(200.0, xi, (448, 224))
            pts = horizon_curve(Orientation(0, 0), intr, 128)
            assert np.max(np.abs(pts[:, 1] - intr.v0)) < 1e-9

    def test_empty_for_pinhole_looking_straight_up(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        with pytest.raises(EmptyHorizon):
            horizon_curve(Orientation(math.pi / 2, 0), intr, 64)

    def test_rejects_bad_sample_count(self):
        with pytest.raises(ValueError):
            horizon_curve(Orientation(0, 0), INTR, 1)


class TestHorizonEndpoints:
    def test_level_pinhole(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        assert horizon_endpoints(Orientation(0, 0), intr) == (0.0, 0.0)

    def test_roll_only_matches_line_geometry(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        for psi in (-0.3, 0.05, 0.4):
            v_left, v_right = horizon_endpoints(Orientation(0, psi), intr)
            expect = math.tan(psi) * intr.width / intr.height
            assert v_left == pytest.approx(expect, abs=1e-9)
            assert v_right == pytest.approx(-expect, abs=1e-9)

    def test_pitch_only_matches_midpoint_line(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        orient = Orientation(0.25, 0.0)
        v_m = horizon_midpoint(orient, intr)
        v_left, v_right = horizon_endpoints(orient, intr)
        assert v_left == pytest.approx(v_m, abs=1e-9)
        assert v_right == pytest.approx(v_m, abs=1e-9)

    def test_consistent_with_horizon_line_type(self):
        intr = Intrinsics(300.0, 0.0, (448, 224))
        orient = Orientation(0.0, 0.2)
        line = HorizonLine(horizon_midpoint(orient, intr), orient.roll_rad)
        v_left, v_right = horizon_endpoints(orient, intr)
        assert line.v_units_at(0.0, intr) == pytest.approx(v_left, abs=1e-9)
        assert line.v_units_at(intr.width, intr) == pytest.approx(v_right, abs=1e-9)


class TestIntrinsicsValidation:
    def test_rejects_bad_focal(self):
        with pytest.raises(ValueError):
            Intrinsics(0.0, 0.0, (10, 10))

    def test_rejects_xi_above_one(self):
        with pytest.raises(ValueError):
            Intrinsics(100.0, 1.2, (10, 10))

    def test_rejects_negative_xi(self):
        with pytest.raises(ValueError):
            Intrinsics(100.0, -0.1, (10, 10))

    def test_principal_point_defaults_to_center(self):
        intr = Intrinsics(100.0, 0.0, (640, 480))
        assert intr.principal_point == (320.0, 240.0)
