import math

import numpy as np
import pytest

from conftest import smooth_image
from spherecal.camera import Intrinsics, Orientation, focal_from_fov, horizon_curve
from spherecal.errors import EmptyIndex
from spherecal.horizon import (
    RetrievalIndex,
    build_index,
    draw_horizon,
    load_index,
    query,
    save_index,
)

INTR = Intrinsics(300.0, 0.0, (448, 224))


def fake_record(rec_id, pitch=0.0, roll=0.0, hfov=1.2, xi=0.0, aspect="1:1"):
    w = 224
    return {
        "id": rec_id,
        "pitch_rad": pitch,
        "roll_rad": roll,
        "hfov_rad": hfov,
        "xi": xi,
        "focal_px": focal_from_fov(hfov, xi, w / 2.0),
        "aspect": aspect,
    }


class TestDrawHorizon:
    def test_level_pinhole_draws_center_row(self):
        img = smooth_image(448, 224, seed=6)
        out = draw_horizon(img, Orientation(0, 0), INTR, thickness=2.0)
        diff = np.abs(out.pixels - img.pixels).max(axis=2)
        changed_rows = np.nonzero(diff.max(axis=1) > 0)[0]
        assert changed_rows.size > 0
        assert changed_rows.min() >= 110 and changed_rows.max() <= 113

    def test_changes_confined_to_stroke(self):
        img = smooth_image(448, 224, seed=7)
        thickness = 3.0
        orient = Orientation(0.1, 0.05)
        out = draw_horizon(img, orient, INTR, thickness=thickness)
        pts = horizon_curve(orient, INTR, 512)
        diff = np.abs(out.pixels - img.pixels).max(axis=2)
        ys, xs = np.nonzero(diff > 0)
        centers = np.stack([xs + 0.5, ys + 0.5], axis=-1)
        d = np.min(
            np.linalg.norm(centers[:, None, :] - pts[None, :, :], axis=-1), axis=1
        )
        assert d.max() <= thickness + 1.0

    def test_curved_overlay_for_high_distortion(self):
        xi = 0.9
        intr = Intrinsics(focal_from_fov(2.2, xi, 112.0), xi, (224, 224))
        pts = horizon_curve(Orientation(0.2, 0.0), intr, 512)
        inside = pts[(pts[:, 0] >= 0) & (pts[:, 0] <= 224)]
        chord = np.polyfit(inside[:, 0], inside[:, 1], 1)
        sagitta = np.max(np.abs(inside[:, 1] - np.polyval(chord, inside[:, 0])))
        assert sagitta > 1.0
        img = smooth_image(224, 224, seed=8)
        out = draw_horizon(img, Orientation(0.2, 0.0), intr)
        assert np.any(out.pixels != img.pixels)

    def test_gray_images_supported(self):
        img = smooth_image(64, 64, seed=9)
        gray = type(img)(img.pixels[:, :, :1])
        out = draw_horizon(gray, Orientation(0, 0), Intrinsics(80.0, 0.0, (64, 64)))
        assert out.channels == 1
        assert np.any(out.pixels != gray.pixels)


class TestBuildIndex:
    def test_empty_manifest(self):
        index, skipped = build_index([])
        assert len(index) == 0 and skipped == []

    def test_level_pinhole_feature_is_origin(self):
        index, skipped = build_index([fake_record("a")])
        assert skipped == []
        assert np.allclose(index.features[0], (0.0, 0.0), atol=1e-12)

    def test_stable_across_rebuilds(self):
        records = [
            fake_record(f"r{i}", pitch=0.05 * i, roll=0.02 * i, xi=0.1 * (i % 3))
            for i in range(8)
        ]
        a, _ = build_index(records)
        b, _ = build_index(records)
        assert a.ids == b.ids
        assert np.array_equal(a.features, b.features)

    def test_bad_records_skipped_and_reported(self):
        records = [fake_record("good"), {"id": "broken"}]
        index, skipped = build_index(records)
        assert index.ids == ["good"]
        assert skipped == ["broken"]

    def test_roll_mirror_swaps_features(self):
        a, _ = build_index([fake_record("a", roll=0.2)])
        b, _ = build_index([fake_record("b", roll=-0.2)])
        assert a.features[0][0] == pytest.approx(b.features[0][1], abs=1e-9)
        assert a.features[0][1] == pytest.approx(b.features[0][0], abs=1e-9)


class TestQuery:
    def make_index(self, rng, n=1000):
        feats = rng.uniform(-1.5, 1.5, size=(n, 2))
        return RetrievalIndex([f"id{i:04d}" for i in range(n)], feats)

    def test_exact_match_first(self):
        rng = np.random.default_rng(10)
        index = self.make_index(rng, 50)
        target = tuple(index.features[17])
        out = query(index, target, 3)
        assert out[0] == ("id0017", 0.0)

    def test_k_larger_than_index(self):
        rng = np.random.default_rng(11)
        index = self.make_index(rng, 5)
        assert len(query(index, (0.0, 0.0), 99)) == 5

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(12)
        index = self.make_index(rng, 1000)
        for _ in range(20):
            q = tuple(rng.uniform(-1.5, 1.5, 2))
            got = query(index, q, 10)
            # independent brute-force scan
            dists = [
                (math.hypot(f[0] - q[0], f[1] - q[1]), i)
                for i, f in enumerate(index.features)
            ]
            dists.sort(key=lambda t: (t[0], index.ids[t[1]]))
            expect = [(index.ids[i], d) for d, i in dists[:10]]
            assert [g[0] for g in got] == [e[0] for e in expect]
            assert np.allclose([g[1] for g in got], [e[1] for e in expect])

    def test_ties_break_by_id(self):
        index = RetrievalIndex(["zz", "aa"], np.array([[0.5, 0.5], [0.5, 0.5]]))
        out = query(index, (0.0, 0.0), 2)
        assert [o[0] for o in out] == ["aa", "zz"]

    def test_insertion_order_invariance(self):
        rng = np.random.default_rng(13)
        feats = rng.uniform(-1, 1, size=(30, 2))
        ids = [f"x{i}" for i in range(30)]
        fwd = RetrievalIndex(ids, feats)
        perm = rng.permutation(30)
        rev = RetrievalIndex([ids[i] for i in perm], feats[perm])
        q = (0.1, -0.2)
        assert query(fwd, q, 7) == query(rev, q, 7)

    def test_empty_index(self):
        with pytest.raises(EmptyIndex):
            query(RetrievalIndex([], np.zeros((0, 2))), (0, 0), 1)

    def test_bad_k(self):
        index = RetrievalIndex(["a"], np.zeros((1, 2)))
        with pytest.raises(ValueError):
            query(index, (0, 0), 0)


class TestIndexSerialization:
    def test_jsonl_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        index = RetrievalIndex(
            [f"id{i}" for i in range(9)], rng.uniform(-1, 1, (9, 2))
        )
        path = tmp_path / "index.jsonl"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.ids == index.ids
        assert np.array_equal(loaded.features, index.features)
