import subprocess
import sys

import numpy as np
import pytest
from PIL import Image


def synth_pano(seed: int, width=1024, height=512) -> np.ndarray:
    """Equirectangular scene with a crisp horizon and varied texture."""
    rng = np.random.default_rng(seed)
    yy = np.linspace(0.0, 1.0, height)[:, None]
    xx = np.linspace(0.0, 1.0, width)[None, :]
    img = np.zeros((height, width, 3), dtype=np.float64)
    # sky: bright gradient with a sun blob and soft clouds
    sky = 0.85 - 0.45 * (yy / 0.5)
    sun_x, sun_y = rng.uniform(0.1, 0.9), rng.uniform(0.08, 0.35)
    sun = 0.5 * np.exp(-(((xx - sun_x) * 8) ** 2 + ((yy / 0.5 - sun_y * 2) * 8) ** 2))
    clouds = 0.08 * np.sin(2 * np.pi * (3 * xx + rng.uniform(0, 1))) * np.sin(
        2 * np.pi * (5 * yy + rng.uniform(0, 1))
    )
    # ground: dark with banded texture
    ground = 0.18 + 0.10 * np.sin(2 * np.pi * (9 * xx + rng.uniform(0, 1))) * np.cos(
        2 * np.pi * (7 * yy + rng.uniform(0, 1))
    )
    above = yy < 0.5
    for c, tint in enumerate((0.95, 0.97, 1.05)):
        img[..., c] = np.where(above, (sky + sun + clouds) * tint, ground * (2.0 - tint))
    img[height // 2 - 2 : height // 2 + 2, :, :] = 0.02  # crisp horizon edge
    return np.clip(img, 0.0, 1.0)


def run_spherecal(*args) -> None:
    cmd = [sys.executable, "-m", "spherecal.cli", *map(str, args)]
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.returncode != 0:
        raise RuntimeError(f"spherecal failed: {result.stderr}\n{result.stdout}")


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """2k-crop dataset generated through the spherecal CLI, plus bin/golden files."""
    root = tmp_path_factory.mktemp("desk")
    pano_dir = root / "panos"
    pano_dir.mkdir()
    for k in range(12):
        arr = (synth_pano(k) * 255.0).round().astype(np.uint8)
        Image.fromarray(arr).save(pano_dir / f"scene{k:02d}.png")
    out_dir = root / "dataset"
    run_spherecal(
        "dataset", "generate", "--panos", pano_dir, "--out", out_dir,
        "--count", 2000, "--seed", 9, "--threads", 8,
    )
    bins_path = root / "bins.json"
    run_spherecal("bins", "export", "--out", bins_path)
    golden_path = root / "golden.jsonl"
    run_spherecal(
        "bins", "encode", "--manifest", out_dir / "manifest.jsonl",
        "--bins", bins_path, "--out", golden_path, "--limit", 64,
    )
    return {
        "manifest": out_dir / "manifest.jsonl",
        "bins": bins_path,
        "golden": golden_path,
    }
