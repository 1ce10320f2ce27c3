"""Dataset loading against the generator's published file formats.

Everything here is rebuilt from the serialized artifacts alone: the JSONL
manifest, the PNG crops, and the bin-edge JSON. Target encoding is
re-implemented against those edges with the same semantics as the
generator's codec (half-open bins with the last bin closed, Gaussian over
bin centers with sigma defaulting to the containing bin's width) and is
cross-checked against generator-emitted golden encodings in the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

HEADS = ("roll", "midpoint", "hfov", "xi")

MANIFEST_VALUE_KEYS = {
    "roll": "roll_rad",
    "midpoint": "midpoint_units",
    "hfov": "hfov_rad",
    "xi": "xi",
}


@dataclass(frozen=True)
class BinLayout:
    parameter: str
    edges: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def find_bin(self, value: float) -> int:
        if value < self.edges[0]:
            return 0
        if value >= self.edges[-1]:
            return self.n_bins - 1
        return min(
            int(np.searchsorted(self.edges, value, side="right")) - 1, self.n_bins - 1
        )

    def encode(self, value: float, sigma: float | None = None) -> np.ndarray:
        idx = self.find_bin(value)
        if sigma is None:
            sigma = float(self.widths[idx])
        if sigma == 0.0:
            probs = np.zeros(self.n_bins)
            probs[idx] = 1.0
            return probs
        z = (self.centers - self.centers[idx]) / sigma
        w = np.exp(-0.5 * z * z)
        return w / w.sum()

    def decode_argmax(self, probs: np.ndarray) -> float:
        return float(self.centers[int(np.argmax(probs))])


def load_bins(path: str | Path) -> dict[str, BinLayout]:
    payload = json.loads(Path(path).read_text())
    layouts = {
        name: BinLayout(entry["parameter"], np.asarray(entry["edges"], dtype=np.float64))
        for name, entry in payload.items()
    }
    missing = set(HEADS) - set(layouts)
    if missing:
        raise ValueError(f"bin JSON lacks heads: {sorted(missing)}")
    return layouts


def load_manifest(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _load_image(path: Path, side: int) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("RGB").resize((side, side), Image.BILINEAR)
        return np.asarray(img, dtype=np.float32) / 255.0


class CropDataset:
    """In-memory (image, target distributions) pairs for desk-scale runs.

    Items are ``(image, targets)`` with image as float32 CHW in [0, 1] and
    ``targets`` a dict of float32 probability vectors keyed by head name.
    """

    def __init__(
        self,
        manifest_path: str | Path,
        bins_path: str | Path,
        input_side: int = 64,
        split: str | None = None,
    ) -> None:
        self.layouts = load_bins(bins_path)
        root = Path(manifest_path).parent
        records = load_manifest(manifest_path)
        if split is not None:
            records = [r for r in records if r.get("split") == split]
        self.records = records
        self.images = np.stack(
            [_load_image(root / rec["file"], input_side) for rec in records]
        ).transpose(0, 3, 1, 2) if records else np.zeros((0, 3, input_side, input_side), np.float32)
        self.targets = {
            head: np.stack(
                [
                    self.layouts[head].encode(rec[MANIFEST_VALUE_KEYS[head]])
                    for rec in records
                ]
            ).astype(np.float32)
            if records
            else np.zeros((0, self.layouts[head].n_bins), np.float32)
            for head in HEADS
        }

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, idx: int):
        return self.images[idx], {h: self.targets[h][idx] for h in HEADS}

    def value(self, idx: int, head: str) -> float:
        return float(self.records[idx][MANIFEST_VALUE_KEYS[head]])


def load_dataset(
    manifest_path: str | Path,
    bins_path: str | Path,
    input_side: int = 64,
    split: str | None = None,
) -> CropDataset:
    return CropDataset(manifest_path, bins_path, input_side, split)
