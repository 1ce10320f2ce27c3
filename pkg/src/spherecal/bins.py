"""Classification-bin codec for the four calibration network heads.

Continuous camera parameters become probability distributions over fixed
bins (the training targets) and head outputs decode back to parameter
values. Bins are half-open ``[lo, hi)`` with the last bin closed. Three
heads use 256 uniform bins — field of view on [0.33, 2.6] rad, distortion
on [0, 1], horizon midpoint on [-1.6, 1.6] — while roll uses variable bins
on [-pi/2, pi/2] that shrink near zero (see :func:`construct_roll_bins`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HFOV_RANGE = (0.33, 2.6)
XI_RANGE = (0.0, 1.0)
MIDPOINT_RANGE = (-1.6, 1.6)
ROLL_RANGE = (-math.pi / 2.0, math.pi / 2.0)
UNIFORM_BIN_COUNT = 256

PARAMETERS = ("roll", "midpoint", "hfov", "xi")


@dataclass(frozen=True)
class BinSpec:
    """Bin-edge layout for one parameter head."""

    parameter: str
    edges: np.ndarray

    def __post_init__(self) -> None:
        e = np.asarray(self.edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2:
            raise ValueError("edges must be a 1-D array with at least 2 entries")
        if not np.all(np.diff(e) > 0):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", e)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def find_bin(self, value: float) -> tuple[int, bool]:
        """Containing bin index and a flag for out-of-range (clamped) values."""
        if value < self.lo:
            return 0, True
        if value >= self.hi:
            # hi itself belongs to the last (closed) bin; beyond is clamped.
            return self.n_bins - 1, value > self.hi
        idx = int(np.searchsorted(self.edges, value, side="right")) - 1
        return min(idx, self.n_bins - 1), False


@dataclass
class BinDistribution:
    """Probability vector aligned with a BinSpec; sums to 1."""

    probs: np.ndarray
    clamped: bool = False

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError("probs must be 1-D")
        if np.any(p < 0):
            raise ValueError("probs must be non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probs must sum to 1, got {p.sum()}")
        self.probs = p


def uniform_bins(parameter: str, lo: float, hi: float, n: int = UNIFORM_BIN_COUNT) -> BinSpec:
    return BinSpec(parameter, np.linspace(lo, hi, n + 1))


def construct_roll_bins(a: float = 0.044, b: float = 0.04) -> BinSpec:
    """Roll bins that tighten near zero for finer estimates there.

    Edges grow outward from 0 with local width ``a - b exp(-2 e^2)``
    evaluated at the inner edge, so the two bins adjacent to zero have
    width ``a - b`` and widths increase monotonically toward ``a``. The
    last edge is clamped to pi/2 and the layout is mirrored for negative
    rolls, making the edges exactly symmetric about zero.
    """
    if not a > b > 0:
        raise ValueError(f"need a > b > 0, got a={a}, b={b}")
    limit = math.pi / 2.0
    edges = [0.0]
    while edges[-1] < limit:
        e = edges[-1]
        nxt = e + (a - b * math.exp(-2.0 * e * e))
        edges.append(min(nxt, limit))
    pos = np.asarray(edges)
    full = np.concatenate((-pos[:0:-1], pos))
    return BinSpec("roll", full)


def default_bin_specs() -> dict[str, BinSpec]:
    """The four head layouts keyed by parameter name."""
    return {
        "roll": construct_roll_bins(),
        "midpoint": uniform_bins("midpoint", *MIDPOINT_RANGE),
        "hfov": uniform_bins("hfov", *HFOV_RANGE),
        "xi": uniform_bins("xi", *XI_RANGE),
    }


def encode(
    value: float, spec: BinSpec, smoothing_sigma: float | None = None
) -> BinDistribution:
    """Encode a parameter value as a distribution over ``spec``'s bins.

    ``smoothing_sigma`` is in parameter units: 0 gives a one-hot at the
    containing bin; positive values spread a Gaussian (centered on the
    containing bin's center) over all bin centers, renormalized. ``None``
    defaults to the containing bin's width. Out-of-range values clamp to
    the nearest bin and set the distribution's ``clamped`` flag.
    """
    idx, clamped = spec.find_bin(value)
    if smoothing_sigma is None:
        smoothing_sigma = float(spec.widths[idx])
    if smoothing_sigma < 0:
        raise ValueError(f"smoothing_sigma must be >= 0, got {smoothing_sigma}")
    if smoothing_sigma == 0.0:
        probs = np.zeros(spec.n_bins)
        probs[idx] = 1.0
        return BinDistribution(probs, clamped=clamped)
    center = spec.centers[idx]
    z = (spec.centers - center) / smoothing_sigma
    w = np.exp(-0.5 * z * z)
    return BinDistribution(w / w.sum(), clamped=clamped)


def decode(dist: BinDistribution, spec: BinSpec, mode: str = "argmax_center") -> float:
    """Decode a head distribution back to a parameter value.

    ``argmax_center`` returns the center of the most probable bin (ties go
    to the lower index); ``expectation`` returns the probability-weighted
    mean of bin centers.
    """
    if dist.probs.size != spec.n_bins:
        raise ValueError(
            f"distribution has {dist.probs.size} bins, spec has {spec.n_bins}"
        )
    if mode == "argmax_center":
        return float(spec.centers[int(np.argmax(dist.probs))])
    if mode == "expectation":
        return float(np.dot(dist.probs, spec.centers))
    raise ValueError(f"unknown decode mode: {mode!r}")


def kl_loss(target: BinDistribution, predicted: BinDistribution) -> float:
    """Kullback-Leibler divergence KL(target || predicted).

    Predicted probabilities are floored at 1e-12 and ``0 log 0`` is 0.
    Non-negative by Gibbs' inequality, zero iff the inputs match.
    """
    t = target.probs
    p = np.maximum(predicted.probs, 1e-12)
    nz = t > 0
    return float(np.sum(t[nz] * np.log(t[nz] / p[nz])))


def bin_specs_to_json(specs: dict[str, BinSpec]) -> str:
    payload = {
        name: {"parameter": s.parameter, "edges": s.edges.tolist()}
        for name, s in specs.items()
    }
    return json.dumps(payload, indent=2)


def bin_specs_from_json(text: str) -> dict[str, BinSpec]:
    payload = json.loads(text)
    return {
        name: BinSpec(entry["parameter"], np.asarray(entry["edges"]))
        for name, entry in payload.items()
    }


def save_bin_specs(specs: dict[str, BinSpec], path: str | Path) -> None:
    Path(path).write_text(bin_specs_to_json(specs))


def load_bin_specs(path: str | Path) -> dict[str, BinSpec]:
    return bin_specs_from_json(Path(path).read_text())
