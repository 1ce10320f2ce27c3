"""Human-sensitivity measure over the joint (parameter value, error) space.

Two-alternative judgments ("which insertion looks most natural?") are
aggregated into a 7x7 grid of detection rates: 0.5 means observers cannot
tell a calibration error from ground truth, 1.0 means they always can.
Evaluation interpolates bilinearly between cell centers, which reproduces
every fitted cell rate exactly. Cells with too few observations (including
structurally impossible value/error combinations) are masked.

Values are treated as plain numbers; fit in whatever units the study data
uses. The bundled default ranges assume the conventional axes: degrees for
roll and field of view, normalized image units for pitch, raw units for
distortion — all approximate and overridable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingSurface, NoData

GRID_BINS = 7

PARAMETERS = ("pitch", "roll", "hfov", "xi")

# Approximate study axes; override per fit as needed.
DEFAULT_RANGES: dict[str, tuple[tuple[float, float], tuple[float, float]]] = {
    "pitch": ((-1.0, 1.0), (-0.6, 0.6)),
    "roll": ((-45.0, 45.0), (-20.0, 20.0)),
    "hfov": ((20.0, 150.0), (-55.0, 55.0)),
    "xi": ((0.0, 1.0), (-1.0, 1.0)),
}


@dataclass(frozen=True)
class JudgmentRecord:
    """One study judgment: did the observer pick the ground-truth render?"""

    parameter: str
    gt_value: float
    error: float  # perturbed minus ground truth, signed
    chose_gt: bool
    image_id: str = ""


@dataclass
class PerceptualSurface:
    """7x7 grid of detection rates with a validity mask."""

    parameter: str
    value_edges: np.ndarray  # (8,)
    error_edges: np.ndarray  # (8,)
    rates: np.ndarray  # (7, 7) value-major
    mask: np.ndarray  # (7, 7) bool, True where fitted
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.value_edges = np.asarray(self.value_edges, dtype=np.float64)
        self.error_edges = np.asarray(self.error_edges, dtype=np.float64)
        self.rates = np.asarray(self.rates, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.value_edges.shape != (GRID_BINS + 1,) or self.error_edges.shape != (
            GRID_BINS + 1,
        ):
            raise ValueError("edges must have 8 entries each")
        if self.rates.shape != (GRID_BINS, GRID_BINS) or self.mask.shape != (
            GRID_BINS,
            GRID_BINS,
        ):
            raise ValueError("rates/mask must be 7x7")
        if self.counts is None:
            self.counts = np.zeros((GRID_BINS, GRID_BINS), dtype=np.int64)

    @property
    def value_centers(self) -> np.ndarray:
        return 0.5 * (self.value_edges[:-1] + self.value_edges[1:])

    @property
    def error_centers(self) -> np.ndarray:
        return 0.5 * (self.error_edges[:-1] + self.error_edges[1:])


def read_judgments(path: str | Path) -> list[JudgmentRecord]:
    """Load study records from CSV (parameter,gt_value,error,chose_gt,image_id)."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                JudgmentRecord(
                    parameter=row["parameter"].strip(),
                    gt_value=float(row["gt_value"]),
                    error=float(row["error"]),
                    chose_gt=row["chose_gt"].strip().lower() in ("1", "true", "yes"),
                    image_id=row.get("image_id", "").strip(),
                )
            )
    return records


def _bin_indices(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Half-open binning with the last bin closed; -1 for out of range."""
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values == edges[-1]] = len(edges) - 2
    idx[(values < edges[0]) | (values > edges[-1])] = -1
    return idx


def fit_surface(
    records: list[JudgmentRecord],
    parameter: str,
    value_range: tuple[float, float] | None = None,
    error_range: tuple[float, float] | None = None,
    min_count: int = 5,
) -> PerceptualSurface:
    """Bin judgments into the 7x7 grid and average the detection rates.

    Cells with fewer than ``min_count`` records are masked; out-of-range
    records are ignored.

    Raises:
        NoData: if no records match the parameter or every cell is masked.
    """
    recs = [r for r in records if r.parameter == parameter]
    if not recs:
        raise NoData(f"no records for parameter {parameter!r}")
    if value_range is None or error_range is None:
        default = DEFAULT_RANGES.get(parameter)
        if default is None:
            vs = [r.gt_value for r in recs]
            es = [r.error for r in recs]
            default = ((min(vs), max(vs)), (min(es), max(es)))
        value_range = value_range or default[0]
        error_range = error_range or default[1]
    value_edges = np.linspace(value_range[0], value_range[1], GRID_BINS + 1)
    error_edges = np.linspace(error_range[0], error_range[1], GRID_BINS + 1)
    vals = np.asarray([r.gt_value for r in recs])
    errs = np.asarray([r.error for r in recs])
    chose = np.asarray([r.chose_gt for r in recs], dtype=np.float64)
    vi = _bin_indices(vals, value_edges)
    ei = _bin_indices(errs, error_edges)
    keep = (vi >= 0) & (ei >= 0)
    counts = np.zeros((GRID_BINS, GRID_BINS), dtype=np.int64)
    totals = np.zeros((GRID_BINS, GRID_BINS), dtype=np.float64)
    np.add.at(counts, (vi[keep], ei[keep]), 1)
    np.add.at(totals, (vi[keep], ei[keep]), chose[keep])
    mask = counts >= max(1, min_count)
    if not mask.any():
        raise NoData(f"all cells masked for parameter {parameter!r}")
    rates = np.zeros((GRID_BINS, GRID_BINS))
    rates[mask] = totals[mask] / counts[mask]
    return PerceptualSurface(parameter, value_edges, error_edges, rates, mask, counts)


def _interp_axis(centers: np.ndarray, q: float) -> tuple[int, int, float]:
    """Clamped linear interpolation setup along one axis of cell centers."""
    if q <= centers[0]:
        return 0, 0, 0.0
    if q >= centers[-1]:
        return len(centers) - 1, len(centers) - 1, 0.0
    hi = int(np.searchsorted(centers, q))
    lo = hi - 1
    t = (q - centers[lo]) / (centers[hi] - centers[lo])
    return lo, hi, float(t)


def evaluate_detailed(
    surface: PerceptualSurface, gt_value: float, error: float
) -> tuple[float, bool]:
    """Detectability plus a degraded-confidence flag.

    Bilinear interpolation over unmasked cell centers with weights
    renormalized around masked neighbors; queries outside the grid clamp to
    the nearest center. When the whole 4-neighborhood is masked, the
    nearest unmasked cell's rate is returned with the flag set.

    Raises:
        NoData: if the surface has no unmasked cell at all.
    """
    if not surface.mask.any():
        raise NoData("surface is entirely masked")
    vlo, vhi, tv = _interp_axis(surface.value_centers, gt_value)
    elo, ehi, te = _interp_axis(surface.error_centers, error)
    cells = ((vlo, elo), (vlo, ehi), (vhi, elo), (vhi, ehi))
    weights = (
        (1.0 - tv) * (1.0 - te),
        (1.0 - tv) * te,
        tv * (1.0 - te),
        tv * te,
    )
    num = 0.0
    den = 0.0
    for (i, j), w in zip(cells, weights):
        if surface.mask[i, j]:
            num += w * surface.rates[i, j]
            den += w
    if den > 0.0:
        return num / den, False
    # Fully masked neighborhood: nearest unmasked cell in normalized
    # grid-index space, ties toward lower indices.
    vi, ej = np.nonzero(surface.mask)
    vq = np.interp(gt_value, surface.value_centers, np.arange(GRID_BINS))
    eq = np.interp(error, surface.error_centers, np.arange(GRID_BINS))
    d2 = (vi - vq) ** 2 + (ej - eq) ** 2
    best = int(np.argmin(d2))
    return float(surface.rates[vi[best], ej[best]]), True


def evaluate(surface: PerceptualSurface, gt_value: float, error: float) -> float:
    """Probability that a human notices this calibration error (0.5..1)."""
    return evaluate_detailed(surface, gt_value, error)[0]


@dataclass(frozen=True)
class MarginalBin:
    error_lo: float
    error_hi: float
    median: float
    q1: float
    q3: float
    n_images: int


def marginal_sensitivity(
    records: list[JudgmentRecord],
    parameter: str,
    n_bins: int = 10,
    error_range: tuple[float, float] | None = None,
) -> list[MarginalBin]:
    """Per-error-bin median and quartiles of per-image detection rates.

    Records are grouped by image id (each image carries one error level);
    the per-image rate is the fraction of its judgments picking ground
    truth.
    """
    recs = [r for r in records if r.parameter == parameter]
    if not recs:
        raise NoData(f"no records for parameter {parameter!r}")
    by_image: dict[str, list[JudgmentRecord]] = {}
    for r in recs:
        by_image.setdefault(r.image_id, []).append(r)
    errors = np.asarray([np.mean([r.error for r in v]) for v in by_image.values()])
    rates = np.asarray(
        [np.mean([float(r.chose_gt) for r in v]) for v in by_image.values()]
    )
    if error_range is None:
        error_range = (float(errors.min()), float(errors.max()))
    edges = np.linspace(error_range[0], error_range[1], n_bins + 1)
    idx = _bin_indices(errors, edges)
    out = []
    for b in range(n_bins):
        sel = rates[idx == b]
        if sel.size == 0:
            continue
        q1, med, q3 = np.percentile(sel, [25.0, 50.0, 75.0])
        out.append(
            MarginalBin(
                float(edges[b]), float(edges[b + 1]), float(med), float(q1), float(q3), sel.size
            )
        )
    return out


@dataclass(frozen=True)
class ScoreSummary:
    median: float
    q1: float
    q3: float
    mean: float
    n: int


def score_method(
    surfaces: dict[str, PerceptualSurface],
    estimates: list[tuple[str, float, float]],
) -> dict[str, ScoreSummary]:
    """Score (parameter, gt_value, estimate) triples through the surfaces.

    Lower is better; 0.5 means the method's errors are indistinguishable
    from ground truth to a human observer.

    Raises:
        MissingSurface: for parameters present in the input but not fitted.
    """
    per_param: dict[str, list[float]] = {}
    for parameter, gt_value, estimate in estimates:
        surface = surfaces.get(parameter)
        if surface is None:
            raise MissingSurface(f"no fitted surface for parameter {parameter!r}")
        per_param.setdefault(parameter, []).append(
            evaluate(surface, gt_value, estimate - gt_value)
        )
    out = {}
    for parameter, vals in per_param.items():
        arr = np.asarray(vals)
        q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
        out[parameter] = ScoreSummary(
            float(med), float(q1), float(q3), float(arr.mean()), arr.size
        )
    return out


def surface_to_json(surface: PerceptualSurface) -> str:
    rates = [
        [surface.rates[i, j] if surface.mask[i, j] else None for j in range(GRID_BINS)]
        for i in range(GRID_BINS)
    ]
    return json.dumps(
        {
            "parameter": surface.parameter,
            "value_edges": surface.value_edges.tolist(),
            "error_edges": surface.error_edges.tolist(),
            "rates": rates,
            "counts": surface.counts.tolist(),
        },
        indent=2,
    )


def surface_from_json(text: str) -> PerceptualSurface:
    payload = json.loads(text)
    raw = payload["rates"]
    mask = np.asarray([[cell is not None for cell in row] for row in raw])
    rates = np.asarray([[cell if cell is not None else 0.0 for cell in row] for row in raw])
    counts = np.asarray(payload.get("counts", np.zeros_like(rates)), dtype=np.int64)
    return PerceptualSurface(
        payload["parameter"],
        np.asarray(payload["value_edges"]),
        np.asarray(payload["error_edges"]),
        rates,
        mask,
        counts,
    )


def save_surface(surface: PerceptualSurface, path: str | Path) -> None:
    Path(path).write_text(surface_to_json(surface))


def load_surface(path: str | Path) -> PerceptualSurface:
    return surface_from_json(Path(path).read_text())
