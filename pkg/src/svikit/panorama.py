"""Road center-line detection and 4:3 crop planning for panoramas.

The detection pipeline works on a road mask of an equirectangular
panorama. The bottom quarter of the mask is discarded (it mostly shows
the camera vehicle; the horizon sits in the middle band), and the first
25% of the columns is appended on the right so that roads straddling the
seam are seen whole; duplicate detections introduced by the wrap are
merged afterwards.

Per column x of the prepared mask we score

    B(x)  rows between the bottom edge and the topmost road pixel (0 if none)
    C(x)  road pixels in the bottom half of the mask
    R(x) = B(x) + k * C(x)        (k defaults to 1/8)

Roads facing the camera appear as peaks of R. B carries the "looking
down the road" signal but is fooled by stray road pixels; C demands
substance behind a peak, damped by k so road flanks are not
overemphasized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import SvikitError
from .segmentation import RoadMask


class PanoramaError(SvikitError):
    pass


# Fraction of the original width appended on the right as wrap columns.
WRAP_FRACTION = 4  # one quarter

CROP_OFFSETS = ("left", "center", "right")


@dataclass
class ExtendedMask:
    """Bottom-quarter-cropped road mask with 25% wrap columns appended.

    ``original_width`` is the panorama width before any padding; the mask
    is ``(5*W/4) x (3*H/4)`` for a padded width W.
    """

    original_width: int
    original_height: int
    mask: np.ndarray

    @property
    def padded_width(self) -> int:
        return self.mask.shape[1] * WRAP_FRACTION // (WRAP_FRACTION + 1)

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass
class ColumnScores:
    B: np.ndarray
    C: np.ndarray
    k: float
    R: np.ndarray
    height: int


@dataclass
class PeakParams:
    """Knobs for peak finding; defaults follow the one-road-per-third rule."""

    min_separation_frac: float = 1.0 / 3.0   # of the original width
    wrap_tolerance_frac: float = 0.01        # dedup radius, of the original width
    min_b_frac: float = 0.2                  # B gate, fraction of mask height
    min_c_frac: float = 0.05                 # C gate, fraction of half the mask height


@dataclass
class CenterLineSet:
    """Detected road centers in original-panorama columns, sorted ascending."""

    centers: list[int] = field(default_factory=list)
    peak_scores: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.centers)


@dataclass
class CropSpec:
    """A planned 4:3 window within a source image; columns may wrap."""

    center_x: int
    offset: str
    x0: int
    y0: int
    width: int
    height: int
    image_id: int | None = None

    def __post_init__(self) -> None:
        if self.offset not in CROP_OFFSETS:
            raise PanoramaError(f"offset must be one of {CROP_OFFSETS}")
        if self.width * 3 != self.height * 4:
            raise PanoramaError(f"crop {self.width}x{self.height} is not 4:3")

    @property
    def window(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.width, self.height)


def _as_bits(mask: RoadMask | np.ndarray) -> np.ndarray:
    bits = mask.bits if isinstance(mask, RoadMask) else np.asarray(mask)
    return bits.astype(bool)


def prepare_extended_mask(mask: RoadMask | np.ndarray) -> ExtendedMask:
    """Crop the bottom quarter and append the first 25% of columns on the right.

    Widths not divisible by 4 are right-padded by duplicating the final
    column; reported centers always refer to original columns.
    """
    bits = _as_bits(mask)
    if bits.size == 0:
        raise PanoramaError("empty road mask")
    height, width = bits.shape
    pad = (-width) % WRAP_FRACTION
    if pad:
        bits = np.hstack([bits, np.repeat(bits[:, -1:], pad, axis=1)])
    padded = bits.shape[1]
    kept_rows = height - height // 4
    cropped = bits[:kept_rows]
    extended = np.hstack([cropped, cropped[:, : padded // WRAP_FRACTION]])
    return ExtendedMask(original_width=width, original_height=height, mask=extended)


def column_road_scores(mask: ExtendedMask | RoadMask | np.ndarray, k: float = 1.0 / 8.0) -> ColumnScores:
    """Compute B, C and R = B + k*C for every column."""
    if k <= 0:
        raise PanoramaError("k must be positive")
    bits = mask.mask if isinstance(mask, ExtendedMask) else _as_bits(mask)
    height = bits.shape[0]
    has_road = bits.any(axis=0)
    topmost = bits.argmax(axis=0)  # first True row per column
    b = np.where(has_road, height - topmost, 0).astype(np.int64)
    half_start = (height + 1) // 2
    c = bits[half_start:].sum(axis=0).astype(np.int64)
    r = b + k * c
    return ColumnScores(B=b, C=c, k=float(k), R=r, height=height)


def _wrap_geometry(n_columns: int, width: int) -> int | None:
    """Padded width of the extension the scores were computed over.

    Returns None when the scores cover exactly ``width`` columns (flat
    image, no wrap extension).
    """
    if n_columns == width:
        return None
    padded = width + (-width) % WRAP_FRACTION
    if n_columns == padded + padded // WRAP_FRACTION:
        return padded
    raise PanoramaError(
        f"scores cover {n_columns} columns; expected {width} (flat) or the 5/4 extension of {width}"
    )


def find_center_lines(scores: ColumnScores, width: int, params: PeakParams | None = None) -> CenterLineSet:
    """Find road center columns as peaks of R.

    Peaks must be at least W/3 apart and clear the B/C prominence gates;
    positions in the wrap extension are reduced modulo the panorama width
    and duplicates within the wrap tolerance are merged keeping the
    higher-scoring peak.
    """
    if params is None:
        params = PeakParams()
    r = np.asarray(scores.R, dtype=float)
    padded = _wrap_geometry(r.shape[0], width)

    min_sep = max(1.0, width * params.min_separation_frac)
    peaks, _ = find_peaks(r, distance=min_sep)

    b_gate = params.min_b_frac * scores.height
    c_gate = params.min_c_frac * (scores.height / 2.0)
    peaks = [int(p) for p in peaks if scores.B[p] >= b_gate and scores.C[p] >= c_gate]

    candidates: list[tuple[int, float]] = []
    for p in peaks:
        pos = p if padded is None else p % padded
        if pos >= width:  # inside right-padding columns; snap to the duplicated source
            pos = width - 1
        candidates.append((pos, float(r[p])))

    tol = params.wrap_tolerance_frac * width
    kept: list[tuple[int, float]] = []
    for pos, score in sorted(candidates, key=lambda t: (-t[1], t[0])):
        if all(wrap_circular_distance(pos, kpos, width) > tol for kpos, _ in kept):
            kept.append((pos, score))
    kept.sort(key=lambda t: t[0])
    return CenterLineSet(centers=[p for p, _ in kept], peak_scores=[s for _, s in kept])


def detect_centers(
    mask: RoadMask | np.ndarray, k: float = 1.0 / 8.0, params: PeakParams | None = None
) -> CenterLineSet:
    """Full pipeline: prepare, score, and find center lines for one panorama."""
    extended = prepare_extended_mask(mask)
    scores = column_road_scores(extended, k=k)
    return find_center_lines(scores, extended.original_width, params)


def plan_crops(center: int, width: int, height: int, image_id: int | None = None) -> list[CropSpec]:
    """Plan the three 4:3 crops for one road center.

    Crops are 90 degrees of horizontal field of view (W/4 columns wide,
    3W/16 rows tall) with lateral offsets of -30, 0 and +30 degrees
    (W/12 columns), vertically centered on the horizon row H/2.
    """
    if not 0 <= center < width:
        raise PanoramaError(f"center {center} outside [0, {width})")
    unit = width // 16
    if unit < 1:
        raise PanoramaError(f"panorama width {width} too small to crop")
    crop_w, crop_h = 4 * unit, 3 * unit
    if crop_h > height:
        raise PanoramaError(f"panorama height {height} cannot fit crop height {crop_h}")
    y0 = (height - crop_h) // 2
    step = width / 12.0
    specs = []
    for offset, x_center in zip(CROP_OFFSETS, (center - step, float(center), center + step)):
        xc = int(round(x_center)) % width
        x0 = (xc - crop_w // 2) % width
        specs.append(
            CropSpec(center_x=center, offset=offset, x0=x0, y0=y0, width=crop_w, height=crop_h, image_id=image_id)
        )
    return specs


def apply_crop(image: np.ndarray, spec: CropSpec) -> np.ndarray:
    """Extract the crop window, wrapping columns around the panorama seam.

    Pixels are copied verbatim; no resampling happens here.
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3):
        raise PanoramaError("expected a HxW or HxWxC raster")
    height, width = image.shape[0], image.shape[1]
    if spec.y0 < 0 or spec.y0 + spec.height > height:
        raise PanoramaError(f"crop rows [{spec.y0}, {spec.y0 + spec.height}) outside image height {height}")
    if spec.width > width or spec.x0 >= width:
        raise PanoramaError(f"crop window wider than source ({spec.width} > {width})")
    cols = (spec.x0 + np.arange(spec.width)) % width
    return image[spec.y0 : spec.y0 + spec.height][:, cols].copy()


def column_score_summary(scores: ColumnScores) -> dict[str, float]:
    """Compact B/C/R statistics for per-image processing logs."""
    return {
        "b_max": int(scores.B.max(initial=0)),
        "b_mean": float(np.mean(scores.B)) if scores.B.size else 0.0,
        "c_max": int(scores.C.max(initial=0)),
        "c_mean": float(np.mean(scores.C)) if scores.C.size else 0.0,
        "r_max": float(scores.R.max(initial=0.0)),
        "r_mean": float(np.mean(scores.R)) if scores.R.size else 0.0,
        "k": scores.k,
    }


def wrap_circular_distance(a: int, b: int, width: int) -> int:
    """Column distance on the panorama ring."""
    d = abs(a - b) % width
    return min(d, width - d)
