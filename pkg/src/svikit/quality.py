"""Image quality gates: contrast, tone-mapping score, and the road check.

Flat (non-panoramic) street-view photos vary wildly in quality; the two
scores plus a road presence check weed out images that are too dark, too
bright, washed out, or that show no street at all. An image passes when

    T_min < T
    C_min < C + max(0, T - T_floor)

with strict inequalities; a strong tone-mapping score can compensate for
slightly weak contrast. Thresholds default to C_min = T_min = 0.35 and
T_floor = 0.8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import SvikitError
from .panorama import ColumnScores, CropSpec, PeakParams, column_road_scores, find_center_lines
from .segmentation import RoadMask


class QualityError(SvikitError):
    pass


REJECT_LOW_TONE = "LowTone"
REJECT_LOW_CONTRAST = "LowContrast"
REJECT_NO_ROAD = "NoRoad"


@dataclass(frozen=True)
class QualityThresholds:
    c_min: float = 0.35
    t_min: float = 0.35
    t_floor: float = 0.8

    def __post_init__(self) -> None:
        for name in ("c_min", "t_min", "t_floor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise QualityError(f"{name}={v} outside [0, 1]")


@dataclass
class QualityReport:
    contrast: float
    tonemap: float
    road_check: bool
    passed: bool
    reject_reason: str | None = None


def luminance(image: np.ndarray) -> np.ndarray:
    """Per-pixel luminance in [0, 1]: Rec. 601 weights on 8-bit channels."""
    arr = np.asarray(image)
    if arr.size == 0:
        raise QualityError("empty raster")
    arr = arr.astype(np.float64)
    if arr.ndim == 2:
        return arr / 255.0
    if arr.ndim == 3 and arr.shape[2] >= 3:
        r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
        return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0
    raise QualityError(f"unsupported raster shape {arr.shape}")


def contrast_score(image: np.ndarray) -> float:
    """Contrast C: spread between the 1st and 99th luminance percentiles."""
    lum = luminance(image)
    p1, p99 = np.percentile(lum, [1, 99])
    return float(p99 - p1)


def tonemap_score(image: np.ndarray) -> float:
    """Tone-mapping score T in [0, 1].

    From the normalized 64-bin luminance histogram h:
    mass in the 8 darkest / 8 brightest bins above 0.2 is penalized
    linearly (zero tolerance left at mass 1.0), scaled by the fraction of
    bins carrying at least 1/256 of the pixels. Too-dark, too-bright, and
    poorly spread histograms all drive T toward 0.
    """
    lum = luminance(image)
    bins = np.minimum((lum * 64).astype(np.int64), 63)
    hist = np.bincount(bins.ravel(), minlength=64).astype(np.float64) / lum.size
    spread = float(np.count_nonzero(hist >= 1.0 / 256.0)) / 64.0
    m_dark = float(hist[:8].sum())
    m_bright = float(hist[56:].sum())
    dark_factor = 1.0 - min(max(m_dark - 0.2, 0.0), 1.0) / 0.8
    bright_factor = 1.0 - min(max(m_bright - 0.2, 0.0), 1.0) / 0.8
    return spread * dark_factor * bright_factor


def quality_pass(
    contrast: float, tonemap: float, thresholds: QualityThresholds | None = None
) -> tuple[bool, str | None]:
    """Apply the two threshold inequalities; the tone test is checked first."""
    th = thresholds or QualityThresholds()
    if not th.t_min < tonemap:
        return False, REJECT_LOW_TONE
    if not th.c_min < contrast + max(0.0, tonemap - th.t_floor):
        return False, REJECT_LOW_CONTRAST
    return True, None


def road_check(mask: RoadMask | np.ndarray, k: float = 1.0 / 8.0, params: PeakParams | None = None) -> bool:
    """True when the center-line detector finds at least one road.
    Flat images get no wrap extension; only the top 3/4 of the mask is used."""
    bits = mask.bits if isinstance(mask, RoadMask) else np.asarray(mask, dtype=bool)
    if bits.size == 0:
        return False
    height, width = bits.shape
    cropped = bits[: height - height // 4]
    scores: ColumnScores = column_road_scores(cropped, k=k)
    return len(find_center_lines(scores, width, params)) >= 1


def centered_crop(width: int, height: int) -> CropSpec:
    """Largest centered window with an exact 4:3 ratio."""
    unit = min(height // 3, width // 4)
    if unit < 1:
        raise QualityError(f"image {width}x{height} too small for a 4:3 crop")
    crop_w, crop_h = 4 * unit, 3 * unit
    return CropSpec(
        center_x=width // 2,
        offset="center",
        x0=(width - crop_w) // 2,
        y0=(height - crop_h) // 2,
        width=crop_w,
        height=crop_h,
    )


def evaluate_image(
    image: np.ndarray,
    mask: RoadMask | np.ndarray | None,
    thresholds: QualityThresholds | None = None,
    require_road: bool = True,
    k: float = 1.0 / 8.0,
) -> tuple[QualityReport, CropSpec | None]:
    """Score one flat image and, if it passes, plan its centered 4:3 crop.

    ``mask`` may be None only when ``require_road`` is false (the road
    check is then reported as satisfied).
    """
    arr = np.asarray(image)
    if arr.ndim not in (2, 3):
        raise QualityError("expected a HxW or HxWxC raster")
    if mask is not None:
        bits = mask.bits if isinstance(mask, RoadMask) else np.asarray(mask, dtype=bool)
        if bits.shape[:2] != arr.shape[:2]:
            raise QualityError(f"mask {bits.shape[:2]} does not match image {arr.shape[:2]}")
    elif require_road:
        raise QualityError("road check requires a mask")

    c = contrast_score(arr)
    t = tonemap_score(arr)
    ok, reason = quality_pass(c, t, thresholds)
    has_road = road_check(mask, k=k) if require_road else True
    if ok and not has_road:
        ok, reason = False, REJECT_NO_ROAD
    report = QualityReport(contrast=c, tonemap=t, road_check=has_road, passed=ok, reject_reason=reason)
    crop = None
    if ok:
        crop = centered_crop(arr.shape[1], arr.shape[0])
    return report, crop
