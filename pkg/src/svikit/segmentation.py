"""Per-pixel label matrices produced by an external segmenter.

This module defines the sidecar file format for segmentation output
(`<image_id>.labels.png`, a single-channel 8-bit PNG whose pixel values
are class ids), extracts binary road masks from it, and synthesizes
labeled panoramas with known road positions for use as a test oracle.
Running an actual segmentation model is out of scope: any segmenter that
can emit the sidecar format plugs in (see :data:`ADAPTER_CONTRACT`).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import SvikitError

# Cityscapes train-id class table; "road" is class 0.
DEFAULT_LABEL_MAP: dict[int, str] = {
    0: "road",
    1: "sidewalk",
    2: "building",
    3: "wall",
    4: "fence",
    5: "pole",
    6: "traffic light",
    7: "traffic sign",
    8: "vegetation",
    9: "terrain",
    10: "sky",
    11: "person",
    12: "rider",
    13: "car",
    14: "truck",
    15: "bus",
    16: "train",
    17: "motorcycle",
    18: "bicycle",
}

# Contract for plugging in an external segmenter: a shell command template
# that is given an image path and must write the label sidecar next to it.
ADAPTER_CONTRACT = "segment-command {image_path} -> writes {image_path_stem}.labels.png"


class SegmentationError(SvikitError):
    pass


@dataclass
class LabelMatrix:
    """A row-major matrix of class ids plus the id -> class-name table."""

    labels: np.ndarray
    label_map: dict[int, str]

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise SegmentationError("label matrix must be a non-empty 2-d array")
        present = np.unique(self.labels)
        missing = [int(v) for v in present if int(v) not in self.label_map]
        if missing:
            raise SegmentationError(f"class ids without label_map entry: {missing}")

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass
class RoadMask:
    """Boolean matrix, true where the pixel's class name is "road"."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise SegmentationError("road mask must be a 2-d array")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def load_label_map(path: str | os.PathLike) -> dict[int, str]:
    """Read a line-delimited ``id<TAB>name`` label-map file."""
    label_map: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                id_text, name = line.split("\t", 1)
                label_map[int(id_text)] = name
            except ValueError as exc:
                raise SegmentationError(f"{path}:{lineno}: expected 'id<TAB>name'") from exc
    if "road" not in label_map.values():
        raise SegmentationError(f"{path}: label map has no 'road' class")
    return label_map


def sidecar_path(image_path: str | os.PathLike) -> str:
    """Path of the label sidecar belonging to an image file."""
    stem, _ = os.path.splitext(os.fspath(image_path))
    return stem + ".labels.png"


def load_label_matrix(path: str | os.PathLike, label_map: dict[int, str] | None = None) -> LabelMatrix:
    """Load a sidecar PNG into a :class:`LabelMatrix`.

    The file must be a single-channel 8-bit image; every pixel value must
    have an entry in ``label_map`` (defaults to the Cityscapes table).
    """
    if label_map is None:
        label_map = DEFAULT_LABEL_MAP
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise SegmentationError(f"cannot read label sidecar {path}: {exc}") from exc
    if img.mode != "L":
        raise SegmentationError(f"{path}: expected single-channel 8-bit PNG, got mode {img.mode}")
    labels = np.asarray(img, dtype=np.uint8)
    return LabelMatrix(labels=labels, label_map=dict(label_map))


def write_label_matrix(matrix: LabelMatrix, path: str | os.PathLike) -> None:
    """Write a :class:`LabelMatrix` as the sidecar PNG format."""
    if matrix.labels.max(initial=0) > 255:
        raise SegmentationError("sidecar format holds 8-bit class ids only")
    Image.fromarray(matrix.labels.astype(np.uint8), mode="L").save(path, format="PNG")


def road_mask(matrix: LabelMatrix) -> RoadMask:
    """Binarize a label matrix into road / non-road."""
    road_ids = [cid for cid, name in matrix.label_map.items() if name == "road"]
    if not road_ids:
        raise SegmentationError("label map has no 'road' class")
    bits = np.isin(matrix.labels, road_ids)
    return RoadMask(bits=bits)


def synthesize_road_panorama(
    width: int,
    height: int,
    road_centers: list[int],
    road_half_width_at_bottom: int,
    horizon_row: int | None = None,
    background_id: int = 10,
    label_map: dict[int, str] | None = None,
) -> tuple[LabelMatrix, list[int]]:
    """Build a synthetic labeled panorama with triangular road regions.

    Each requested center produces a triangle whose apex sits on the
    horizon row (height/2 by default) and whose half-width grows linearly
    to ``road_half_width_at_bottom`` at the bottom row. Columns wrap
    around the panorama seam. Returns the matrix and the ground-truth
    center columns for assertions.
    """
    if label_map is None:
        label_map = DEFAULT_LABEL_MAP
    if width <= 0 or height <= 0:
        raise SegmentationError("panorama dimensions must be positive")
    centers = [int(c) for c in road_centers]
    for c in centers:
        if not 0 <= c < width:
            raise SegmentationError(f"road center {c} outside [0, {width})")
    if road_half_width_at_bottom < 0:
        raise SegmentationError("half width must be >= 0")
    horizon = height // 2 if horizon_row is None else int(horizon_row)
    if not 0 <= horizon < height:
        raise SegmentationError("horizon row outside the panorama")

    road_ids = [cid for cid, name in label_map.items() if name == "road"]
    if not road_ids:
        raise SegmentationError("label map has no 'road' class")
    road_id = road_ids[0]

    # Triangles are widest at the bottom row, so disjointness there implies
    # disjointness everywhere.
    occupied: set[int] = set()
    hw = int(road_half_width_at_bottom)
    for c in centers:
        cols = {(c + d) % width for d in range(-hw, hw + 1)}
        if cols & occupied:
            raise SegmentationError("overlapping road regions requested")
        occupied |= cols

    labels = np.full((height, width), background_id, dtype=np.uint8)
    span = max(1, height - 1 - horizon)
    for row in range(horizon, height):
        hw_row = int(round(hw * (row - horizon) / span))
        for c in centers:
            cols = (np.arange(c - hw_row, c + hw_row + 1)) % width
            labels[row, cols] = road_id
    return LabelMatrix(labels=labels, label_map=dict(label_map)), centers
