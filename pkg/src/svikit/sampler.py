"""Spatial thinning of accepted imagery and survey manifest emission.

Accepted images are thinned to a fixed geographic grid (default 20 m
spacing), optionally down-sampled to a target count, and written out as
a database-ready manifest in which every image starts disabled; a
separate enable script flips them on when the survey goes live.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import random
from dataclasses import dataclass, field

import numpy as np

from . import SvikitError
from .geo import METERS_PER_DEGREE, haversine_m
from .ingest import BoundingBox


class SamplerError(SvikitError):
    pass


@dataclass(frozen=True)
class GridSpec:
    bbox: BoundingBox
    spacing_m: float = 20.0

    def __post_init__(self) -> None:
        if self.spacing_m <= 0:
            raise SamplerError("grid spacing must be positive")

    @property
    def assignment_radius_m(self) -> float:
        # Half the cell diagonal: an image serves only its local cell.
        return self.spacing_m / math.sqrt(2.0)


@dataclass
class ManifestRecord:
    image_id: int
    url: str
    cityname: str
    lon: float
    lat: float
    enabled: bool = False

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "url": self.url,
            "cityname": self.cityname,
            "lon": self.lon,
            "lat": self.lat,
            "enabled": self.enabled,
        }


def _axis_points(low: float, high: float, step_deg: float) -> list[float]:
    span_steps = (high - low) / step_deg
    n = int(math.floor(span_steps + 1e-9))
    if n < 1:
        return [(low + high) / 2.0]
    return [min(low + i * step_deg, high) for i in range(n + 1)]


def build_grid(spec: GridSpec) -> list[tuple[float, float]]:
    """Axis-aligned lattice of (lon, lat) points covering the bounding box.

    Meter spacing is converted to degrees with the equirectangular
    approximation at the box's mean latitude; boundary rows and columns
    are included. A box smaller than the spacing collapses to its center.
    """
    bbox = spec.bbox
    mean_lat = (bbox.south + bbox.north) / 2.0
    dlat = spec.spacing_m / METERS_PER_DEGREE
    dlon = spec.spacing_m / (METERS_PER_DEGREE * math.cos(math.radians(mean_lat)))
    lats = _axis_points(bbox.south, bbox.north, dlat)
    lons = _axis_points(bbox.west, bbox.east, dlon)
    return [(lon, lat) for lat in lats for lon in lons]


def assign_nearest(
    images: list[tuple[int, float, float]],
    grid: list[tuple[float, float]],
    radius_m: float,
) -> list[int]:
    """For each grid point keep the nearest image within ``radius_m``.

    Ties break toward the lower image id; an image claimed by several
    grid points counts once. Returns sorted unique image ids.
    """
    if not images or not grid:
        return []
    ids = np.asarray([i[0] for i in images], dtype=np.int64)
    lons = np.asarray([i[1] for i in images], dtype=float)
    lats = np.asarray([i[2] for i in images], dtype=float)
    selected: set[int] = set()
    for glon, glat in grid:
        d = haversine_m(glon, glat, lons, lats)
        d = np.atleast_1d(d)
        order = np.lexsort((ids, d))  # distance first, image id second
        best = order[0]
        if d[best] <= radius_m:
            selected.add(int(ids[best]))
    return sorted(selected)


def select_images(images: list[tuple[int, float, float]], spec: GridSpec) -> list[int]:
    """Grid thinning with the default half-diagonal assignment radius."""
    return assign_nearest(images, build_grid(spec), spec.assignment_radius_m)


def downsample(selected: list[int], target: int, seed: int) -> list[int]:
    """Uniform random subset of size min(target, len(selected)); seeded."""
    if target < 0:
        raise SamplerError("target must be >= 0")
    pool = sorted(selected)
    if target >= len(pool):
        return pool
    rng = random.Random(seed)
    return sorted(rng.sample(pool, target))


@dataclass
class ManifestResult:
    manifest_path: str
    enable_script_path: str
    records: list[ManifestRecord] = field(default_factory=list)


def enable_statement(image_id: int) -> str:
    return f"UPDATE images SET enabled = TRUE WHERE image_id = {image_id};"


def emit_manifest(
    final_ids: list[int],
    metadata: dict[int, ManifestRecord],
    manifest_path: str | os.PathLike,
    enable_script_path: str | os.PathLike,
    seed: int | None = None,
) -> ManifestResult:
    """Write the survey manifest (JSONL, header line first) and enable script.

    Every record is emitted with enabled=false; the enable script holds
    one statement per image for the go-live step. Ids without metadata
    abort with the full missing list.
    """
    missing = sorted(i for i in final_ids if i not in metadata)
    if missing:
        raise SamplerError(f"no metadata for image ids: {missing}")
    records = [metadata[i] for i in sorted(set(final_ids))]
    header = {
        "kind": "svikit-manifest",
        "version": 1,
        "count": len(records),
        "seed": seed,
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            body = rec.to_json()
            body["enabled"] = False
            fh.write(json.dumps(body) + "\n")
    with open(enable_script_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(enable_statement(rec.image_id) + "\n")
    return ManifestResult(
        manifest_path=os.fspath(manifest_path),
        enable_script_path=os.fspath(enable_script_path),
        records=records,
    )
