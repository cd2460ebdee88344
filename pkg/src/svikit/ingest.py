"""Tile enumeration, metadata parsing, and resumable image downloading.

The imagery service is addressed through two URL templates (tile data and
per-image URL lookup) so tests and alternative providers can point the
whole pipeline at a local stub. Tile payloads are JSON feature
collections; a pluggable decoder hook converts other wire formats (e.g.
binary vector tiles) into that shape before anything else sees them.

Downloads survive interruption: tile payloads are cached on disk, every
image outcome is appended to a ledger file, and a rerun only fetches what
is still missing. Failures back off exponentially and, once retries are
exhausted, land in a failed-ids list that a later run can be pointed at.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import requests

from . import SvikitError

log = logging.getLogger(__name__)

API_KEY_ENV_VAR = "SVIKIT_API_KEY"

MAX_ZOOM = 22
_MERCATOR_LAT_LIMIT = 85.05112877980659


class IngestError(SvikitError):
    pass


class ConfigurationError(IngestError):
    """Fatal setup problem (missing/rejected credential, bad destination)."""


@dataclass(frozen=True)
class BoundingBox:
    """WGS 84 rectangle (west, south, east, north)."""

    west: float
    south: float
    east: float
    north: float

    def __post_init__(self) -> None:
        if not (-180.0 <= self.west <= 180.0 and -180.0 <= self.east <= 180.0):
            raise IngestError("longitudes must lie in [-180, 180]")
        if not (-90.0 <= self.south <= 90.0 and -90.0 <= self.north <= 90.0):
            raise IngestError("latitudes must lie in [-90, 90]")
        if not self.west < self.east:
            raise IngestError("bounding box requires west < east")
        if not self.south < self.north:
            raise IngestError("bounding box requires south < north")

    @classmethod
    def degenerate(cls, lon: float, lat: float) -> "BoundingBox":
        """A point-sized box, useful for single-tile lookups."""
        eps = 1e-9
        return cls(lon, lat, lon + eps, lat + eps)

    def contains(self, lon: float, lat: float) -> bool:
        return self.west <= lon <= self.east and self.south <= lat <= self.north

    @classmethod
    def parse(cls, text: str) -> "BoundingBox":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise IngestError("expected W,S,E,N")
        w, s, e, n = (float(p) for p in parts)
        return cls(w, s, e, n)


class TileCoord(tuple):
    """Slippy-map tile address (z, x, y)."""

    def __new__(cls, z: int, x: int, y: int):
        if not (0 <= x < 2**z and 0 <= y < 2**z):
            raise IngestError(f"tile indices ({x}, {y}) invalid at zoom {z}")
        return super().__new__(cls, (z, x, y))

    z = property(lambda self: self[0])
    x = property(lambda self: self[1])
    y = property(lambda self: self[2])

    def __repr__(self) -> str:
        return f"TileCoord(z={self.z}, x={self.x}, y={self.y})"


@dataclass(frozen=True)
class ImageMeta:
    image_id: int
    sequence_id: str
    compass_angle: float
    lon: float
    lat: float
    captured_at: int
    is_pano: bool


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff; ``max_retries`` caps total attempts per image."""

    max_retries: int = 6
    base_delay: float = 1.0
    multiplier: float = 2.0
    max_delay: float = 60.0

    def __post_init__(self) -> None:
        if self.max_retries < 1:
            raise IngestError("max_retries must be >= 1")
        if self.base_delay <= 0 or self.multiplier < 1.0 or self.max_delay < self.base_delay:
            raise IngestError("backoff delays must grow and stay within the cap")

    def delay_after(self, attempt: int) -> float:
        """Delay after the Nth failed attempt (1-based)."""
        return min(self.base_delay * self.multiplier ** (attempt - 1), self.max_delay)


class DownloadStatus(Enum):
    SAVED = "saved"
    ALREADY_PRESENT = "already_present"
    FAILED = "failed"


@dataclass
class DownloadResult:
    status: DownloadStatus
    image_id: int
    attempts: int = 0
    delays: list[float] = field(default_factory=list)
    path: str | None = None


# --- tile math -------------------------------------------------------------

def _tile_x(lon: float, zoom: int) -> int:
    n = 2**zoom
    x = int(math.floor((lon + 180.0) / 360.0 * n))
    return min(max(x, 0), n - 1)


def _tile_y(lat: float, zoom: int) -> int:
    lat = min(max(lat, -_MERCATOR_LAT_LIMIT), _MERCATOR_LAT_LIMIT)
    n = 2**zoom
    y = int(math.floor((1.0 - math.asinh(math.tan(math.radians(lat))) / math.pi) / 2.0 * n))
    return min(max(y, 0), n - 1)


def enumerate_tiles(bbox: BoundingBox, zoom: int) -> list[TileCoord]:
    """All tiles whose extent intersects the box, row-major, no duplicates."""
    if not 0 <= zoom <= MAX_ZOOM:
        raise IngestError(f"zoom {zoom} outside [0, {MAX_ZOOM}]")
    x0, x1 = _tile_x(bbox.west, zoom), _tile_x(bbox.east, zoom)
    y0, y1 = _tile_y(bbox.north, zoom), _tile_y(bbox.south, zoom)
    return [TileCoord(zoom, x, y) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]


# --- tile payload parsing ----------------------------------------------------

_REQUIRED_PROPS = ("id", "sequence_id", "compass_angle", "captured_at", "is_pano")


def _parse_features(
    payload: bytes, bbox: BoundingBox, tile: TileCoord | None = None
) -> tuple[list[ImageMeta], int]:
    where = f"tile {tile.z}/{tile.x}/{tile.y}" if tile is not None else "tile payload"
    try:
        doc = json.loads(payload)
        features = doc["features"]
    except (ValueError, KeyError, TypeError) as exc:
        raise IngestError(f"{where}: not a feature collection: {exc}") from exc
    metas: list[ImageMeta] = []
    skipped = 0
    for feature in features:
        try:
            props = feature["properties"]
            lon, lat = feature["geometry"]["coordinates"][:2]
            values = [props[k] for k in _REQUIRED_PROPS]
        except (KeyError, TypeError, IndexError):
            skipped += 1
            continue
        if not bbox.contains(float(lon), float(lat)):
            continue
        try:
            meta = ImageMeta(
                image_id=int(values[0]),
                sequence_id=str(values[1]),
                compass_angle=float(values[2]) % 360.0,
                lon=float(lon),
                lat=float(lat),
                captured_at=int(values[3]),
                is_pano=bool(values[4]),
            )
        except (ValueError, TypeError):
            skipped += 1
            continue
        metas.append(meta)
    if skipped:
        log.warning("%s: skipped %d features with missing/bad properties", where, skipped)
    return metas, skipped


def parse_tile_features(payload: bytes, bbox: BoundingBox, tile: TileCoord | None = None) -> list[ImageMeta]:
    """Image metadata for every feature of the tile that lies inside the box."""
    metas, _ = _parse_features(payload, bbox, tile)
    return metas


# --- ledger ------------------------------------------------------------------

class IngestLedger:
    """Crash-safe record of per-image outcomes, one appended line per event.

    The latest event per image wins on replay, so an id that failed once
    and succeeded later counts as downloaded. ``close()`` compacts the
    file and rewrites the failed-ids list.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.ledger_path = self.root / "ledger.txt"
        self.failed_path = self.root / "failed_ids.txt"
        self._lock = threading.Lock()
        self._downloaded: set[int] = set()
        self._failed: set[int] = set()
        self._fh = None
        self.root.mkdir(parents=True, exist_ok=True)
        self._replay()
        self._fh = open(self.ledger_path, "a", encoding="utf-8")

    def _replay(self) -> None:
        if not self.ledger_path.exists():
            return
        for line in self.ledger_path.read_text(encoding="utf-8").splitlines():
            parts = line.split()
            if len(parts) != 2 or parts[0] not in ("D", "F"):
                continue
            image_id = int(parts[1])
            if parts[0] == "D":
                self._downloaded.add(image_id)
                self._failed.discard(image_id)
            else:
                if image_id not in self._downloaded:
                    self._failed.add(image_id)

    @property
    def downloaded(self) -> set[int]:
        with self._lock:
            return set(self._downloaded)

    @property
    def failed(self) -> list[int]:
        with self._lock:
            return sorted(self._failed)

    @property
    def tile_cache(self) -> dict[TileCoord, str]:
        """Tile payloads currently cached under ``root/tiles``."""
        cache: dict[TileCoord, str] = {}
        tiles_root = self.root / "tiles"
        for path in tiles_root.glob("*/*/*.json"):
            try:
                z, x, y = int(path.parent.parent.name), int(path.parent.name), int(path.stem)
            except ValueError:
                continue
            cache[TileCoord(z, x, y)] = str(path)
        return cache

    def is_downloaded(self, image_id: int) -> bool:
        with self._lock:
            return image_id in self._downloaded

    def _append(self, tag: str, image_id: int) -> None:
        self._fh.write(f"{tag} {image_id}\n")
        self._fh.flush()

    def mark_downloaded(self, image_id: int) -> None:
        with self._lock:
            if image_id in self._downloaded:
                return
            self._downloaded.add(image_id)
            self._failed.discard(image_id)
            self._append("D", image_id)

    def mark_failed(self, image_id: int) -> None:
        with self._lock:
            if image_id in self._downloaded or image_id in self._failed:
                return
            self._failed.add(image_id)
            self._append("F", image_id)

    def close(self) -> None:
        """Compact the ledger and persist the failed-ids list."""
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            lines = [f"D {i}\n" for i in sorted(self._downloaded)]
            lines += [f"F {i}\n" for i in sorted(self._failed)]
            self.ledger_path.write_text("".join(lines), encoding="utf-8")
            self.failed_path.write_text("".join(f"{i}\n" for i in sorted(self._failed)), encoding="utf-8")

    def __enter__(self) -> "IngestLedger":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# --- download client ----------------------------------------------------------

@dataclass
class ImageryEndpoints:
    """URL templates for the imagery service (or a local stub).

    ``tile_url`` takes {z}/{x}/{y}/{api_key}; ``image_url`` takes
    {image_id}/{api_key} and must return JSON with a ``url`` field
    pointing at the actual image bytes.
    """

    tile_url: str
    image_url: str

    def tile(self, tile: TileCoord, api_key: str) -> str:
        return self.tile_url.format(z=tile.z, x=tile.x, y=tile.y, api_key=api_key)

    def image(self, image_id: int, api_key: str) -> str:
        return self.image_url.format(image_id=image_id, api_key=api_key)


class _RateLimiter:
    """Global cap on request starts per second across all workers."""

    def __init__(self, per_second: float | None):
        self._interval = 1.0 / per_second if per_second else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_at)
            self._next_at = start + self._interval
        delay = start - now
        if delay > 0:
            time.sleep(delay)


@dataclass
class IngestConfig:
    out_dir: str
    api_key: str | None = None
    zoom: int = 14
    endpoints: ImageryEndpoints | None = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    workers: int = 4
    requests_per_second: float | None = 10.0
    only_ids: set[int] | None = None
    limit: int | None = None
    refresh_tiles: bool = False
    tile_decoder: Callable[[bytes, TileCoord], bytes] | None = None
    timeout: float = 30.0


@dataclass
class IngestReport:
    tiles: int = 0
    images_found: int = 0
    downloaded: int = 0
    skipped: int = 0
    failed: int = 0
    features_skipped: int = 0

    def to_json(self) -> dict:
        return self.__dict__.copy()


def image_path(dest_root: str | os.PathLike, meta: ImageMeta) -> Path:
    return Path(dest_root) / meta.sequence_id / f"{meta.image_id}.jpg"


def download_image(
    meta: ImageMeta,
    dest_root: str | os.PathLike,
    policy: RetryPolicy,
    ledger: IngestLedger,
    endpoints: ImageryEndpoints,
    api_key: str,
    session: requests.Session | None = None,
    rate_limiter: _RateLimiter | None = None,
    timeout: float = 30.0,
) -> DownloadResult:
    """Fetch one image with exponential backoff, updating the ledger.

    Looks up the image URL, downloads the bytes, and writes them to
    ``dest_root/<sequence_id>/<image_id>.jpg`` via a temp file. An image
    already on disk is not re-fetched. After ``max_retries`` attempts the
    id is recorded as failed; the run carries on.
    """
    dest = image_path(dest_root, meta)
    if dest.exists():
        ledger.mark_downloaded(meta.image_id)
        return DownloadResult(DownloadStatus.ALREADY_PRESENT, meta.image_id, path=str(dest))

    http = session or requests
    delays: list[float] = []
    last_error: Exception | None = None
    for attempt in range(1, policy.max_retries + 1):
        try:
            if rate_limiter:
                rate_limiter.wait()
            info = http.get(endpoints.image(meta.image_id, api_key), timeout=timeout)
            info.raise_for_status()
            url = info.json()["url"]
            if rate_limiter:
                rate_limiter.wait()
            blob = http.get(url, timeout=timeout)
            blob.raise_for_status()
            data = blob.content
            if not data:
                raise IngestError("empty image body")
            dest.parent.mkdir(parents=True, exist_ok=True)
            tmp = dest.with_suffix(".part")
            tmp.write_bytes(data)
            os.replace(tmp, dest)
            ledger.mark_downloaded(meta.image_id)
            return DownloadResult(DownloadStatus.SAVED, meta.image_id, attempt, delays, str(dest))
        except Exception as exc:  # noqa: BLE001 - any transport problem retries
            last_error = exc
            if attempt < policy.max_retries:
                delay = policy.delay_after(attempt)
                delays.append(delay)
                time.sleep(delay)
    log.warning("image %d failed after %d attempts: %s", meta.image_id, policy.max_retries, last_error)
    ledger.mark_failed(meta.image_id)
    return DownloadResult(DownloadStatus.FAILED, meta.image_id, policy.max_retries, delays)


def _fetch_tile_payload(
    tile: TileCoord, config: IngestConfig, ledger: IngestLedger, session: requests.Session, limiter: _RateLimiter
) -> bytes:
    cache_path = ledger.root / "tiles" / str(tile.z) / str(tile.x) / f"{tile.y}.json"
    if cache_path.exists() and not config.refresh_tiles:
        return cache_path.read_bytes()
    policy = config.retry
    last_error: Exception | None = None
    for attempt in range(1, policy.max_retries + 1):
        try:
            limiter.wait()
            resp = session.get(config.endpoints.tile(tile, config.api_key), timeout=config.timeout)
            if resp.status_code in (401, 403):
                raise ConfigurationError(f"API credential rejected (HTTP {resp.status_code})")
            resp.raise_for_status()
            payload = resp.content
            if config.tile_decoder is not None:
                payload = config.tile_decoder(payload, tile)
            json.loads(payload)  # must already be the JSON feature-collection shape
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            tmp = cache_path.with_suffix(".part")
            tmp.write_bytes(payload)
            os.replace(tmp, cache_path)
            return payload
        except ConfigurationError:
            raise
        except Exception as exc:  # noqa: BLE001
            last_error = exc
            if attempt < policy.max_retries:
                time.sleep(policy.delay_after(attempt))
    raise IngestError(f"tile {tile.z}/{tile.x}/{tile.y} unavailable after retries: {last_error}")


def load_metadata_index(out_dir: str | os.PathLike) -> dict[int, ImageMeta]:
    """Rebuild image_id -> metadata from the cached tile payloads."""
    root = Path(out_dir)
    index: dict[int, ImageMeta] = {}
    wide = BoundingBox(-180.0, -90.0, 180.0, 90.0)
    for path in sorted((root / "tiles").glob("*/*/*.json")):
        try:
            metas, _ = _parse_features(path.read_bytes(), wide)
        except IngestError:
            log.warning("unreadable tile cache file %s", path)
            continue
        for meta in metas:
            index.setdefault(meta.image_id, meta)
    return index


def run_ingest(bbox: BoundingBox, config: IngestConfig) -> IngestReport:
    """Download every eligible image in the box; restartable at any point.

    Tile payloads are cached, finished images are skipped, and failures
    are collected rather than aborting the run. ``config.only_ids``
    restricts the run to the given ids (e.g. a previous failed list);
    ``config.limit`` stops after that many non-skipped images, which also
    makes interruption cheap to simulate.
    """
    if not config.api_key:
        raise ConfigurationError(f"no API key; pass one or set {API_KEY_ENV_VAR}")
    if config.endpoints is None:
        raise ConfigurationError("imagery endpoints not configured")
    out_root = Path(config.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    report = IngestReport()
    limiter = _RateLimiter(config.requests_per_second)
    session = requests.Session()
    with IngestLedger(out_root) as ledger:
        metas: dict[int, ImageMeta] = {}
        for tile in enumerate_tiles(bbox, config.zoom):
            payload = _fetch_tile_payload(tile, config, ledger, session, limiter)
            tile_metas, bad = _parse_features(payload, bbox, tile)
            report.tiles += 1
            report.features_skipped += bad
            for meta in tile_metas:
                metas.setdefault(meta.image_id, meta)
        eligible = sorted(metas)
        if config.only_ids is not None:
            eligible = [i for i in eligible if i in config.only_ids]
        report.images_found = len(eligible)

        stop = threading.Event()
        counted = threading.Lock()
        attempted = 0

        def work(image_id: int) -> DownloadResult | None:
            nonlocal attempted
            if stop.is_set():
                return None
            result = download_image(
                metas[image_id],
                out_root,
                config.retry,
                ledger,
                config.endpoints,
                config.api_key,
                session=session,
                rate_limiter=limiter,
                timeout=config.timeout,
            )
            if result.status is not DownloadStatus.ALREADY_PRESENT and config.limit is not None:
                with counted:
                    attempted += 1
                    if attempted >= config.limit:
                        stop.set()
            return result

        with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
            for result in pool.map(work, eligible):
                if result is None:
                    continue
                if result.status is DownloadStatus.SAVED:
                    report.downloaded += 1
                elif result.status is DownloadStatus.ALREADY_PRESENT:
                    report.skipped += 1
                else:
                    report.failed += 1
    return report


def read_id_file(path: str | os.PathLike) -> set[int]:
    """Read a file of image ids, one per line; blank lines ignored."""
    ids: set[int] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            ids.add(int(line))
    return ids


def iter_image_files(root: str | os.PathLike) -> Iterable[Path]:
    """Yield downloaded image files under an ingest output directory."""
    root = Path(root)
    for path in sorted(root.rglob("*.jpg")):
        if "tiles" in path.parts:
            continue
        yield path
