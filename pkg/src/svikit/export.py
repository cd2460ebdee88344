"""Anonymized dataset export, hex-bin aggregation, and summary statistics.

Published data must not allow re-identification: cookie hashes never
leave the store, postal codes keep only their first character (their
shape stays visible), ages move by up to two years, and timestamps get a
per-session shift of up to a day plus per-row jitter of up to two
seconds, which breaks linkage while preserving interval statistics.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import os
import random
from dataclasses import dataclass

from .geo import local_lonlat, local_xy
from . import SvikitError

EXPORT_COLUMNS = (
    "id", "timestamp", "sess", "image", "cat", "score",
    "postcode", "country", "age", "mgi", "education", "gender",
)


class ExportError(SvikitError):
    pass


def redact_postcode(postcode: str | None) -> str | None:
    """Keep the first character; letters and digits after it become dashes."""
    if postcode is None or postcode == "":
        return postcode
    head, tail = postcode[0], postcode[1:]
    return head + "".join("-" if ch.isalnum() else ch for ch in tail)


def _session_rng(seed: int, session: int) -> random.Random:
    return random.Random(f"{seed}|sess|{session}")


def _row_rng(seed: int, row_id: int) -> random.Random:
    return random.Random(f"{seed}|row|{row_id}")


def anonymize(rows: list[dict], seed: int) -> list[dict]:
    """Anonymize joined rating rows; deterministic for a fixed seed.

    Expects dicts with the export columns (timestamps as datetimes).
    Per-session values (age delta, timestamp offset) are derived from the
    session id so the result does not depend on row order.
    """
    out = []
    for row in sorted(rows, key=lambda r: r["id"]):
        sess_rng = _session_rng(seed, row["sess"])
        offset_s = sess_rng.uniform(-86400.0, 86400.0)
        age_delta = sess_rng.randint(-2, 2)
        jitter_s = _row_rng(seed, row["id"]).uniform(-2.0, 2.0)
        ts = row["timestamp"]
        if not isinstance(ts, _dt.datetime):
            ts = _dt.datetime.fromisoformat(str(ts))
        new_row = {
            "id": row["id"],
            "timestamp": ts + _dt.timedelta(seconds=offset_s + jitter_s),
            "sess": row["sess"],
            "image": row["image"],
            "cat": row["cat"],
            "score": row["score"],
            "postcode": redact_postcode(row.get("postcode")),
            "country": row.get("country"),
            "age": max(18, int(row["age"]) + age_delta),
            "mgi": row.get("mgi"),
            "education": row.get("education"),
            "gender": row.get("gender"),
        }
        out.append(new_row)
    return out


def write_anonymized_csv(rows: list[dict], path: str | os.PathLike) -> None:
    """Write anonymized rows with exactly the published column header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPORT_COLUMNS)
        for row in rows:
            record = []
            for col in EXPORT_COLUMNS:
                value = row.get(col)
                if value is None:
                    record.append("")
                elif isinstance(value, _dt.datetime):
                    record.append(value.strftime("%Y-%m-%d %H:%M:%S.%f"))
                elif isinstance(value, float) and value.is_integer():
                    record.append(str(int(value)))
                else:
                    record.append(str(value))
            writer.writerow(record)


# --- hexagonal binning ------------------------------------------------------

@dataclass
class HexBin:
    q: int
    r: int
    center_lon: float
    center_lat: float
    mean_score: float
    count: int


def _hex_center_xy(q: int, r: int, hex_w: float, hex_h: float) -> tuple[float, float]:
    return hex_w * (q + r / 2.0), hex_h * r


def nearest_hex(x: float, y: float, hex_w: float, hex_h: float) -> tuple[int, int]:
    """Axial (q, r) of the closest hex center; ties break on (r, q)."""
    r_guess = int(round(y / hex_h))
    best: tuple[float, int, int] | None = None
    for r in (r_guess - 1, r_guess, r_guess + 1):
        q_guess = int(round(x / hex_w - r / 2.0))
        for q in (q_guess - 1, q_guess, q_guess + 1):
            cx, cy = _hex_center_xy(q, r, hex_w, hex_h)
            d2 = (x - cx) ** 2 + (y - cy) ** 2
            key = (d2, r, q)
            if best is None or key < best:
                best = key
    return best[2], best[1]


def hexbin_aggregate(
    points: list[tuple[float, float, float]],
    hex_w: float = 650.0,
    hex_h: float = 600.0,
) -> list[HexBin]:
    """Average scores into a pointy-top hex lattice (pitches in meters).

    Points are projected into a local equirectangular meter frame at the
    data's mean latitude; every point lands in exactly one bin.
    """
    if hex_w <= 0 or hex_h <= 0:
        raise ExportError("hex pitches must be positive")
    if not points:
        return []
    lons = [p[0] for p in points]
    lats = [p[1] for p in points]
    lon0, lat0 = sum(lons) / len(lons), sum(lats) / len(lats)
    sums: dict[tuple[int, int], list[float]] = {}
    for lon, lat, score in points:
        x, y = local_xy(lon, lat, lon0, lat0, lat0)
        q, r = nearest_hex(float(x), float(y), hex_w, hex_h)
        acc = sums.setdefault((q, r), [0.0, 0])
        acc[0] += score
        acc[1] += 1
    bins = []
    for (q, r), (total, count) in sorted(sums.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        cx, cy = _hex_center_xy(q, r, hex_w, hex_h)
        lon, lat = local_lonlat(cx, cy, lon0, lat0, lat0)
        bins.append(HexBin(q=q, r=r, center_lon=float(lon), center_lat=float(lat),
                           mean_score=total / count, count=count))
    return bins


def write_hexbin_geojson(bins: list[HexBin], path: str | os.PathLike, category: int | None = None) -> None:
    """Emit bins as a GeoJSON FeatureCollection of center points."""
    features = []
    for b in bins:
        props = {"q": b.q, "r": b.r, "mean_score": b.mean_score, "count": b.count}
        if category is not None:
            props["category"] = category
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [b.center_lon, b.center_lat]},
                "properties": props,
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)


# --- summary statistics -------------------------------------------------------

def _median_low(values: list[float]) -> float | None:
    """Lower-middle element; None for an empty list."""
    if not values:
        return None
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def summary_stats(ratings: list[dict]) -> dict:
    """Survey-level statistics from rating rows with sess/timestamp/image.

    Completion time is last-minus-first rating per session (sessions with
    a single rating are excluded); intervals are consecutive gaps within
    a session. Medians take the lower-middle element for even counts.
    """
    by_session: dict[int, list[_dt.datetime]] = {}
    images = set()
    for row in ratings:
        ts = row["timestamp"]
        if not isinstance(ts, _dt.datetime):
            ts = _dt.datetime.fromisoformat(str(ts))
        by_session.setdefault(row["sess"], []).append(ts)
        if "image" in row:
            images.add(row["image"])

    completions: list[float] = []
    intervals: list[float] = []
    sessions_ge_50 = 0
    sessions_eq_100 = 0
    for stamps in by_session.values():
        stamps.sort()
        if len(stamps) >= 50:
            sessions_ge_50 += 1
        if len(stamps) == 100:
            sessions_eq_100 += 1
        if len(stamps) >= 2:
            completions.append((stamps[-1] - stamps[0]).total_seconds())
            intervals.extend(
                (b - a).total_seconds() for a, b in zip(stamps, stamps[1:])
            )

    median_completion_s = _median_low(completions)
    median_interval_s = _median_low(intervals)
    return {
        "sessions_total": len(by_session),
        "sessions_ge_50": sessions_ge_50,
        "sessions_eq_100": sessions_eq_100,
        "median_completion_minutes": None if median_completion_s is None else median_completion_s / 60.0,
        "frac_completion_le_30min": (
            None if not completions else sum(1 for c in completions if c <= 1800.0) / len(completions)
        ),
        "median_interval_seconds": median_interval_s,
        "frac_intervals_le_10s": (
            None if not intervals else sum(1 for i in intervals if i <= 10.0) / len(intervals)
        ),
        "ratings_total": len(ratings),
        "images_rated": len(images),
    }
