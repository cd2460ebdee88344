import collections
import json
import math

import pytest

from _oracles import oracle_haversine_m
from svikit.geo import METERS_PER_DEGREE
from svikit.ingest import BoundingBox
from svikit.sampler import (
    GridSpec,
    ManifestRecord,
    SamplerError,
    assign_nearest,
    build_grid,
    downsample,
    emit_manifest,
    select_images,
)


def meter_box(south=52.0, west=4.0, height_m=100.0, width_m=100.0):
    north = south + height_m / METERS_PER_DEGREE
    mean_lat = (south + north) / 2.0
    east = west + width_m / (METERS_PER_DEGREE * math.cos(math.radians(mean_lat)))
    return BoundingBox(west, south, east, north)


def test_grid_100m_at_20m_spacing_is_36_points():
    grid = build_grid(GridSpec(meter_box(), 20.0))
    assert len(grid) == 36


def test_grid_spacing_larger_than_box_gives_center():
    bbox = meter_box(height_m=10.0, width_m=10.0)
    grid = build_grid(GridSpec(bbox, 20.0))
    assert len(grid) == 1
    lon, lat = grid[0]
    assert lon == pytest.approx((bbox.west + bbox.east) / 2)
    assert lat == pytest.approx((bbox.south + bbox.north) / 2)


def test_grid_points_inside_bbox():
    bbox = meter_box(height_m=137.0, width_m=83.0)
    for lon, lat in build_grid(GridSpec(bbox, 20.0)):
        assert bbox.west <= lon <= bbox.east
        assert bbox.south <= lat <= bbox.north


def test_grid_spacing_validated():
    with pytest.raises(SamplerError):
        GridSpec(meter_box(), 0.0)


def test_assign_image_on_grid_point_selected():
    grid = [(4.0, 52.0)]
    assert assign_nearest([(7, 4.0, 52.0)], grid, radius_m=14.14) == [7]


def test_assign_tie_breaks_to_lower_id():
    # two images symmetric about the grid point -> identical haversine distance
    grid = [(4.0, 52.0)]
    offset = 5.0 / (METERS_PER_DEGREE * math.cos(math.radians(52.0)))
    images = [(20, 4.0 + offset, 52.0), (10, 4.0 - offset, 52.0)]
    assert assign_nearest(images, grid, radius_m=14.14) == [10]
    assert assign_nearest(list(reversed(images)), grid, radius_m=14.14) == [10]


def test_assign_outside_radius_excluded():
    grid = [(4.0, 52.0)]
    far = 4.0 + 30.0 / (METERS_PER_DEGREE * math.cos(math.radians(52.0)))
    assert oracle_haversine_m(4.0, 52.0, far, 52.0) > 14.15
    assert assign_nearest([(1, far, 52.0)], grid, radius_m=20.0 / math.sqrt(2)) == []


def test_assign_order_independent_and_within_radius():
    import random

    rng = random.Random(4)
    bbox = meter_box(height_m=200.0, width_m=200.0)
    spec = GridSpec(bbox, 20.0)
    images = [
        (i, rng.uniform(bbox.west, bbox.east), rng.uniform(bbox.south, bbox.north))
        for i in range(120)
    ]
    selected = select_images(images, spec)
    shuffled = images[:]
    rng.shuffle(shuffled)
    assert select_images(shuffled, spec) == selected
    # haversine oracle: every selected image within spacing/sqrt(2) of some grid point
    grid = build_grid(spec)
    by_id = {i: (lon, lat) for i, lon, lat in images}
    for image_id in selected:
        lon, lat = by_id[image_id]
        nearest = min(oracle_haversine_m(lon, lat, glon, glat) for glon, glat in grid)
        assert nearest <= spec.spacing_m / math.sqrt(2) + 1e-9


def test_downsample_identity_when_target_large():
    assert downsample([3, 1, 2], 5, seed=0) == [1, 2, 3]


def test_downsample_deterministic():
    ids = list(range(50))
    first = downsample(ids, 10, seed=123)
    second = downsample(ids, 10, seed=123)
    assert first == second
    assert len(first) == 10
    assert set(first) <= set(ids)
    assert downsample(ids, 10, seed=124) != first


def test_downsample_subset_size_rule():
    ids = list(range(7))
    for target in range(0, 10):
        out = downsample(ids, target, seed=1)
        assert len(out) == min(target, 7)
        assert set(out) <= set(ids)


def test_downsample_roughly_uniform_over_seeds():
    ids = list(range(50))
    target = 10
    hits = collections.Counter()
    n_seeds = 400
    for seed in range(n_seeds):
        hits.update(downsample(ids, target, seed=seed))
    expected = n_seeds * target / len(ids)  # 80 per id
    chi2 = sum((hits[i] - expected) ** 2 / expected for i in ids)
    # 49 dof; 99.9% quantile ~ 85.4
    assert chi2 < 85.4


def test_emit_manifest_empty(tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    enable = tmp_path / "enable.sql"
    result = emit_manifest([], {}, manifest, enable, seed=9)
    assert result.records == []
    lines = manifest.read_text().splitlines()
    assert len(lines) == 1
    header = json.loads(lines[0])
    assert header["count"] == 0 and header["seed"] == 9
    assert enable.read_text() == ""


def test_emit_manifest_three_records(tmp_path):
    metadata = {
        i: ManifestRecord(image_id=i, url=f"/img/{i}.jpg", cityname="Gridtown", lon=4.0 + i, lat=52.0)
        for i in (1, 2, 3)
    }
    manifest = tmp_path / "manifest.jsonl"
    enable = tmp_path / "enable.sql"
    emit_manifest([3, 1, 2], metadata, manifest, enable)
    lines = manifest.read_text().splitlines()
    records = [json.loads(line) for line in lines[1:]]
    assert [r["image_id"] for r in records] == [1, 2, 3]
    assert all(r["enabled"] is False for r in records)
    statements = enable.read_text().splitlines()
    assert statements == [
        "UPDATE images SET enabled = TRUE WHERE image_id = 1;",
        "UPDATE images SET enabled = TRUE WHERE image_id = 2;",
        "UPDATE images SET enabled = TRUE WHERE image_id = 3;",
    ]


def test_emit_manifest_missing_metadata(tmp_path):
    with pytest.raises(SamplerError) as err:
        emit_manifest([1, 2], {1: ManifestRecord(1, "u", "c", 0.0, 0.0)}, tmp_path / "m", tmp_path / "e")
    assert "2" in str(err.value)


def test_manifest_feeds_backend(tmp_path):
    from svikit.backend import MemoryStore, SurveyService

    metadata = {
        i: ManifestRecord(image_id=i, url=f"/img/{i}.jpg", cityname="Gridtown", lon=4.0, lat=52.0)
        for i in (1, 2, 3)
    }
    manifest = tmp_path / "manifest.jsonl"
    enable = tmp_path / "enable.sql"
    emit_manifest([1, 2, 3], metadata, manifest, enable)
    service = SurveyService(MemoryStore())
    assert service.ingest_manifest(manifest) == 3
    assert service.store.enabled_image_ids() == []  # disabled until the enable script runs
    assert service.apply_enable_script(enable) == 3
    assert service.store.enabled_image_ids() == [1, 2, 3]
    session = service.newperson(age=30, consent=True)
    seen = set()
    for _ in range(3):
        image = service.fetch(session["session_id"])
        seen.add(image["image_id"])
        service.new_rating(session["session_id"], session["cookie_hash"], image["image_id"], 1, 5)
    assert seen == {1, 2, 3}
