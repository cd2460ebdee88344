"""Command-line pipeline: ingest -> process -> filter -> sample -> serve -> export."""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import SvikitError
from .ingest import (
    API_KEY_ENV_VAR,
    BoundingBox,
    ImageryEndpoints,
    IngestConfig,
    RetryPolicy,
    iter_image_files,
    load_metadata_index,
    read_id_file,
    run_ingest,
)
from .panorama import apply_crop, column_road_scores, column_score_summary, find_center_lines, plan_crops, prepare_extended_mask
from .quality import QualityThresholds, evaluate_image
from .sampler import GridSpec, ManifestRecord, assign_nearest, build_grid, downsample, emit_manifest
from .segmentation import load_label_map, load_label_matrix, road_mask, sidecar_path

log = logging.getLogger(__name__)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Street-view imagery survey toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@main.command()
@click.option("--bbox", required=True, help="W,S,E,N in WGS 84 degrees.")
@click.option("--zoom", default=14, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--api-key", default=None, help=f"Falls back to ${API_KEY_ENV_VAR}.")
@click.option("--tile-url", required=True, help="Tile template with {z}/{x}/{y}/{api_key}.")
@click.option("--image-url", required=True, help="Image lookup template with {image_id}/{api_key}.")
@click.option("--retry-file", type=click.Path(exists=True), default=None,
              help="Only retry the image ids listed in this file.")
@click.option("--only-ids", type=click.Path(exists=True), default=None,
              help="Restrict the run to the image ids in this file.")
@click.option("--workers", default=4, show_default=True, type=int)
@click.option("--rps", default=10.0, show_default=True, type=float, help="Global request rate cap.")
@click.option("--limit", default=None, type=int, help="Stop after this many downloads.")
@click.option("--max-retries", default=6, show_default=True, type=int)
@click.option("--base-delay", default=1.0, show_default=True, type=float)
def ingest(bbox, zoom, out_dir, api_key, tile_url, image_url, retry_file, only_ids,
           workers, rps, limit, max_retries, base_delay):
    """Download imagery metadata and photos for a bounding box."""
    key = api_key or os.environ.get(API_KEY_ENV_VAR)
    only: set[int] | None = None
    for path in (retry_file, only_ids):
        if path:
            ids = read_id_file(path)
            only = ids if only is None else (only & ids)
    try:
        box = BoundingBox.parse(bbox)
        config = IngestConfig(
            out_dir=out_dir,
            api_key=key,
            zoom=zoom,
            endpoints=ImageryEndpoints(tile_url=tile_url, image_url=image_url),
            retry=RetryPolicy(max_retries=max_retries, base_delay=base_delay),
            workers=workers,
            requests_per_second=rps or None,
            only_ids=only,
            limit=limit,
        )
        report = run_ingest(box, config)
    except SvikitError as exc:
        _fail(exc)
    click.echo(json.dumps(report.to_json()))


def _load_mask(image_file: Path, masks_dir: Path | None, label_map):
    sidecar = Path(sidecar_path(image_file))
    if masks_dir is not None:
        sidecar = masks_dir / sidecar.name
    if not sidecar.exists():
        return None
    return road_mask(load_label_matrix(sidecar, label_map))


@main.command("process")
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--k", default=0.125, show_default=True, type=float)
@click.option("--emit-crops", is_flag=True, help="Write the planned 4:3 crops next to each panorama.")
@click.option("--log", "log_path", default=None, type=click.Path(), help="JSONL output (default: stdout).")
@click.option("--label-map", "label_map_path", default=None, type=click.Path(exists=True))
def process_cmd(images_dir, k, emit_crops, log_path, label_map_path):
    """Find road centers in panoramas and plan/emit their 4:3 crops."""
    images_dir = Path(images_dir)
    label_map = load_label_map(label_map_path) if label_map_path else None
    meta_index = load_metadata_index(images_dir)
    records = []
    for image_file in iter_image_files(images_dir):
        try:
            image_id = int(image_file.stem)
        except ValueError:
            continue
        meta = meta_index.get(image_id)
        if meta is not None and not meta.is_pano:
            continue
        mask = _load_mask(image_file, None, label_map)
        if mask is None:
            log.warning("%s: no label sidecar, skipping", image_file)
            continue
        extended = prepare_extended_mask(mask)
        scores = column_road_scores(extended, k=k)
        centers = find_center_lines(scores, extended.original_width, None)
        image_arr = None
        if emit_crops:
            image_arr = np.asarray(Image.open(image_file))
        record = {
            "kind": "pano",
            "image_id": image_id,
            "path": str(image_file),
            "width": mask.width,
            "height": mask.height,
            "centers": centers.centers,
            "peak_scores": centers.peak_scores,
            "score_summary": column_score_summary(scores),
            "crops": [],
        }
        if meta is not None:
            record.update({"lon": meta.lon, "lat": meta.lat, "sequence_id": meta.sequence_id})
        for center in centers.centers:
            for spec in plan_crops(center, mask.width, mask.height, image_id=image_id):
                crop_entry = {
                    "center_x": spec.center_x,
                    "offset": spec.offset,
                    "x0": spec.x0,
                    "y0": spec.y0,
                    "width": spec.width,
                    "height": spec.height,
                }
                if emit_crops and image_arr is not None:
                    out_name = f"{image_id}_c{center}_{spec.offset}.jpg"
                    out_path = image_file.parent / out_name
                    Image.fromarray(apply_crop(image_arr, spec)).save(out_path, quality=92)
                    crop_entry["file"] = str(out_path)
                record["crops"].append(crop_entry)
        records.append(record)
    _write_jsonl(records, log_path)
    click.echo(f"processed {len(records)} panoramas", err=True)


@main.command("filter")
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--masks", "masks_dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Directory of label sidecars (default: next to each image).")
@click.option("--c-min", default=0.35, show_default=True, type=float)
@click.option("--t-min", default=0.35, show_default=True, type=float)
@click.option("--t-floor", default=0.8, show_default=True, type=float)
@click.option("--no-road-check", is_flag=True, help="Accept images without a detectable road.")
@click.option("--log", "log_path", default=None, type=click.Path(), help="JSONL output (default: stdout).")
@click.option("--label-map", "label_map_path", default=None, type=click.Path(exists=True))
def filter_cmd(images_dir, masks_dir, c_min, t_min, t_floor, no_road_check, log_path, label_map_path):
    """Quality-filter flat images by contrast, tone, and the road check."""
    images_dir = Path(images_dir)
    masks_dir = Path(masks_dir) if masks_dir else None
    label_map = load_label_map(label_map_path) if label_map_path else None
    thresholds = QualityThresholds(c_min=c_min, t_min=t_min, t_floor=t_floor)
    meta_index = load_metadata_index(images_dir)
    records = []
    for image_file in iter_image_files(images_dir):
        try:
            image_id = int(image_file.stem)
        except ValueError:
            continue
        meta = meta_index.get(image_id)
        if meta is not None and meta.is_pano:
            continue
        arr = np.asarray(Image.open(image_file).convert("RGB"))
        mask = _load_mask(image_file, masks_dir, label_map)
        if mask is None and not no_road_check:
            log.warning("%s: no label sidecar, skipping (use --no-road-check to keep)", image_file)
            continue
        try:
            report, crop = evaluate_image(arr, mask, thresholds, require_road=not no_road_check)
        except SvikitError as exc:
            log.warning("%s: %s", image_file, exc)
            continue
        record = {
            "kind": "flat",
            "image_id": image_id,
            "path": str(image_file),
            "width": int(arr.shape[1]),
            "height": int(arr.shape[0]),
            "contrast": report.contrast,
            "tonemap": report.tonemap,
            "road_check": report.road_check,
            "passed": report.passed,
            "reject_reason": report.reject_reason,
        }
        if crop is not None:
            record["crop"] = {"x0": crop.x0, "y0": crop.y0, "width": crop.width, "height": crop.height}
        if meta is not None:
            record.update({"lon": meta.lon, "lat": meta.lat, "sequence_id": meta.sequence_id})
        records.append(record)
    _write_jsonl(records, log_path)
    accepted = sum(1 for r in records if r["passed"])
    click.echo(f"filtered {len(records)} images, {accepted} accepted", err=True)


def _write_jsonl(records: list[dict], log_path: str | None) -> None:
    out = open(log_path, "w", encoding="utf-8") if log_path else sys.stdout
    try:
        for record in records:
            out.write(json.dumps(record) + "\n")
    finally:
        if log_path:
            out.close()


def _accepted_from_logs(log_dir: Path) -> list[dict]:
    accepted = []
    for path in sorted(log_dir.glob("*.jsonl")):
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("kind") == "pano" and record.get("centers"):
                accepted.append(record)
            elif record.get("kind") == "flat" and record.get("passed"):
                accepted.append(record)
    return accepted


@main.command("sample")
@click.option("--bbox", required=True, help="W,S,E,N in WGS 84 degrees.")
@click.option("--spacing", default=20.0, show_default=True, type=float, help="Grid spacing in meters.")
@click.option("--target", default=20000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--log", "log_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of process/filter JSONL logs.")
@click.option("--out", "manifest_path", default="manifest.jsonl", show_default=True, type=click.Path())
@click.option("--enable-script", default="enable.sql", show_default=True, type=click.Path())
@click.option("--cityname", default="", help="City name stored on every manifest record.")
@click.option("--url-template", default=None,
              help="Optional public URL per image, e.g. https://host/{image_id}.jpg")
def sample_cmd(bbox, spacing, target, seed, log_dir, manifest_path, enable_script, cityname, url_template):
    """Thin accepted images to the grid, down-sample, and write the manifest."""
    try:
        box = BoundingBox.parse(bbox)
        spec = GridSpec(bbox=box, spacing_m=spacing)
        accepted = _accepted_from_logs(Path(log_dir))
        located = [r for r in accepted if "lon" in r and "lat" in r]
        for record in accepted:
            if "lon" not in record or "lat" not in record:
                log.warning("image %s has no coordinates; not sampled", record.get("image_id"))
        images = [(r["image_id"], r["lon"], r["lat"]) for r in located]
        grid = build_grid(spec)
        selected = assign_nearest(images, grid, spec.assignment_radius_m)
        final = downsample(selected, target, seed)
        metadata = {}
        for record in located:
            image_id = record["image_id"]
            if url_template:
                url = url_template.format(image_id=image_id)
            else:
                crops = record.get("crops") or []
                url = next((c["file"] for c in crops if "file" in c), record["path"])
            metadata[image_id] = ManifestRecord(
                image_id=image_id, url=url, cityname=cityname, lon=record["lon"], lat=record["lat"]
            )
        result = emit_manifest(final, metadata, manifest_path, enable_script, seed=seed)
    except SvikitError as exc:
        _fail(exc)
    click.echo(json.dumps({
        "grid_points": len(grid),
        "candidates": len(images),
        "grid_selected": len(selected),
        "final": len(result.records),
        "manifest": result.manifest_path,
        "enable_script": result.enable_script_path,
    }))


@main.command("serve")
@click.option("--store", "store_uri", default=":memory:", show_default=True,
              help="SQLite path, or :memory: for an ephemeral store.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--cors-origin", "cors_origins", multiple=True, help="Allowed CORS origin (repeatable).")
@click.option("--load-manifest", default=None, type=click.Path(exists=True))
@click.option("--apply-enable-script", "enable_script", default=None, type=click.Path(exists=True))
def serve_cmd(store_uri, host, port, cors_origins, load_manifest, enable_script):
    """Run the survey backend API."""
    import uvicorn

    from .backend import SurveyService, create_app
    from .backend.store import open_store

    service = SurveyService(open_store(store_uri))
    if load_manifest:
        n = service.ingest_manifest(load_manifest)
        click.echo(f"loaded {n} images from {load_manifest}", err=True)
    if enable_script:
        n = service.apply_enable_script(enable_script)
        click.echo(f"enabled {n} images", err=True)
    uvicorn.run(create_app(service, list(cors_origins) or None), host=host, port=port)


@main.command("export")
@click.option("--store", "store_uri", required=True, help="SQLite path of the backend store.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--anonymized", "anonymized_path", default=None, type=click.Path())
@click.option("--hexbin", "hexbin_path", default=None, type=click.Path())
@click.option("--category", default=None, type=int, help="Category for the hexbin aggregation.")
@click.option("--hex-w", default=650.0, show_default=True, type=float)
@click.option("--hex-h", default=600.0, show_default=True, type=float)
@click.option("--stats", "stats_path", default=None, type=click.Path())
def export_cmd(store_uri, seed, anonymized_path, hexbin_path, category, hex_w, hex_h, stats_path):
    """Produce anonymized CSV, hexbin GeoJSON, and summary statistics."""
    from .backend.store import open_store
    from .export import anonymize, hexbin_aggregate, summary_stats, write_anonymized_csv, write_hexbin_geojson

    store = open_store(store_uri)
    try:
        done = []
        if anonymized_path:
            rows = anonymize(store.export_rows(), seed)
            write_anonymized_csv(rows, anonymized_path)
            done.append(f"anonymized -> {anonymized_path}")
        if hexbin_path:
            bins = hexbin_aggregate(store.rating_points(category), hex_w=hex_w, hex_h=hex_h)
            write_hexbin_geojson(bins, hexbin_path, category=category)
            done.append(f"hexbin -> {hexbin_path}")
        if stats_path:
            stats = summary_stats(store.export_rows())
            Path(stats_path).write_text(json.dumps(stats, indent=2), encoding="utf-8")
            done.append(f"stats -> {stats_path}")
    finally:
        store.close()
    for line in done:
        click.echo(line, err=True)


if __name__ == "__main__":
    main()
