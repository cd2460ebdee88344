import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest


def tile_bounds(z: int, x: int, y: int):
    """(west, south, east, north) of a slippy-map tile."""
    n = 2**z
    west = x / n * 360.0 - 180.0
    east = (x + 1) / n * 360.0 - 180.0
    north = math.degrees(math.atan(math.sinh(math.pi * (1 - 2 * y / n))))
    south = math.degrees(math.atan(math.sinh(math.pi * (1 - 2 * (y + 1) / n))))
    return west, south, east, north


class StubImagery:
    """Local HTTP stand-in for the imagery service.

    Serves JSON feature-collection tiles for registered images, an image
    URL lookup endpoint, and the image bytes themselves. Failure rules
    let tests inject per-attempt errors; every request is counted.
    """

    def __init__(self, api_key="test-key"):
        self.api_key = api_key
        self.images = {}
        self.counts = {}
        self.lock = threading.Lock()
        self.blob_fail = None     # callable(image_id, attempt) -> bool
        self.lookup_fail = None   # callable(image_id, attempt) -> bool
        self.server = None
        self._thread = None

    def add_image(self, image_id, lon, lat, sequence_id="seq-a", is_pano=False, data=None,
                  compass_angle=0.0, captured_at=1690000000000):
        self.images[int(image_id)] = {
            "lon": lon,
            "lat": lat,
            "sequence_id": sequence_id,
            "is_pano": is_pano,
            "compass_angle": compass_angle,
            "captured_at": captured_at,
            "data": data if data is not None else f"image-bytes-{image_id}".encode(),
        }

    def bump(self, kind, ident):
        with self.lock:
            key = (kind, ident)
            self.counts[key] = self.counts.get(key, 0) + 1
            return self.counts[key]

    def count(self, kind, ident):
        with self.lock:
            return self.counts.get((kind, ident), 0)

    def reset_counts(self):
        with self.lock:
            self.counts.clear()

    def start(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _json(self, status, payload):
                body = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                url = urlparse(self.path)
                query = parse_qs(url.query)
                parts = url.path.strip("/").split("/")
                if parts[0] in ("tiles", "lookup") and query.get("key", [None])[0] != stub.api_key:
                    self._json(401, {"error": "bad key"})
                    return
                if parts[0] == "tiles" and len(parts) == 4:
                    z, x, y = int(parts[1]), int(parts[2]), int(parts[3].removesuffix(".json"))
                    stub.bump("tile", (z, x, y))
                    west, south, east, north = tile_bounds(z, x, y)
                    features = []
                    for image_id, info in sorted(stub.images.items()):
                        if west <= info["lon"] < east and south <= info["lat"] < north:
                            features.append({
                                "type": "Feature",
                                "geometry": {"type": "Point", "coordinates": [info["lon"], info["lat"]]},
                                "properties": {
                                    "id": image_id,
                                    "sequence_id": info["sequence_id"],
                                    "compass_angle": info["compass_angle"],
                                    "captured_at": info["captured_at"],
                                    "is_pano": info["is_pano"],
                                },
                            })
                    self._json(200, {"type": "FeatureCollection", "features": features})
                    return
                if parts[0] == "lookup" and len(parts) == 2:
                    image_id = int(parts[1])
                    attempt = stub.bump("lookup", image_id)
                    if image_id not in stub.images:
                        self._json(404, {"error": "unknown image"})
                        return
                    if stub.lookup_fail and stub.lookup_fail(image_id, attempt):
                        self._json(500, {"error": "injected"})
                        return
                    self._json(200, {"url": f"{stub.base_url}/blob/{image_id}.jpg"})
                    return
                if parts[0] == "blob" and len(parts) == 2:
                    image_id = int(parts[1].removesuffix(".jpg"))
                    attempt = stub.bump("blob", image_id)
                    info = stub.images.get(image_id)
                    if info is None:
                        self._json(404, {"error": "unknown image"})
                        return
                    if stub.blob_fail and stub.blob_fail(image_id, attempt):
                        self._json(500, {"error": "injected"})
                        return
                    self.send_response(200)
                    self.send_header("Content-Type", "image/jpeg")
                    self.send_header("Content-Length", str(len(info["data"])))
                    self.end_headers()
                    self.wfile.write(info["data"])
                    return
                self._json(404, {"error": "no route"})

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    @property
    def base_url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    @property
    def tile_url(self):
        return self.base_url + "/tiles/{z}/{x}/{y}.json?key={api_key}"

    @property
    def image_url(self):
        return self.base_url + "/lookup/{image_id}?key={api_key}"

    def stop(self):
        if self.server:
            self.server.shutdown()
            self.server.server_close()


@pytest.fixture
def stub_imagery():
    stub = StubImagery().start()
    yield stub
    stub.stop()
