"""Small geodesy helpers shared by the sampling and export stages."""

from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

# Meters per degree of latitude on the spherical model.
METERS_PER_DEGREE = math.pi * EARTH_RADIUS_M / 180.0


def haversine_m(lon1, lat1, lon2, lat2):
    """Great-circle distance in meters. Accepts scalars or numpy arrays."""
    lon1, lat1, lon2, lat2 = (
        np.radians(np.asarray(v, dtype=float)) for v in (lon1, lat1, lon2, lat2)
    )
    dlon = lon2 - lon1
    dlat = lat2 - lat1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(a))
    return d.item() if d.ndim == 0 else d


def local_xy(lon, lat, lon0: float, lat0: float, mean_lat: float):
    """Project lon/lat to meters in an equirectangular frame anchored at (lon0, lat0)."""
    scale = math.cos(math.radians(mean_lat))
    x = (np.asarray(lon, dtype=float) - lon0) * METERS_PER_DEGREE * scale
    y = (np.asarray(lat, dtype=float) - lat0) * METERS_PER_DEGREE
    return x, y


def local_lonlat(x, y, lon0: float, lat0: float, mean_lat: float):
    """Inverse of :func:`local_xy`."""
    scale = math.cos(math.radians(mean_lat))
    lon = np.asarray(x, dtype=float) / (METERS_PER_DEGREE * scale) + lon0
    lat = np.asarray(y, dtype=float) / METERS_PER_DEGREE + lat0
    return lon, lat
