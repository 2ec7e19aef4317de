"""GPS tracks, interpolation to frame timestamps, and same-place ground truth."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ExtrapolationError, IngestionError, ValidationError

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_RADIUS_M = 50.0


@dataclass(frozen=True)
class GpsTrack:
    """Time-sorted GPS fixes (seconds, degrees)."""

    timestamps: np.ndarray
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float)
        lat = np.array(self.lat, dtype=float)
        lon = np.array(self.lon, dtype=float)
        if not (t.ndim == lat.ndim == lon.ndim == 1 and t.size == lat.size == lon.size):
            raise ValidationError("track arrays must be 1-D and of equal length")
        if t.size < 2:
            raise ValidationError("a GPS track needs at least two samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
            raise ValidationError("track contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("track timestamps must be strictly increasing")
        if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
            raise ValidationError("latitude/longitude out of range")
        for name, arr in (("timestamps", t), ("lat", lat), ("lon", lon)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.timestamps[0]), float(self.timestamps[-1])

    def covers(self, t: float) -> bool:
        return self.timestamps[0] <= t <= self.timestamps[-1]


def interpolate(track: GpsTrack, t: float) -> tuple[float, float]:
    """Linear interpolation of (lat, lon) between the bracketing fixes."""
    lat, lon = interpolate_many(track, [t])
    return float(lat[0]), float(lon[0])


def interpolate_many(track: GpsTrack, times: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=float)
    outside = np.flatnonzero((times < track.timestamps[0]) | (times > track.timestamps[-1]))
    if outside.size:
        t0, t1 = track.span
        raise ExtrapolationError(
            f"times at indices {outside[:5].tolist()} lie outside the track span [{t0}, {t1}]"
        )
    return (
        np.interp(times, track.timestamps, track.lat),
        np.interp(times, track.timestamps, track.lon),
    )


def haversine_m(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) points."""
    return float(haversine_matrix(np.array([p1[0]]), np.array([p1[1]]),
                                  np.array([p2[0]]), np.array([p2[1]]))[0, 0])


def haversine_matrix(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Pairwise distances (len(lat1) x len(lat2)) in meters."""
    phi1 = np.radians(np.asarray(lat1, dtype=float))[:, None]
    phi2 = np.radians(np.asarray(lat2, dtype=float))[None, :]
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2, dtype=float))[None, :] - np.radians(
        np.asarray(lon1, dtype=float)
    )[:, None]
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@dataclass(frozen=True)
class GroundTruth:
    same_place: np.ndarray
    radius_m: float = DEFAULT_RADIUS_M
    distances_m: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(self.same_place, dtype=bool)
        m.flags.writeable = False
        object.__setattr__(self, "same_place", m)
        if m.ndim != 2:
            raise ValidationError("ground truth must be a matrix")
        if not self.radius_m > 0:
            raise ValidationError("radius must be positive")


def build_ground_truth(
    query_times: Sequence[float],
    template_times: Sequence[float],
    query_track: GpsTrack,
    template_track: GpsTrack,
    radius_m: float = DEFAULT_RADIUS_M,
) -> GroundTruth:
    """Mark query/template pairs whose interpolated fixes are closer than ``radius_m``."""
    if not radius_m > 0:
        raise ValidationError("radius must be positive")
    try:
        qlat, qlon = interpolate_many(query_track, query_times)
    except ExtrapolationError as exc:
        raise ExtrapolationError(f"query {exc}") from None
    try:
        tlat, tlon = interpolate_many(template_track, template_times)
    except ExtrapolationError as exc:
        raise ExtrapolationError(f"template {exc}") from None
    dist = haversine_matrix(qlat, qlon, tlat, tlon)
    return GroundTruth(dist < radius_m, radius_m, dist)


def read_gps_csv(path) -> GpsTrack:
    """Read a ``timestamp,lat,lon`` CSV file."""
    times, lats, lons = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "lat", "lon"]:
            raise IngestionError(f"{path}:1: header must be 'timestamp,lat,lon'")
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise IngestionError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                t, la, lo = (float(c) for c in row)
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: unparsable number in {row}") from None
            if not all(math.isfinite(v) for v in (t, la, lo)):
                raise IngestionError(f"{path}:{lineno}: non-finite value")
            times.append(t)
            lats.append(la)
            lons.append(lo)
    try:
        return GpsTrack(times, lats, lons)
    except ValidationError as exc:
        raise IngestionError(f"{path}: {exc}") from None


def write_gps_csv(path, track: GpsTrack) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "lat", "lon"])
        for t, la, lo in zip(track.timestamps, track.lat, track.lon):
            writer.writerow([repr(float(t)), repr(float(la)), repr(float(lo))])
