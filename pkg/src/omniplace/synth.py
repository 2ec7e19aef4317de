"""Deterministic synthetic panoramas and GPS tracks for desk-scale experiments.

Places sit evenly on a circular loop. Each place has a fixed skyline-like
intensity texture and a depth structure. Each scenario (season/time of day)
applies a global gain and offset, a scenario-wide appearance overlay and
sensor noise of its own level. Noise profiles:

``noise-disparity``
    disparity frames are random smooth fields with random contrast,
    independent of place and scenario;
``clean``
    disparity frames render the place's depth structure plus mild noise.

With ``direction_flip`` every scenario is also driven backward: places are
visited in reverse order and every frame is mirrored left to right.
"""
from __future__ import annotations

import math
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataset import DatasetManifest, Run, frame_filename, load_manifest, write_frame, write_manifest
from .errors import ValidationError
from .geo import EARTH_RADIUS_M, GpsTrack, write_gps_csv

NOISE_PROFILES = ("noise-disparity", "clean")
DEFAULT_SCENARIOS = ("summer_morning", "summer_evening", "fall_evening")

PLACE_SPACING_M = 100.0
SPEED_MPS = 10.0
ORIGIN = (39.7510, -105.2226)


@dataclass(frozen=True)
class ScenarioLook:
    gain: float
    offset: float
    noise_sigma: float
    overlay_amplitude: float
    lateral_offset_m: float


def _scenario_look(index: int, rng: np.random.Generator) -> ScenarioLook:
    return ScenarioLook(
        gain=float(rng.uniform(0.75, 1.1)),
        offset=float(rng.uniform(-25, 25)),
        noise_sigma=float(rng.uniform(3, 8)),
        overlay_amplitude=float(rng.uniform(25, 40)),
        lateral_offset_m=float((-1) ** index * rng.uniform(1, 5)),
    )


def _smooth_field(rng, h, w, sigma) -> np.ndarray:
    f = gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    return f / (f.std() + 1e-12)


def place_texture(rng: np.random.Generator, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Intensity texture and depth map (0..255 floats) of one place."""
    rows = np.arange(h)[:, None]
    horizon = int(h * rng.uniform(0.45, 0.6))
    img = np.where(rows < horizon, 170.0 + 40 * rows / h, 80.0 + 30 * rows / h) * np.ones((1, w))
    depth = np.where(rows < horizon, 10.0, 60.0 + 150 * (rows - horizon) / max(h - horizon, 1)) * np.ones((1, w))
    for _ in range(int(rng.integers(10, 18))):
        bw = int(rng.integers(w // 40, w // 8))
        bh = int(rng.integers(h // 6, int(horizon * 0.95)))
        x0 = int(rng.integers(0, w - bw))
        top = horizon - bh
        tone = rng.uniform(30, 230)
        img[top:horizon, x0 : x0 + bw] = tone
        period = int(rng.integers(4, 14))
        if rng.random() < 0.7:
            xs = np.arange(bw)
            ys = np.arange(bh)
            windows = ((xs[None, :] % period) < period // 2) & ((ys[:, None] % period) < period // 2)
            img[top:horizon, x0 : x0 + bw] += np.where(windows, rng.uniform(-60, 60), 0.0)
        depth[top:horizon, x0 : x0 + bw] = rng.uniform(40, 220)
    img += 18 * _smooth_field(rng, h, w, 3.0)
    return img, depth


def _render(base: np.ndarray, look: ScenarioLook, overlay: np.ndarray, rng) -> np.ndarray:
    img = look.gain * base + look.offset + look.overlay_amplitude * overlay
    img += look.noise_sigma * rng.standard_normal(base.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def _noise_disparity(rng, h, w) -> np.ndarray:
    sigma = rng.uniform(1.0, 12.0)
    contrast = rng.uniform(5.0, 90.0)
    level = rng.uniform(40, 200)
    img = level + contrast * _smooth_field(rng, h, w, sigma) + rng.uniform(2, 25) * rng.standard_normal((h, w))
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def loop_position(arc_m: float, n_places: int, lateral_m: float = 0.0) -> tuple[float, float]:
    """(lat, lon) at arc length ``arc_m`` along the circular loop."""
    circumference = n_places * PLACE_SPACING_M
    radius = circumference / (2 * math.pi) + lateral_m
    phi = 2 * math.pi * arc_m / circumference
    north, east = radius * math.sin(phi), radius * (1 - math.cos(phi))
    lat = ORIGIN[0] + math.degrees(north / EARTH_RADIUS_M)
    lon = ORIGIN[1] + math.degrees(east / (EARTH_RADIUS_M * math.cos(math.radians(ORIGIN[0]))))
    return lat, lon


def _run_track(n_places, start_time, look, backward, rng) -> tuple[GpsTrack, list[float], list[int]]:
    per_place = PLACE_SPACING_M / SPEED_MPS
    order = list(range(n_places))[::-1] if backward else list(range(n_places))
    duration = per_place * (n_places - 1)
    times = np.arange(start_time - 5.0, start_time + duration + 6.0, 1.0)
    lat, lon = [], []
    for t in times:
        along = (t - start_time) * SPEED_MPS
        arc = order[0] * PLACE_SPACING_M + (-along if backward else along)
        la, lo = loop_position(arc, n_places, look.lateral_offset_m)
        jitter = rng.normal(0, 0.6, 2) / EARTH_RADIUS_M
        lat.append(la + math.degrees(jitter[0]))
        lon.append(lo + math.degrees(jitter[1]))
    frame_times = [start_time + per_place * k + 0.35 for k in range(n_places)]
    return GpsTrack(times, lat, lon), frame_times, order


def synth(
    out_dir,
    seed: int = 0,
    n_places: int = 20,
    scenarios: Sequence[str] = DEFAULT_SCENARIOS,
    noise_profile: str = "noise-disparity",
    direction_flip: bool = False,
    height: int = 240,
    width: int = 1504,
    route: str = "loop",
) -> DatasetManifest:
    """Write a synthetic dataset under ``out_dir`` and return its manifest."""
    if n_places < 2:
        raise ValidationError("need at least two places")
    if len(scenarios) < 2:
        raise ValidationError("need at least two scenarios")
    if len(set(scenarios)) != len(scenarios) or any("_" not in s for s in scenarios):
        raise ValidationError("scenario names must be unique and look like <season>_<time_of_day>")
    if noise_profile not in NOISE_PROFILES:
        raise ValidationError(f"noise profile must be one of {NOISE_PROFILES}")
    if height < 32 or width < 32:
        raise ValidationError("frames must be at least 32x32")

    out = Path(out_dir)
    if (out / "runs").exists():
        shutil.rmtree(out / "runs")
    out.mkdir(parents=True, exist_ok=True)

    master = np.random.default_rng(seed)
    place_seeds = master.integers(0, 2**63, n_places)
    scenario_seeds = master.integers(0, 2**63, len(scenarios))
    places = [place_texture(np.random.default_rng(s), height, width) for s in place_seeds]

    runs = []
    directions = ("forward", "backward") if direction_flip else ("forward",)
    for si, (scenario, sseed) in enumerate(zip(scenarios, scenario_seeds)):
        srng = np.random.default_rng(sseed)
        look = _scenario_look(si, srng)
        overlay = _smooth_field(srng, height, width, 6.0)
        season, time_of_day = scenario.split("_", 1)
        for direction in directions:
            backward = direction == "backward"
            name = f"{route}_{scenario}_{direction}"
            rng = np.random.default_rng([seed, si, int(backward)])
            run_dir = out / "runs" / name
            frames_dir = run_dir / "frames"
            frames_dir.mkdir(parents=True)
            start = 1_500_000_000.0 + 100_000.0 * si + 50_000.0 * backward
            track, times, order = _run_track(n_places, start, look, backward, rng)
            write_gps_csv(run_dir / "gps.csv", track)
            for k, (t, place) in enumerate(zip(times, order)):
                base, depth = places[place]
                intensity = _render(base, look, overlay, rng)
                if noise_profile == "noise-disparity":
                    disparity = _noise_disparity(rng, height, width)
                else:
                    disparity = np.clip(np.round(depth + 4 * rng.standard_normal(depth.shape)), 0, 255).astype(np.uint8)
                if backward:
                    intensity, disparity = intensity[:, ::-1], disparity[:, ::-1]
                image_id = f"{scenario}-{direction[0]}{k:04d}"
                write_frame(frames_dir / frame_filename(image_id, t, "intensity"), intensity)
                write_frame(frames_dir / frame_filename(image_id, t, "disparity"), disparity)
            runs.append(Run(name, route, season, time_of_day, direction,
                            str(frames_dir.relative_to(out)), str((run_dir / "gps.csv").relative_to(out))))
    write_manifest(out, runs)
    return load_manifest(out)
