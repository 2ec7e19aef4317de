"""Dataset manifests, frame files and ingestion into paired, geo-tagged frames.

A manifest is a JSON document next to the data::

    {"runs": [{"name": ..., "route": ..., "season": ..., "time_of_day": ...,
               "direction": "forward" | "backward",
               "frames_dir": "<relative dir>", "gps_csv": "<relative file>"}]}

Frame files are 8-bit grayscale PNG or PGM named
``<image_id>_<timestamp_ms>_<intensity|disparity>.(png|pgm)``.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import IngestionError, ValidationError
from .features import SENSORS, TARGET_H, TARGET_W, ImageFrame, downsample
from .geo import GpsTrack, read_gps_csv

log = logging.getLogger(__name__)

FRAME_RE = re.compile(r"^(?P<id>.+)_(?P<ts>\d+)_(?P<kind>intensity|disparity)\.(?P<ext>png|pgm)$")
DIRECTIONS = ("forward", "backward")


@dataclass(frozen=True)
class Run:
    name: str
    route: str
    season: str
    time_of_day: str
    direction: str
    frames_dir: str
    gps_csv: str

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"run {self.name}: direction must be forward or backward")

    @property
    def scenario(self) -> str:
        return f"{self.season}_{self.time_of_day}"


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    runs: tuple[Run, ...]

    def run(self, name: str) -> Run:
        for r in self.runs:
            if r.name == name:
                return r
        raise ValidationError(f"no run named {name!r}; have {[r.name for r in self.runs]}")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestionError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON ({exc})") from exc
    root = path.parent
    runs = []
    for i, entry in enumerate(doc.get("runs", [])):
        try:
            run = Run(**{k: str(entry[k]) for k in Run.__dataclass_fields__})
        except KeyError as exc:
            raise IngestionError(f"{path}: run {i} lacks field {exc}") from None
        except ValidationError as exc:
            raise IngestionError(f"{path}: {exc}") from None
        if not (root / run.frames_dir).is_dir():
            raise IngestionError(f"{path}: run {run.name}: frames dir {run.frames_dir} not found")
        if not (root / run.gps_csv).is_file():
            raise IngestionError(f"{path}: run {run.name}: GPS file {run.gps_csv} not found")
        runs.append(run)
    if not runs:
        raise IngestionError(f"{path}: manifest lists no runs")
    names = [r.name for r in runs]
    if len(set(names)) != len(names):
        raise IngestionError(f"{path}: duplicate run names")
    return DatasetManifest(root, tuple(runs))


def write_manifest(root, runs: Sequence[Run]) -> Path:
    path = Path(root) / "manifest.json"
    doc = {"runs": [asdict(r) for r in runs]}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def frame_filename(image_id: str, timestamp: float, kind: str, ext: str = "pgm") -> str:
    return f"{image_id}_{int(round(timestamp * 1000))}_{kind}.{ext}"


def read_frame(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise IngestionError(f"{path}: expected 8-bit grayscale, found mode {img.mode}")
            return np.asarray(img, dtype=np.uint8).copy()
    except OSError as exc:
        raise IngestionError(f"{path}: cannot decode image ({exc})") from exc


def write_frame(path, pixels: np.ndarray) -> None:
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(path)


@dataclass(frozen=True)
class FrameRange:
    """Inclusive range of frame indices (0-based, time order) written ``a..b``."""

    start: int
    stop: int

    @classmethod
    def parse(cls, text: str) -> "FrameRange":
        m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
        if not m:
            raise ValidationError(f"frame range {text!r} must look like a..b")
        a, b = int(m.group(1)), int(m.group(2))
        if b < a:
            raise ValidationError(f"frame range {text!r} is empty")
        return cls(a, b)

    def __str__(self) -> str:
        return f"{self.start}..{self.stop}"


@dataclass(frozen=True)
class IngestedRun:
    run: Run
    pairs: tuple[tuple[ImageFrame, ImageFrame], ...]
    track: GpsTrack
    dropped: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([p[0].timestamp for p in self.pairs])

    @property
    def image_ids(self) -> list[str]:
        return [p[0].image_id for p in self.pairs]


def _scan_frames(frames_dir: Path) -> list[tuple[float, str, dict[str, Path]]]:
    entries: dict[str, dict] = {}
    for path in sorted(frames_dir.iterdir()):
        m = FRAME_RE.match(path.name)
        if not m:
            continue
        image_id, ts, kind = m.group("id"), int(m.group("ts")) / 1000.0, m.group("kind")
        entry = entries.setdefault(image_id, {"ts": ts, "files": {}})
        if entry["ts"] != ts:
            raise IngestionError(f"image {image_id}: frames disagree on timestamp ({path.name})")
        if kind in entry["files"]:
            raise IngestionError(f"image {image_id}: duplicate {kind} frame ({path.name})")
        entry["files"][kind] = path
    out = []
    for image_id, entry in entries.items():
        missing = [s for s in SENSORS if s not in entry["files"]]
        if missing:
            raise IngestionError(f"image {image_id}: missing {missing[0]} frame in {frames_dir}")
        out.append((entry["ts"], image_id, entry["files"]))
    out.sort(key=lambda e: (e[0], e[1]))
    return out


def ingest_run(
    manifest: DatasetManifest,
    run: Run | str,
    frames: FrameRange | None = None,
    target_w: int = TARGET_W,
    target_h: int = TARGET_H,
) -> IngestedRun:
    """Pair, geo-check and downsample the frames of one run.

    ``frames`` selects by position in time order before frames outside the
    GPS span are dropped.
    """
    if isinstance(run, str):
        run = manifest.run(run)
    track = read_gps_csv(manifest.root / run.gps_csv)
    entries = _scan_frames(manifest.root / run.frames_dir)
    if frames is not None:
        entries = entries[frames.start : frames.stop + 1]
    pairs, dropped = [], 0
    for ts, image_id, files in entries:
        if not track.covers(ts):
            dropped += 1
            continue
        pair = []
        for s in SENSORS:
            try:
                pair.append(downsample(ImageFrame(read_frame(files[s]), s, image_id, ts), target_w, target_h))
            except ValidationError as exc:
                raise IngestionError(f"{files[s]}: {exc}") from None
        pairs.append(tuple(pair))
    if dropped:
        log.warning("run %s: dropped %d frame(s) outside the GPS span", run.name, dropped)
    if not pairs:
        raise IngestionError(f"run {run.name}: no frames left after selection")
    return IngestedRun(run, tuple(pairs), track, dropped)
