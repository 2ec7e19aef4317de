"""Panorama descriptors (GIST, HOG, LBP) and assembly of the feature matrix.

Every image contributes one column built from both sensor frames, laid out as
``intensity: [gist, hog, lbp, external...]`` followed by the same blocks for
``disparity``. Block statistics for standardization are fitted on training
columns and reused for queries.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import IngestionError, ShapeError, ValidationError
from .model import FeatureMatrix, ModalityLayout

SENSORS = ("intensity", "disparity")
TARGET_H = 120
TARGET_W = 752


@dataclass(frozen=True)
class ImageFrame:
    pixels: np.ndarray
    kind: str
    image_id: str
    timestamp: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValidationError(f"frame {self.image_id}: pixels must be a non-empty 2-D grid")
        if px.dtype != np.uint8:
            if np.any((px < 0) | (px > 255)) or np.any(px != np.round(px)):
                raise ValidationError(f"frame {self.image_id}: pixels must be 8-bit values")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        if self.kind not in SENSORS:
            raise ValidationError(f"frame kind must be one of {SENSORS}, got {self.kind!r}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ExternalSpec:
    name: str
    dim: int
    sensor: str


@dataclass(frozen=True)
class DescriptorConfig:
    hog_cell: int = 16
    hog_bins: int = 9
    hog_block: int = 2
    hog_clip: float = 0.2
    lbp_radius: int = 1
    lbp_neighbors: int = 8
    lbp_uniform: bool = True
    gist_orientations: int = 4
    gist_scales: int = 2
    gist_grid: int = 4
    mirror_pool: bool = False
    target_w: int = TARGET_W
    target_h: int = TARGET_H
    external: tuple[ExternalSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "external", tuple(self.external))
        for name in ("hog_cell", "hog_bins", "hog_block", "gist_orientations",
                     "gist_scales", "gist_grid", "target_w", "target_h"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if not 0 < self.hog_clip <= 1:
            raise ValidationError("hog_clip must lie in (0, 1]")
        if (self.lbp_radius, self.lbp_neighbors) != (1, 8):
            raise ValidationError("only radius-1, 8-neighbour LBP is supported")
        for ext in self.external:
            if ext.sensor not in SENSORS or ext.dim < 1:
                raise ValidationError(f"bad external feature spec {ext}")

    def hog_dim(self, h: int, w: int) -> int:
        ncy, ncx = h // self.hog_cell, w // self.hog_cell
        nby, nbx = ncy - self.hog_block + 1, ncx - self.hog_block + 1
        return max(nby, 0) * max(nbx, 0) * self.hog_block**2 * self.hog_bins

    @property
    def lbp_dim(self) -> int:
        return 59 if self.lbp_uniform else 256

    @property
    def gist_dim(self) -> int:
        return self.gist_orientations * self.gist_scales * self.gist_grid**2

    def layout(self, h: int | None = None, w: int | None = None) -> ModalityLayout:
        h = self.target_h if h is None else h
        w = self.target_w if w is None else w
        spec = []
        for sensor in SENSORS:
            feats = [("gist", self.gist_dim), ("hog", self.hog_dim(h, w)), ("lbp", self.lbp_dim)]
            feats += [(e.name, e.dim) for e in self.external if e.sensor == sensor]
            spec.append((sensor, feats))
        return ModalityLayout.from_spec(spec)


# --------------------------------------------------------------------------
# resampling


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic matrix averaging input cells over each output cell."""
    scale = n_in / n_out
    R = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(math.floor(lo)), min(int(math.ceil(hi)), n_in)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                R[i, j] = overlap / scale
    return R


def downsample(frame: ImageFrame, target_w: int = TARGET_W, target_h: int = TARGET_H) -> ImageFrame:
    """Area-averaged resize; averages are rounded half up to 8 bits."""
    if target_w < 1 or target_h < 1:
        raise ValidationError("target size must be positive")
    if target_w > frame.width or target_h > frame.height:
        raise ValidationError(
            f"frame {frame.image_id}: cannot upscale {frame.height}x{frame.width} "
            f"to {target_h}x{target_w}"
        )
    if (target_h, target_w) == frame.pixels.shape:
        return frame
    ry = _area_weights(frame.height, target_h)
    rx = _area_weights(frame.width, target_w)
    avg = ry @ frame.pixels.astype(np.float64) @ rx.T
    out = np.clip(np.floor(avg + 0.5), 0, 255).astype(np.uint8)
    return ImageFrame(out, frame.kind, frame.image_id, frame.timestamp)


# --------------------------------------------------------------------------
# descriptors


def _pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, ImageFrame) else np.asarray(frame, dtype=np.uint8)


def hog(frame, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Block-normalized (L2-Hys) histograms of unsigned gradient orientation.

    Cells that do not fit entirely in the frame are dropped. Blocks of
    ``hog_block x hog_block`` cells slide with a one-cell stride; each block
    vector is normalized, clipped at ``hog_clip`` and normalized again.
    """
    img = _pixels(frame)
    b = cfg.hog_block
    if img.shape[0] < b * cfg.hog_cell or img.shape[1] < b * cfg.hog_cell:
        raise ValidationError(f"frame {img.shape} smaller than one HOG block")
    cells = kernels.hog_cell_histograms(img, cfg.hog_cell, cfg.hog_bins)
    ncy, ncx, nb = cells.shape
    nby, nbx = ncy - b + 1, ncx - b + 1
    blocks = np.empty((nby, nbx, b, b, nb))
    for dy in range(b):
        for dx in range(b):
            blocks[:, :, dy, dx, :] = cells[dy : dy + nby, dx : dx + nbx, :]
    blocks = blocks.reshape(nby * nbx, b * b * nb)
    blocks = _l2_normalize(blocks)
    np.minimum(blocks, cfg.hog_clip, out=blocks)
    blocks = _l2_normalize(blocks)
    return blocks.ravel()


def _l2_normalize(v: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    return v / np.sqrt(np.sum(v * v, axis=1, keepdims=True) + eps * eps)


@lru_cache(maxsize=4)
def _lbp_table(uniform: bool) -> np.ndarray:
    """Map each 8-bit code to its histogram bin.

    Uniform codes (at most two circular 0/1 transitions) get one bin each in
    ascending code order; all other codes share the last bin.
    """
    if not uniform:
        return np.arange(256, dtype=np.int64)
    table = np.empty(256, dtype=np.int64)
    nxt = 0
    for code in range(256):
        rotated = ((code >> 1) | ((code & 1) << 7)) & 0xFF
        if bin(code ^ rotated).count("1") <= 2:
            table[code] = nxt
            nxt += 1
        else:
            table[code] = -1
    table[table < 0] = nxt
    return table


def lbp(frame, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """L1-normalized histogram of radius-1 local binary patterns."""
    img = _pixels(frame)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValidationError(f"frame {img.shape} too small for LBP")
    counts = kernels.lbp_histogram(img, _lbp_table(cfg.lbp_uniform), cfg.lbp_dim)
    return counts / counts.sum()


@lru_cache(maxsize=8)
def gabor_bank(h: int, w: int, orientations: int, scales: int) -> np.ndarray:
    """Frequency-domain Gabor transfer functions, shape (scales, orientations, h, w).

    Scale ``s`` is tuned to ``0.25 / 2**s`` cycles/pixel; orientation ``o`` to
    a wave vector at ``o * 180 / orientations`` degrees from the x axis. Each
    filter is one-sided (analytic) and has exactly zero gain at DC.
    """
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    bank = np.empty((scales, orientations, h, w))
    for s in range(scales):
        f0 = 0.25 / 2**s
        sigma_u = 0.55 * f0
        sigma_v = 0.35 * f0
        for o in range(orientations):
            theta = math.pi * o / orientations
            u = fx * math.cos(theta) + fy * math.sin(theta)
            v = -fx * math.sin(theta) + fy * math.cos(theta)
            g = np.exp(-((u - f0) ** 2) / (2 * sigma_u**2) - v**2 / (2 * sigma_v**2))
            g[0, 0] = 0.0
            bank[s, o] = g
    bank.flags.writeable = False
    return bank


def gist(frame, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Mean Gabor magnitude per (scale, orientation, grid cell).

    Pixel values are scaled to [0, 1]. Output order is scale-major, then
    orientation, then grid cells in row-major order.
    """
    img = _pixels(frame)
    if img.shape[0] < 32 or img.shape[1] < 32:
        raise ValidationError(f"frame {img.shape} too small for GIST (need 32x32)")
    h, w = img.shape
    bank = gabor_bank(h, w, cfg.gist_orientations, cfg.gist_scales)
    spectrum = np.fft.fft2(img.astype(np.float64) / 255.0)
    mag = np.abs(np.fft.ifft2(spectrum[None, None] * bank))
    g = cfg.gist_grid
    row_starts = np.array([r[0] for r in np.array_split(np.arange(h), g)])
    col_starts = np.array([c[0] for c in np.array_split(np.arange(w), g)])
    sums = np.add.reduceat(np.add.reduceat(mag, row_starts, axis=2), col_starts, axis=3)
    counts = np.outer(np.diff(np.append(row_starts, h)), np.diff(np.append(col_starts, w)))
    return (sums / counts).ravel()


def describe(frame: ImageFrame, cfg: DescriptorConfig = DescriptorConfig()) -> list[np.ndarray]:
    """``[gist, hog, lbp]`` of one frame, mirror-averaged when configured."""
    blocks = [gist(frame, cfg), hog(frame, cfg), lbp(frame, cfg)]
    if cfg.mirror_pool:
        flipped = np.ascontiguousarray(frame.pixels[:, ::-1])
        mirror = [gist(flipped, cfg), hog(flipped, cfg), lbp(flipped, cfg)]
        blocks = [0.5 * (a + b) for a, b in zip(blocks, mirror)]
    return blocks


# --------------------------------------------------------------------------
# external vectors


@dataclass(frozen=True)
class ExternalFeatures:
    name: str
    dim: int
    sensor: str
    vectors: Mapping[str, np.ndarray]

    @property
    def spec(self) -> ExternalSpec:
        return ExternalSpec(self.name, self.dim, self.sensor)


def read_external(path) -> ExternalFeatures:
    """Parse ``external <name> <dim> <sensor>`` then ``<image_id> v1 .. v_dim`` lines."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "external":
            raise IngestionError(f"{path}: first line must be 'external <name> <dim> <sensor>'")
        name, sensor = header[1], header[3]
        try:
            dim = int(header[2])
        except ValueError:
            raise IngestionError(f"{path}: bad dimension {header[2]!r}") from None
        if sensor not in SENSORS:
            raise IngestionError(f"{path}: unknown sensor {sensor!r}")
        vectors = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise IngestionError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                vec = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: unparsable value") from None
            if not np.all(np.isfinite(vec)):
                raise IngestionError(f"{path}:{lineno}: non-finite value")
            vectors[parts[0]] = vec
    return ExternalFeatures(name, dim, sensor, vectors)


def write_external(path, ext: ExternalFeatures) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"external {ext.name} {ext.dim} {ext.sensor}\n")
        for image_id, vec in ext.vectors.items():
            fh.write(image_id + " " + " ".join(repr(float(v)) for v in vec) + "\n")


# --------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class BlockNormalizer:
    """Per-row centering and one scale per feature block.

    Every standardized training block has zero mean and unit variance over
    all its entries; blocks that are constant over the training images map
    to zeros.
    """

    layout: ModalityLayout
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        for name in ("mean", "scale"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.mean.shape != (self.layout.total_dim,):
            raise ShapeError("normalizer mean does not match layout")
        if self.scale.shape != (self.layout.n_feature_blocks,):
            raise ShapeError("normalizer scale does not match layout")

    @classmethod
    def fit(cls, raw: FeatureMatrix) -> "BlockNormalizer":
        X = raw.values
        mean = X.mean(axis=1)
        centered = X - mean[:, None]
        scale = np.array([math.sqrt(float(np.mean(centered[s] ** 2)))
                          for s in raw.layout.feature_slices()])
        return cls(raw.layout, mean, scale)

    def apply(self, raw: FeatureMatrix) -> FeatureMatrix:
        if raw.layout != self.layout:
            raise ShapeError("feature layout differs from the fitted normalizer")
        out = raw.values - self.mean[:, None]
        for rows, sc in zip(self.layout.feature_slices(), self.scale):
            if sc > 0:
                out[rows] /= sc
            else:
                out[rows] = 0.0
        return FeatureMatrix(self.layout, out, raw.image_ids)


# --------------------------------------------------------------------------
# assembly


def _column(pair, cfg, external):
    parts = []
    for frame in pair:
        parts.extend(describe(frame, cfg))
        for ext in external:
            if ext.sensor == frame.kind:
                parts.append(ext.vectors[frame.image_id])
    return np.concatenate(parts)


def _check_pairs(frames, external):
    shape = None
    for pair in frames:
        if len(pair) != 2:
            raise IngestionError("each image needs exactly one intensity and one disparity frame")
        kinds = {f.kind: f for f in pair}
        image_id = pair[0].image_id
        for sensor in SENSORS:
            if sensor not in kinds:
                raise IngestionError(f"image {image_id}: missing {sensor} frame")
        if kinds["intensity"].image_id != kinds["disparity"].image_id:
            raise IngestionError(
                f"unpaired frames {kinds['intensity'].image_id} / {kinds['disparity'].image_id}"
            )
        for f in pair:
            if shape is None:
                shape = f.pixels.shape
            elif f.pixels.shape != shape:
                raise ValidationError(f"image {image_id}: frame size {f.pixels.shape} != {shape}")
        for ext in external:
            if image_id not in ext.vectors:
                raise IngestionError(f"image {image_id}: no row in external features {ext.name!r}")
    return shape


def extract_raw(
    frames: Sequence[tuple[ImageFrame, ImageFrame]],
    cfg: DescriptorConfig = DescriptorConfig(),
    external: Sequence[ExternalFeatures] = (),
    workers: int = 1,
) -> FeatureMatrix:
    """Unstandardized feature matrix, one column per intensity/disparity pair."""
    if not frames:
        raise ValidationError("no frames to describe")
    external = list(external)
    if [e.spec for e in external] != list(cfg.external):
        raise ValidationError("external feature files do not match the descriptor config")
    h, w = _check_pairs(frames, external)
    pairs = [tuple(sorted(p, key=lambda f: SENSORS.index(f.kind))) for p in frames]
    layout = cfg.layout(h, w)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(lambda p: _column(p, cfg, external), pairs))
    else:
        cols = [_column(p, cfg, external) for p in pairs]
    return FeatureMatrix(layout, np.stack(cols, axis=1), [p[0].image_id for p in pairs])


def extract_all(
    frames: Sequence[tuple[ImageFrame, ImageFrame]],
    cfg: DescriptorConfig = DescriptorConfig(),
    external: Sequence[ExternalFeatures] = (),
    normalizer: BlockNormalizer | None = None,
    workers: int = 1,
) -> tuple[FeatureMatrix, BlockNormalizer]:
    """Standardized feature matrix plus the statistics used.

    Without ``normalizer`` the statistics are fitted on these frames (the
    training set); pass the stored one at query time.
    """
    raw = extract_raw(frames, cfg, external, workers)
    if normalizer is None:
        normalizer = BlockNormalizer.fit(raw)
    return normalizer.apply(raw), normalizer
