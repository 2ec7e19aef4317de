"""Block structure of the multimodal descriptor and the group-norm objective.

Rows of the feature matrix ``A`` (p x n, one column per image) and of the
weight matrix ``W`` (p x c, one column per scenario) are partitioned into
sensors, and each sensor into feature modalities. Two group norms are built
on that partition:

* the M-norm, ``sum_q sum_k ||W^q_k||_F`` over feature blocks, and
* the S-norm, ``sum_q ||W^q||_F`` over sensor blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import LayoutError, ShapeError, ValidationError

LOSS_VARIANTS = ("squared", "unsquared")


@dataclass(frozen=True)
class FeatureBlock:
    name: str
    dim: int


@dataclass(frozen=True)
class SensorBlock:
    name: str
    features: tuple[FeatureBlock, ...]


@dataclass(frozen=True)
class ModalityLayout:
    """Ordered sensors, each holding ordered feature blocks of fixed size.

    Rows are assigned contiguously: sensor 0 feature 0 first, then sensor 0
    feature 1, and so on.
    """

    sensors: tuple[SensorBlock, ...]
    _feature_offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sensors = tuple(self.sensors)
        object.__setattr__(self, "sensors", sensors)
        if not sensors:
            raise LayoutError("layout needs at least one sensor")
        _check_unique([s.name for s in sensors], "sensor")
        offsets = [0]
        for sensor in sensors:
            if not sensor.features:
                raise LayoutError(f"sensor {sensor.name!r} has no feature blocks")
            _check_unique([f.name for f in sensor.features], f"feature in sensor {sensor.name!r}")
            for feat in sensor.features:
                if int(feat.dim) != feat.dim or feat.dim < 1:
                    raise LayoutError(
                        f"feature {sensor.name}/{feat.name} has invalid dim {feat.dim!r}"
                    )
                offsets.append(offsets[-1] + int(feat.dim))
        object.__setattr__(self, "_feature_offsets", tuple(offsets))

    @classmethod
    def from_spec(cls, spec: Sequence[tuple[str, Sequence[tuple[str, int]]]]) -> "ModalityLayout":
        """Build from ``[(sensor, [(feature, dim), ...]), ...]``."""
        return cls(
            tuple(
                SensorBlock(sname, tuple(FeatureBlock(fname, int(dim)) for fname, dim in feats))
                for sname, feats in spec
            )
        )

    @property
    def total_dim(self) -> int:
        return self._feature_offsets[-1]

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def n_feature_blocks(self) -> int:
        return len(self._feature_offsets) - 1

    def _check_sensor(self, sensor: int) -> None:
        if not 0 <= sensor < len(self.sensors):
            raise LayoutError(f"sensor index {sensor} out of range [0, {len(self.sensors)})")

    def _flat_index(self, sensor: int, feature: int) -> int:
        self._check_sensor(sensor)
        nfeat = len(self.sensors[sensor].features)
        if not 0 <= feature < nfeat:
            raise LayoutError(
                f"feature index {feature} out of range [0, {nfeat}) for sensor {sensor}"
            )
        return sum(len(s.features) for s in self.sensors[:sensor]) + feature

    def feature_slice(self, sensor: int, feature: int) -> slice:
        i = self._flat_index(sensor, feature)
        return slice(self._feature_offsets[i], self._feature_offsets[i + 1])

    def sensor_slice(self, sensor: int) -> slice:
        self._check_sensor(sensor)
        first = self._flat_index(sensor, 0)
        last = first + len(self.sensors[sensor].features)
        return slice(self._feature_offsets[first], self._feature_offsets[last])

    def feature_slices(self) -> list[slice]:
        """Row ranges of every feature block, in layout order."""
        o = self._feature_offsets
        return [slice(o[i], o[i + 1]) for i in range(len(o) - 1)]

    def sensor_slices(self) -> list[slice]:
        return [self.sensor_slice(q) for q in range(len(self.sensors))]

    def iter_blocks(self) -> Iterator[tuple[int, int, SensorBlock, FeatureBlock, slice]]:
        """Yield ``(sensor_idx, feature_idx, sensor, feature, rows)``."""
        i = 0
        o = self._feature_offsets
        for q, sensor in enumerate(self.sensors):
            for k, feat in enumerate(sensor.features):
                yield q, k, sensor, feat, slice(o[i], o[i + 1])
                i += 1

    def sensor_of_block(self) -> np.ndarray:
        """Sensor index for each flat feature block."""
        return np.array([q for q, s in enumerate(self.sensors) for _ in s.features], dtype=int)

    def to_lines(self) -> list[str]:
        lines = []
        for sensor in self.sensors:
            lines.append(f"sensor {sensor.name}")
            lines.extend(f"feature {f.name} {f.dim}" for f in sensor.features)
        return lines

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "ModalityLayout":
        spec: list[tuple[str, list[tuple[str, int]]]] = []
        for lineno, raw in enumerate(lines, 1):
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "sensor" and len(parts) == 2:
                spec.append((parts[1], []))
            elif parts[0] == "feature" and len(parts) == 3:
                if not spec:
                    raise LayoutError(f"line {lineno}: feature before any sensor")
                try:
                    dim = int(parts[2])
                except ValueError:
                    raise LayoutError(f"line {lineno}: bad feature dim {parts[2]!r}") from None
                spec[-1][1].append((parts[1], dim))
            else:
                raise LayoutError(f"line {lineno}: unrecognized layout line {raw.strip()!r}")
        return cls.from_spec(spec)


def _check_unique(names, what):
    seen = set()
    for name in names:
        if not name or any(ch.isspace() for ch in name):
            raise LayoutError(f"{what} name {name!r} must be non-empty without whitespace")
        if name in seen:
            raise LayoutError(f"duplicate {what} name {name!r}")
        seen.add(name)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureMatrix:
    """Stacked multimodal descriptors, one column per image."""

    layout: ModalityLayout
    values: np.ndarray
    image_ids: tuple[str, ...]

    def __post_init__(self):
        values = _frozen_array(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "image_ids", tuple(str(i) for i in self.image_ids))
        if values.ndim != 2 or values.shape[0] != self.layout.total_dim:
            raise ShapeError(
                f"feature matrix shape {values.shape} does not match layout dim {self.layout.total_dim}"
            )
        if values.shape[1] < 1:
            raise ShapeError("feature matrix needs at least one image column")
        if len(self.image_ids) != values.shape[1]:
            raise ShapeError(f"{len(self.image_ids)} image ids for {values.shape[1]} columns")
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature matrix contains non-finite entries")

    @property
    def n_images(self) -> int:
        return self.values.shape[1]

    def select(self, columns: Sequence[int]) -> "FeatureMatrix":
        columns = list(columns)
        return FeatureMatrix(
            self.layout, self.values[:, columns], [self.image_ids[j] for j in columns]
        )


@dataclass(frozen=True)
class ScenarioLabels:
    """One-hot image-to-scenario membership (n x c)."""

    values: np.ndarray
    scenario_names: tuple[str, ...]

    def __post_init__(self):
        values = _frozen_array(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scenario_names", tuple(self.scenario_names))
        if values.ndim != 2:
            raise ShapeError("scenario labels must be a 2-D matrix")
        n, c = values.shape
        if c < 1 or len(self.scenario_names) != c:
            raise ShapeError(f"{len(self.scenario_names)} scenario names for {c} label columns")
        if not np.all((values == 0) | (values == 1)):
            raise ValidationError("scenario labels must be 0/1")
        bad = np.flatnonzero(values.sum(axis=1) != 1)
        if bad.size:
            raise ValidationError(
                f"image rows {bad[:5].tolist()} do not belong to exactly one scenario"
            )

    @classmethod
    def from_assignments(cls, assignments: Sequence[int], scenario_names: Sequence[str]) -> "ScenarioLabels":
        assignments = np.asarray(assignments, dtype=int)
        c = len(scenario_names)
        if assignments.size and (assignments.min() < 0 or assignments.max() >= c):
            raise ValidationError("scenario assignment out of range")
        values = np.zeros((assignments.size, c))
        values[np.arange(assignments.size), assignments] = 1.0
        return cls(values, scenario_names)

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WeightMatrix:
    """Learned p x c importance weights."""

    layout: ModalityLayout
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] != self.layout.total_dim or values.shape[1] < 1:
            raise ShapeError(
                f"weight matrix shape {values.shape} does not match layout dim {self.layout.total_dim}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("weight matrix contains non-finite entries")


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.1
    lambda2: float = 0.01
    loss_variant: str = "squared"

    def __post_init__(self):
        if not (self.lambda1 >= 0 and self.lambda2 >= 0):
            raise ValidationError(
                f"regularization weights must be non-negative, got {self.lambda1}, {self.lambda2}"
            )
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValidationError(f"loss_variant must be one of {LOSS_VARIANTS}")


def block_view(W: WeightMatrix, sensor: int, feature: int | None = None) -> np.ndarray:
    """Rows of ``W`` owned by one sensor, or by one feature block of it."""
    if feature is None:
        return W.values[W.layout.sensor_slice(sensor)]
    return W.values[W.layout.feature_slice(sensor, feature)]


def group_norms(values: np.ndarray, slices: Sequence[slice]) -> np.ndarray:
    """Frobenius norm of each row block of ``values``.

    Blocks are scaled by their largest magnitude first so tiny nonzero
    entries do not underflow to a zero norm.
    """
    out = np.zeros(len(slices))
    for i, s in enumerate(slices):
        block = values[s]
        big = float(np.max(np.abs(block))) if block.size else 0.0
        if big > 0:
            out[i] = big * np.linalg.norm(block / big)
    return out


def _check_weights(layout: ModalityLayout, values: np.ndarray) -> None:
    if values.ndim != 2 or values.shape[0] != layout.total_dim:
        raise ShapeError(f"weights of shape {values.shape} do not fit layout dim {layout.total_dim}")


def m_norm_values(layout: ModalityLayout, values: np.ndarray) -> float:
    _check_weights(layout, values)
    return float(group_norms(values, layout.feature_slices()).sum())


def s_norm_values(layout: ModalityLayout, values: np.ndarray) -> float:
    _check_weights(layout, values)
    return float(group_norms(values, layout.sensor_slices()).sum())


def m_norm(W: WeightMatrix) -> float:
    """Sum of Frobenius norms of the feature blocks."""
    return m_norm_values(W.layout, W.values)


def s_norm(W: WeightMatrix) -> float:
    """Sum of Frobenius norms of the sensor blocks."""
    return s_norm_values(W.layout, W.values)


def residual(A: np.ndarray, B: np.ndarray, W: np.ndarray) -> np.ndarray:
    if A.shape[0] != W.shape[0] or A.shape[1] != B.shape[0] or W.shape[1] != B.shape[1]:
        raise ShapeError(
            f"inconsistent shapes: A {A.shape}, B {B.shape}, W {W.shape} (need A^T W ~ B)"
        )
    return A.T @ W - B


def loss_value(A: np.ndarray, B: np.ndarray, W: np.ndarray, loss_variant: str = "squared") -> float:
    r = np.linalg.norm(residual(A, B, W))
    if loss_variant == "squared":
        return 0.5 * float(r) ** 2
    return float(r)


def objective_values(
    layout: ModalityLayout, A: np.ndarray, B: np.ndarray, W: np.ndarray, h: Hyperparams
) -> float:
    """Objective on raw arrays; see :func:`objective`."""
    value = loss_value(A, B, W, h.loss_variant)
    if h.lambda1:
        value += h.lambda1 * m_norm_values(layout, W)
    if h.lambda2:
        value += h.lambda2 * s_norm_values(layout, W)
    return value


def objective(A: FeatureMatrix, B: ScenarioLabels, W: WeightMatrix, h: Hyperparams) -> float:
    """``loss(A^T W - B) + lambda1 ||W||_M + lambda2 ||W||_S``.

    The loss is ``0.5 ||A^T W - B||_F^2`` for the squared variant and the plain
    Frobenius norm for the unsquared one.
    """
    if A.layout != W.layout:
        raise ShapeError("feature and weight layouts differ")
    return objective_values(W.layout, A.values, B.values, W.values, h)
