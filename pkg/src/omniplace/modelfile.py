"""Versioned text persistence of a trained model.

::

    version 1
    [config]            key = value lines (see PipelineConfig)
    [scenarios]         one scenario name per line
    [layout]            sensor / feature lines
    [normalization]     "scale <sensor> <feature> <value>" and
                        "mean <sensor> <feature> <values...>"
    [weights] <p> <c>   one row of W per line
    [solve]             iterations / converged / objective

Floats are written with ``repr`` so a save/load cycle is lossless.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig, parse_key_values
from .errors import ModelFileError, OmniplaceError, OutputError
from .features import BlockNormalizer
from .model import ModalityLayout, WeightMatrix

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelFile:
    config: PipelineConfig
    scenario_names: tuple[str, ...]
    normalizer: BlockNormalizer
    weights: WeightMatrix
    iterations: int = 0
    converged: bool = False
    objective_trace: tuple[float, ...] = field(default_factory=tuple)

    @property
    def layout(self) -> ModalityLayout:
        return self.weights.layout


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps(model: ModelFile) -> str:
    layout = model.layout
    lines = [f"version {FORMAT_VERSION}", "[config]"]
    lines += [f"{k} = {v}" for k, v in model.config.items()]
    lines.append("[scenarios]")
    lines += list(model.scenario_names)
    lines.append("[layout]")
    lines += layout.to_lines()
    lines.append("[normalization]")
    norm = model.normalizer
    for (q, k, sensor, feat, rows), sc in zip(layout.iter_blocks(), norm.scale):
        lines.append(f"scale {sensor.name} {feat.name} {float(sc)!r}")
        lines.append(f"mean {sensor.name} {feat.name} {_floats(norm.mean[rows])}")
    W = model.weights.values
    lines.append(f"[weights] {W.shape[0]} {W.shape[1]}")
    lines += [_floats(row) for row in W]
    lines.append("[solve]")
    lines.append(f"iterations {model.iterations}")
    lines.append(f"converged {'true' if model.converged else 'false'}")
    lines.append(f"trace {_floats(model.objective_trace)}")
    return "\n".join(lines) + "\n"


def save(path, model: ModelFile) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(model))
    except OSError as exc:
        raise OutputError(f"cannot write model file {path}: {exc}") from exc


def _sections(lines: list[str]) -> dict[str, tuple[list[str], list[str]]]:
    out: dict[str, tuple[list[str], list[str]]] = {}
    current = None
    for line in lines:
        if line.startswith("["):
            head = line.split()
            name = head[0].strip("[]")
            if name in out:
                raise ModelFileError(f"duplicate section [{name}]")
            out[name] = (head[1:], [])
            current = name
        elif current is None:
            if line.strip():
                raise ModelFileError(f"content before first section: {line[:40]!r}")
        elif line.strip():
            out[current][1].append(line)
    return out


def loads(text: str) -> ModelFile:
    lines = text.splitlines()
    if not lines or lines[0].split() != ["version", str(FORMAT_VERSION)]:
        found = lines[0] if lines else "<empty>"
        raise ModelFileError(f"unsupported model file version line {found!r}; expected 'version {FORMAT_VERSION}'")
    try:
        sec = _sections(lines[1:])
        for name in ("config", "scenarios", "layout", "normalization", "weights", "solve"):
            if name not in sec:
                raise ModelFileError(f"missing section [{name}]")
        config = PipelineConfig().with_overrides(parse_key_values("\n".join(sec["config"][1])))
        scenarios = tuple(line.strip() for line in sec["scenarios"][1])
        layout = ModalityLayout.from_lines(sec["layout"][1])

        scale = {}
        mean = {}
        for line in sec["normalization"][1]:
            parts = line.split()
            kind, key = parts[0], (parts[1], parts[2])
            if kind == "scale":
                scale[key] = float(parts[3])
            elif kind == "mean":
                mean[key] = np.array([float(v) for v in parts[3:]])
            else:
                raise ModelFileError(f"bad normalization line {line[:40]!r}")
        scales, means = [], []
        for _, _, sensor, feat, rows in layout.iter_blocks():
            key = (sensor.name, feat.name)
            if key not in scale or key not in mean or mean[key].size != rows.stop - rows.start:
                raise ModelFileError(f"normalization for {sensor.name}/{feat.name} missing or malformed")
            scales.append(scale[key])
            means.append(mean[key])
        normalizer = BlockNormalizer(layout, np.concatenate(means), np.array(scales))

        shape_args, rows = sec["weights"]
        p, c = int(shape_args[0]), int(shape_args[1])
        W = np.array([[float(v) for v in row.split()] for row in rows])
        if W.shape != (p, c):
            raise ModelFileError(f"weights section holds {W.shape}, header says {(p, c)}")
        if len(scenarios) != c:
            raise ModelFileError(f"{len(scenarios)} scenarios for {c} weight columns")

        solve = {}
        for line in sec["solve"][1]:
            key, _, rest = line.partition(" ")
            solve[key] = rest.strip()
        trace = tuple(float(v) for v in solve.get("trace", "").split())
        return ModelFile(
            config,
            scenarios,
            normalizer,
            WeightMatrix(layout, W),
            int(solve.get("iterations", 0)),
            solve.get("converged") == "true",
            trace,
        )
    except ModelFileError:
        raise
    except (OmniplaceError, ValueError, IndexError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc


def load(path) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    return loads(text)
