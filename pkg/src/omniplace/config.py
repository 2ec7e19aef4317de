"""Plain-text ``key = value`` configuration shared by every command."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ValidationError
from .features import DescriptorConfig, ExternalSpec
from .geo import DEFAULT_RADIUS_M
from .model import Hyperparams
from .solver import SolverConfig

_HYPER_KEYS = {"lambda1": float, "lambda2": float, "loss_variant": str}
_SOLVER_KEYS = {"max_iters": int, "tol": float, "epsilon": float, "backend": str}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_external(specs) -> str:
    return ",".join(f"{e.name}:{e.dim}:{e.sensor}" for e in specs)


def _parse_external(text: str) -> tuple[ExternalSpec, ...]:
    specs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"external spec {item!r} must be name:dim:sensor")
        specs.append(ExternalSpec(parts[0], int(parts[1]), parts[2]))
    return tuple(specs)


@dataclass(frozen=True)
class PipelineConfig:
    hyper: Hyperparams = field(default_factory=Hyperparams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    radius_m: float = DEFAULT_RADIUS_M
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValidationError("radius_m must be positive")

    def items(self) -> list[tuple[str, str]]:
        out = [(k, _format(getattr(self.hyper, k))) for k in _HYPER_KEYS]
        out += [(k, _format(getattr(self.solver, k))) for k in _SOLVER_KEYS]
        for f in fields(DescriptorConfig):
            value = getattr(self.descriptor, f.name)
            text = _format_external(value) if f.name == "external" else _format(value)
            out.append((f"descriptor.{f.name}", text))
        out += [("radius_m", _format(float(self.radius_m))),
                ("threshold", _format(float(self.threshold))),
                ("seed", str(self.seed))]
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def with_overrides(self, values: dict[str, str]) -> "PipelineConfig":
        hyper, solver, desc = {}, {}, {}
        top = {}
        for key, raw in values.items():
            try:
                if key in _HYPER_KEYS:
                    hyper[key] = _HYPER_KEYS[key](raw)
                elif key in _SOLVER_KEYS:
                    solver[key] = _SOLVER_KEYS[key](raw)
                elif key.startswith("descriptor."):
                    name = key.split(".", 1)[1]
                    if name not in {f.name for f in fields(DescriptorConfig)}:
                        raise ValidationError(f"unknown config key {key!r}")
                    current = getattr(self.descriptor, name)
                    if name == "external":
                        desc[name] = _parse_external(raw)
                    elif isinstance(current, bool):
                        desc[name] = _parse_bool(raw)
                    else:
                        desc[name] = type(current)(raw)
                elif key in ("radius_m", "threshold"):
                    top[key] = float(raw)
                elif key == "seed":
                    top[key] = int(raw)
                else:
                    raise ValidationError(f"unknown config key {key!r}")
            except ValueError as exc:
                raise ValidationError(f"config key {key!r}: {exc}") from None
        return replace(
            self,
            hyper=replace(self.hyper, **hyper),
            solver=replace(self.solver, **solver),
            descriptor=replace(self.descriptor, **desc),
            **top,
        )

    @classmethod
    def from_text(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        return (base or cls()).with_overrides(parse_key_values(text))


def parse_key_values(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValidationError(f"config line {lineno}: empty key")
        values[key] = value
    return values


def load_config(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return PipelineConfig.from_text(fh.read())
