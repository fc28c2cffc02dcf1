"""JSON experiment configuration with field-level validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field

from .estimator import METHODS
from .exceptions import ConfigError
from .shooting import ShootingConfig


@dataclass
class DatasetSection:
    M: int = 200
    N: int = 4
    epsilon: float = 0.02
    margin: float = 0.05


@dataclass
class BoundarySection:
    offset: float = 0.5
    amplitude: float = 0.2
    frequency: float = 1.0


@dataclass
class TaskSection:
    boundary: BoundarySection = field(default_factory=BoundarySection)
    t0: tuple = (-1.0, 0.0)
    t1: tuple = (1.0, 0.0)
    kappa: float = 4.0


@dataclass
class ShootingSection:
    iter_max: int = 1000
    tau: float = 0.1
    beta: float = 0.01
    inner_steps: int = 1
    temperature: float = 100.0
    weight_refresh_period: int = 1
    init_scale: float = 0.1
    horizon: float = 1.0
    n_layers: int = 20


@dataclass
class EvaluationSection:
    grid_resolution: int = 101
    confidence_threshold: float = 0.7


@dataclass
class ExperimentConfig:
    seed: int
    method: str = "weighted"
    seeds: list = None
    dataset: DatasetSection = field(default_factory=DatasetSection)
    task: TaskSection = field(default_factory=TaskSection)
    shooting: ShootingSection = field(default_factory=ShootingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)

    def __post_init__(self):
        if self.seeds is None:
            self.seeds = [self.seed + k for k in range(5)]
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"must be one of {sorted(METHODS)}, got {self.method!r}", "method")
        if not self.seeds:
            raise ConfigError("must list at least one seed", "seeds")
        ds = self.dataset
        if ds.M < 2:
            raise ConfigError(f"must be >= 2, got {ds.M}", "dataset.M")
        if ds.N < 1:
            raise ConfigError(f"must be >= 1, got {ds.N}", "dataset.N")
        if not 0 < ds.margin < 0.5:
            raise ConfigError(f"must lie in (0, 0.5), got {ds.margin}", "dataset.margin")
        if not 0 <= ds.epsilon < ds.margin:
            raise ConfigError(f"must satisfy 0 <= epsilon < margin ({ds.margin}), got {ds.epsilon}",
                              "dataset.epsilon")
        if len(self.task.t0) != 2 or len(self.task.t1) != 2:
            raise ConfigError("class targets must be 2-vectors", "task.t0")
        if tuple(self.task.t0) == tuple(self.task.t1):
            raise ConfigError("must differ from task.t0", "task.t1")
        if not self.task.kappa > 0:
            raise ConfigError(f"must be > 0, got {self.task.kappa}", "task.kappa")
        if self.evaluation.grid_resolution < 2:
            raise ConfigError(f"must be >= 2, got {self.evaluation.grid_resolution}",
                              "evaluation.grid_resolution")
        if not 0.5 < self.evaluation.confidence_threshold < 1:
            raise ConfigError("must lie in (0.5, 1)", "evaluation.confidence_threshold")
        try:
            self.shooting_config()
        except ValueError as exc:
            raise ConfigError(str(exc), "shooting") from exc

    def shooting_config(self, method=None, seed=None):
        return ShootingConfig(
            weight_scheme=METHODS[method or self.method],
            seed=self.seed if seed is None else seed,
            **asdict(self.shooting),
        )

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data, "")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}", str(path)) from exc
        return cls.from_dict(data)


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError("expected a JSON object", prefix.rstrip(".") or "<root>")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError("unknown field", prefix + key)
    kwargs = {}
    for name, f in known.items():
        path = prefix + name
        if name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigError("required field is missing", path)
            continue
        value = data[name]
        factory = f.default_factory
        if factory is not dataclasses.MISSING and dataclasses.is_dataclass(factory):
            kwargs[name] = _build(factory, value, path + ".")
        else:
            kwargs[name] = _coerce(value, None if f.default is dataclasses.MISSING else f.default, path)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), prefix.rstrip(".") or "<root>") from exc


def _coerce(value, default, path):
    """Match JSON values to the type of the field default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected a boolean, got {value!r}", path)
        return value
    if isinstance(default, int) or (default is None and path.endswith("seed")):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"expected a list of numbers, got {value!r}", path)
        return tuple(float(v) for v in value)
    if path.endswith("seeds"):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"expected a list of integers, got {value!r}", path)
        return list(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", path)
    return value
