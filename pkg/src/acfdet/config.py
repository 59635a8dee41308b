"""Run configuration: one human-readable YAML file bundling every component
config, validated as a unit and round-trippable."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .boosting import TrainConfig
from .channels import ChannelConfig
from .errors import ConfigError
from .evaluation import EvalConfig
from .postprocess import FusionConfig
from .pyramid import PyramidConfig
from .synth import SynthConfig

_TUPLE_FIELDS = {
    "pre_smooth_radii",
    "bootstrap_schedule",
    "targets_per_image",
    "scale_range",
    "fppi_points",
}


@dataclass
class RunConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    window_size: int = 80
    stride: int = 1
    jitter: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.window_size % self.channel.shrink != 0:
            raise ConfigError(
                f"window_size {self.window_size} not divisible by shrink {self.channel.shrink}"
            )
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.jitter < 0:
            raise ConfigError("jitter must be >= 0")
        if self.pyramid.min_window != self.window_size:
            raise ConfigError("pyramid.min_window must equal window_size")
        if self.synth.scale_range[0] < self.window_size:
            raise ConfigError("synth.scale_range minimum must not be below the detector window")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if hasattr(value, "__dataclass_fields__"):
                out[f.name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(value).items()}
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        section_types = {
            "channel": ChannelConfig,
            "train": TrainConfig,
            "pyramid": PyramidConfig,
            "fusion": FusionConfig,
            "eval": EvalConfig,
            "synth": SynthConfig,
        }
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in section_types:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be a mapping")
                section_cls = section_types[key]
                valid = {f.name for f in fields(section_cls)}
                unknown = set(value) - valid
                if unknown:
                    raise ConfigError(f"unknown keys in section {key!r}: {sorted(unknown)}")
                coerced = {
                    k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
                    for k, v in value.items()
                }
                try:
                    kwargs[key] = section_cls(**coerced)
                except TypeError as exc:
                    raise ConfigError(f"invalid config section {key!r}: {exc}") from exc
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def save(self, path: str | Path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        return cls.from_dict(data)
