"""
Typed run configuration.

The INI file has the sections [data], [model], [contrastive], [optim] and
[train]; each maps onto one frozen dataclass below. Values are layered as
defaults < preset < config file < environment < CLI overrides, then
validated as a whole.
"""

import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple, get_type_hints

from utils.config_loader import RawConfig, apply_env_overrides, load_config_file, render_config
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataConfig:
    batch_size: int = 8
    patch: int = 100
    semi_supervised: bool = True


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 64
    rrn_blocks: int = 16
    drn_blocks: int = 16
    se_reduction: int = 16
    rrn_se: bool = True
    drn_enabled: bool = True
    drn_block: str = "sdcab"
    dilations: Tuple[int, ...] = (1, 3, 5)


@dataclass(frozen=True)
class ContrastiveConfig:
    omegas: Tuple[float, ...] = (0.2, 0.5, 1.0)
    negatives: int = 4
    eps: float = 1e-7
    pair_floor: float = 1.0
    bank_capacity: int = 64
    encoder_arch: str = "vgg16"
    encoder_weights: str = "seeded"
    encoder_normalize: str = "none"
    negative_augmentation: bool = True
    positive_augmentation: bool = True


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 1e-3
    milestones: Tuple[int, ...] = (30, 50, 80)
    decay: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_grad_norm: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    epochs: int = 150
    seed: int = 0
    lambda_unsup: float = 1.0
    lambda_r: float = 0.5
    lambda_dual: float = 0.5
    log_every: int = 10
    save_bank: bool = False


SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "contrastive": ContrastiveConfig,
    "optim": OptimConfig,
    "train": RunConfig,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(value: str, kind, where: str):
    try:
        if kind is bool:
            lowered = value.strip().lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(value)
        if kind in (int, float, str):
            return kind(value.strip())
        item = kind.__args__[0]
        return tuple(item(part.strip()) for part in value.split(",") if part.strip())
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}: cannot interpret {value!r}")


def _build_section(cls, values: Dict[str, str], section: str):
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    kwargs = {key: _convert(value, hints[key], f"{section}.{key}") for key, value in values.items()}
    return cls(**kwargs)


@dataclass(frozen=True)
class TrainConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    contrastive: ContrastiveConfig = field(default_factory=ContrastiveConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    train: RunConfig = field(default_factory=RunConfig)

    @classmethod
    def from_raw(cls, raw: RawConfig) -> "TrainConfig":
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"unknown section(s): {', '.join(unknown)}")
        sections = {name: _build_section(kind, raw.get(name, {}), name) for name, kind in SECTIONS.items()}
        config = cls(**sections)
        config.validate()
        return config

    def to_raw(self) -> RawConfig:
        raw = {}
        for name in SECTIONS:
            section = getattr(self, name)
            raw[name] = {}
            for f in dataclasses.fields(section):
                value = getattr(section, f.name)
                if isinstance(value, tuple):
                    value = ", ".join(str(v) for v in value)
                elif isinstance(value, bool):
                    value = "true" if value else "false"
                raw[name][f.name] = str(value)
        return raw

    def echo(self) -> str:
        """Effective configuration as INI text."""
        return render_config(self.to_raw())

    def config_hash(self) -> str:
        return hashlib.sha256(self.echo().encode("utf-8")).hexdigest()

    def replace(self, section: str, **changes) -> "TrainConfig":
        updated = dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})
        updated.validate()
        return updated

    def validate(self) -> None:
        """Raises ConfigurationError on the first violated constraint."""
        d, m, c, o, t = self.data, self.model, self.contrastive, self.optim, self.train
        checks = [
            (min(t.lambda_unsup, t.lambda_r, t.lambda_dual) >= 0, "all loss weights must be >= 0"),
            (all(a < b for a, b in zip(o.milestones, o.milestones[1:])), "milestones must be strictly increasing"),
            (all(ms >= 0 for ms in o.milestones), "milestones must be >= 0"),
            (0.0 < o.decay < 1.0, "decay factor must be in (0, 1)"),
            (o.lr > 0, "learning rate must be positive"),
            (o.clip_grad_norm >= 0, "clip_grad_norm must be >= 0 (0 disables clipping)"),
            (c.negatives >= 1, "negatives must be >= 1"),
            (c.eps > 0, "contrastive eps must be positive"),
            (c.pair_floor >= 0, "pair_floor must be >= 0 (0 gives the plain ratio)"),
            (all(w >= 0 for w in c.omegas), "tap weights must be nonnegative"),
            (len(c.omegas) == 3, "exactly three tap weights are expected"),
            (c.bank_capacity >= 1, "bank capacity must be >= 1"),
            (c.encoder_arch in ("vgg16", "tiny"), "encoder_arch must be vgg16 or tiny"),
            (c.encoder_normalize in ("none", "imagenet"), "encoder_normalize must be none or imagenet"),
            (m.channels >= 1 and m.se_reduction >= 1, "channels and se_reduction must be >= 1"),
            (m.channels % m.se_reduction == 0, "se_reduction must divide channels"),
            (m.rrn_blocks >= 1 and m.drn_blocks >= 1, "block counts must be >= 1"),
            (len(m.dilations) > 0 and min(m.dilations) >= 1, "dilation set must be non-empty and positive"),
            (m.drn_block in ("sdcab", "residual", "direct"), "drn_block must be sdcab, residual or direct"),
            (d.patch >= 16, "patch must be >= 16"),
            (d.batch_size >= 1, "batch_size must be >= 1"),
            (t.epochs >= 0, "epochs must be >= 0"),
            (t.log_every >= 1, "log_every must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)


def _grid_preset(depth: int, width: int) -> RawConfig:
    return {"model": {"rrn_blocks": str(depth), "drn_blocks": str(depth), "channels": str(width)}}


PRESETS: Dict[str, RawConfig] = {
    "BL": {"model": {"rrn_se": "false", "drn_enabled": "false"},
           "train": {"lambda_dual": "0", "lambda_unsup": "0"}, "data": {"semi_supervised": "false"}},
    "BL+SE": {"model": {"rrn_se": "true", "drn_enabled": "false"},
              "train": {"lambda_dual": "0", "lambda_unsup": "0"}, "data": {"semi_supervised": "false"}},
    "BL+SE+DB": {"model": {"drn_block": "direct"},
                 "train": {"lambda_dual": "0", "lambda_unsup": "0"}, "data": {"semi_supervised": "false"}},
    "BL+SE+RB": {"model": {"drn_block": "residual"},
                 "train": {"lambda_dual": "0", "lambda_unsup": "0"}, "data": {"semi_supervised": "false"}},
    "BL+SE+SDCAB": {"model": {"drn_block": "sdcab"},
                    "train": {"lambda_dual": "0", "lambda_unsup": "0"}, "data": {"semi_supervised": "false"}},
    "full": {},
}
for _depth in (8, 12, 16):
    for _width in (16, 32, 64):
        PRESETS[f"D{_depth}-M{_width}"] = _grid_preset(_depth, _width)


def merge_raw(*layers: Optional[RawConfig]) -> RawConfig:
    """Later layers win key by key."""
    merged: RawConfig = {}
    for layer in layers:
        for section, values in (layer or {}).items():
            merged.setdefault(section, {}).update(values)
    return merged


def load_train_config(path: Optional[str] = None, preset: Optional[str] = None,
                      overrides: Iterable[Tuple[str, str, str]] = (),
                      environ: Optional[Dict[str, str]] = None) -> TrainConfig:
    """
    Builds the effective TrainConfig.

    Args:
        path: INI file; None uses defaults only.
        preset: Name from PRESETS applied beneath the file.
        overrides: (section, key, value) triples from the command line.
        environ: Environment mapping (defaults to os.environ).
    """
    if preset is not None and preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}, expected one of {sorted(PRESETS)}")
    raw = merge_raw(PRESETS.get(preset) if preset else None, load_config_file(path) if path else None)
    raw = apply_env_overrides(raw, environ)
    cli: RawConfig = {}
    for section, key, value in overrides:
        cli.setdefault(section, {})[key] = value
    config = TrainConfig.from_raw(merge_raw(raw, cli))
    logger.debug("Effective config hash %s", config.config_hash()[:12])
    return config
