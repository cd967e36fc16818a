"""Run configuration: profiles, strict YAML loading and content fingerprints."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .dsp import MelConfig, StftConfig
from .errors import ConfigError
from .features import BAND_HALF_WIDTH_HZ
from .nn.model import MLP_HIDDEN
from .nn.optim import TrainConfig
from .signal import DEFAULT_CLASS_PARAMS, DEFAULT_SPLIT_COUNTS, ClassParams, FaultClass, RotorConfig

MODES = ("stft", "mfcc", "features")


@dataclass(frozen=True)
class RotorSection:
    rpm: float = 2000.0
    sample_rate: float = 65536.0
    channels: int = 4
    duration_s: float = 30.0
    class_params: Dict[str, ClassParams] = field(
        default_factory=lambda: {c.name.lower(): p for c, p in DEFAULT_CLASS_PARAMS.items()}
    )

    def rotor_config(self, seed) -> RotorConfig:
        params = {FaultClass.parse(k): v for k, v in self.class_params.items()}
        return RotorConfig(self.rpm, self.sample_rate, self.channels, params, seed)


@dataclass(frozen=True)
class SegmentationSection:
    unit_seconds: float = 0.48
    window_seconds: float = 0.06
    windows_per_unit: int = 14


@dataclass(frozen=True)
class ImagingSection:
    range_db: float = 80.0
    canvas_width: int = 432
    canvas_height: int = 288
    image_side: int = 298


@dataclass(frozen=True)
class ModelSection:
    width_factor: float = 1.0
    input_side: int = 298


@dataclass(frozen=True)
class FeatureSection:
    band_half_width_hz: float = BAND_HALF_WIDTH_HZ


@dataclass(frozen=True)
class BaselineSection:
    hidden: Tuple[int, ...] = MLP_HIDDEN
    train: TrainConfig = TrainConfig(
        base_lr=0.05, batch_size=4, warmup_epochs=5, weight_decay=5e-4, epochs=100, milestones=(60, 80)
    )


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    deterministic: bool = True
    mode: str = "stft"
    out: str = "runs/default"
    rotor: RotorSection = RotorSection()
    segmentation: SegmentationSection = SegmentationSection()
    split: Dict[str, Tuple[int, int]] = field(
        default_factory=lambda: {c.name.lower(): v for c, v in DEFAULT_SPLIT_COUNTS.items()}
    )
    stft: StftConfig = StftConfig()
    mel: MelConfig = MelConfig()
    imaging: ImagingSection = ImagingSection()
    features: FeatureSection = FeatureSection()
    model: ModelSection = ModelSection()
    train: TrainConfig = TrainConfig()
    baseline: BaselineSection = BaselineSection()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.mel.f_max > self.rotor.sample_rate / 2:
            raise ConfigError(f"mel f_max {self.mel.f_max} exceeds Nyquist {self.rotor.sample_rate / 2}")
        if self.model.input_side > self.imaging.image_side:
            raise ConfigError("model input_side cannot exceed the stored image side")
        if self.segmentation.windows_per_unit < 1:
            raise ConfigError("windows_per_unit must be positive")
        for name in self.split:
            FaultClass.parse(name)
        return self

    def to_dict(self):
        return _plain(self)

    def split_counts(self):
        return {FaultClass.parse(k): (int(v[0]), int(v[1])) for k, v in self.split.items()}

    def with_overrides(self, **kw):
        return dataclasses.replace(self, **kw).validate()


def paper_profile() -> RunConfig:
    """Full-width network on 298x298 inputs with the published hyperparameters."""
    return RunConfig(out="runs/paper").validate()


def desk_profile() -> RunConfig:
    """1/8-width network on 64x64 inputs, 15 epochs; small enough for a laptop CPU."""
    return RunConfig(
        seed=7,
        out="runs/desk",
        model=ModelSection(width_factor=0.125, input_side=64),
        train=TrainConfig(
            base_lr=0.03, batch_size=4, warmup_epochs=2, weight_decay=5e-4, epochs=15,
            milestones=(9, 12), milestone_factor=0.2, momentum=0.0, seed=7,
        ),
    ).validate()


PROFILES = {"paper": paper_profile, "desk": desk_profile}


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _merge(cls_or_obj, data: Any, where: str):
    """Overlay a mapping onto a dataclass instance, rejecting unknown keys."""
    base = cls_or_obj
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(base)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    updates = {}
    for key, value in data.items():
        current = getattr(base, key)
        path = f"{where}.{key}" if where else key
        if dataclasses.is_dataclass(current):
            updates[key] = _merge(current, value, path)
        elif key == "class_params":
            merged = dict(current)
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a mapping")
            for cname, params in value.items():
                try:
                    FaultClass.parse(cname)
                except ValueError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
                merged[cname.lower()] = _merge(merged.get(cname.lower(), ClassParams(a1=1.0)), params, f"{path}.{cname}")
            updates[key] = merged
        elif key == "split":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a mapping")
            merged = dict(current)
            for cname, pair in value.items():
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError(f"{path}.{cname}: expected [train, test]")
                merged[str(cname).lower()] = (int(pair[0]), int(pair[1]))
            updates[key] = merged
        elif isinstance(current, tuple):
            updates[key] = tuple(value)
        elif isinstance(current, bool):
            updates[key] = bool(value)
        elif isinstance(current, float) and isinstance(value, (int, float)):
            updates[key] = float(value)
        else:
            updates[key] = value
    try:
        return dataclasses.replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def config_from_dict(data: Optional[dict]) -> RunConfig:
    data = dict(data or {})
    profile = data.pop("profile", "paper")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    cfg = _merge(PROFILES[profile](), data, "")
    if "seed" in data and not (isinstance(data.get("train"), dict) and "seed" in data["train"]):
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=cfg.seed))
    return cfg.validate()


def load_config(path) -> RunConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def fingerprint(*parts) -> str:
    blob = json.dumps([_plain(p) for p in parts], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
