"""Synthetic rotor vibration recordings and two-level segmentation.

A recording is cut into fixed-length dataset units, and each unit into
half-overlapping sample windows that become the training examples.
"""
from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from ._random import hashed_unit, substream

UNIT_SECONDS = 0.48
WINDOW_SECONDS = 0.06
WINDOWS_PER_UNIT = 14


class FaultClass(enum.IntEnum):
    NORMAL = 0
    UNBALANCE = 1
    MISALIGNMENT = 2
    RUBBING = 3

    @property
    def title(self):
        return self.name.capitalize()

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown fault class {value!r}") from None
        try:
            return cls(int(value))
        except ValueError:
            raise ValueError(f"unknown fault class {value!r}") from None


# Row order used by the result tables.
REPORT_ORDER = (FaultClass.NORMAL, FaultClass.RUBBING, FaultClass.UNBALANCE, FaultClass.MISALIGNMENT)

# (train, test) windows per class.
DEFAULT_SPLIT_COUNTS = {
    FaultClass.NORMAL: (229, 43),
    FaultClass.UNBALANCE: (205, 55),
    FaultClass.MISALIGNMENT: (211, 53),
    FaultClass.RUBBING: (199, 61),
}


@dataclass(frozen=True)
class ClassParams:
    """Harmonic signature of one machine condition.

    Harmonic ``h`` has amplitude ``a1`` for h=1, ``a2`` for h=2 and
    ``a1 / h**decay`` beyond that, up to ``n_harmonics``. When ``a2`` is None the
    second harmonic follows the decay law as well.
    """

    a1: float
    a2: Optional[float] = 0.0
    n_harmonics: int = 2
    decay: float = 1.0
    clip_fraction: Optional[float] = None
    noise_sigma: float = 0.05

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if self.clip_fraction is not None and not 0.0 < self.clip_fraction <= 1.0:
            raise ValueError("clip_fraction must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def amplitudes(self):
        amps = np.zeros(self.n_harmonics)
        for h in range(1, self.n_harmonics + 1):
            if h == 1:
                amps[0] = self.a1
            elif h == 2 and self.a2 is not None:
                amps[1] = self.a2
            else:
                amps[h - 1] = self.a1 / h**self.decay
        return amps


DEFAULT_CLASS_PARAMS = {
    FaultClass.NORMAL: ClassParams(a1=1.0, a2=0.1, noise_sigma=0.05),
    FaultClass.UNBALANCE: ClassParams(a1=3.0, a2=0.15, noise_sigma=0.05),
    FaultClass.MISALIGNMENT: ClassParams(a1=1.2, a2=2.0, noise_sigma=0.05),
    FaultClass.RUBBING: ClassParams(a1=1.5, a2=None, n_harmonics=8, decay=1.0, clip_fraction=0.6, noise_sigma=0.08),
}


@dataclass(frozen=True)
class RotorConfig:
    rpm: float = 2000.0
    sample_rate: float = 65536.0
    channels: int = 4
    class_params: Mapping[FaultClass, ClassParams] = field(default_factory=lambda: dict(DEFAULT_CLASS_PARAMS))
    seed: int = 0

    def __post_init__(self):
        if self.rpm <= 0:
            raise ValueError("rpm must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @property
    def shaft_hz(self):
        return self.rpm / 60.0


@dataclass
class TimeSeries:
    samples: np.ndarray
    sample_rate: float
    channel_id: int
    label: FaultClass
    source_id: str

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ValueError("empty time series")

    def __len__(self):
        return len(self.samples)


@dataclass
class Unit:
    """One dataset unit cut from a recording; ``start`` is its sample offset."""

    samples: np.ndarray
    label: FaultClass
    unit_index: int
    channel_id: int
    source_id: str
    start: int


@dataclass
class SampleWindow:
    samples: np.ndarray
    label: FaultClass
    unit_index: int
    window_index: int
    channel_id: int
    source_id: str = ""
    start: int = 0

    @property
    def unit_key(self):
        return (int(self.label), self.source_id, self.channel_id, self.unit_index)


@dataclass
class DatasetSplit:
    train: List[SampleWindow]
    test: List[SampleWindow]

    def counts(self):
        """{class: (n_train, n_test)}"""
        out = {c: [0, 0] for c in FaultClass}
        for w in self.train:
            out[w.label][0] += 1
        for w in self.test:
            out[w.label][1] += 1
        return {c: tuple(v) for c, v in out.items()}


def harmonic_phase(seed, channel, harmonic):
    return 2.0 * math.pi * hashed_unit(seed, "phase", channel, harmonic)


def synthesize_recording(cls, cfg: RotorConfig, duration_s: float, channel: int) -> TimeSeries:
    """Deterministic harmonic series at multiples of the shaft rate plus Gaussian noise.

    Rubbing-style clipping (``clip_fraction``) caps positive excursions at that
    fraction of the unclipped signal's peak.
    """
    cls = FaultClass.parse(cls)
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    if not 0 <= channel < cfg.channels:
        raise ValueError(f"channel {channel} out of range for {cfg.channels} channels")
    params = cfg.class_params[cls]
    n = int(math.floor(duration_s * cfg.sample_rate))
    if n < 1:
        raise ValueError("duration shorter than one sample")

    t = np.arange(n) / cfg.sample_rate
    x = np.zeros(n)
    for h, amp in enumerate(params.amplitudes(), start=1):
        if amp == 0.0:
            continue
        x += amp * np.sin(2.0 * math.pi * h * cfg.shaft_hz * t + harmonic_phase(cfg.seed, channel, h))
    if params.noise_sigma > 0:
        rng = substream(cfg.seed, "gen", int(cls), channel)
        x += rng.normal(0.0, params.noise_sigma, n)
    if params.clip_fraction is not None:
        x = np.minimum(x, params.clip_fraction * x.max())
    source = f"{cls.name.lower()}-ch{channel}-s{cfg.seed}"
    return TimeSeries(x, cfg.sample_rate, channel, cls, source)


def unit_length(sample_rate, unit_seconds=UNIT_SECONDS):
    return int(math.floor(unit_seconds * sample_rate))


def window_length(sample_rate, window_seconds=WINDOW_SECONDS):
    return int(round(window_seconds * sample_rate))


def segment_units(ts: TimeSeries, unit_seconds: float = UNIT_SECONDS) -> List[Unit]:
    size = unit_length(ts.sample_rate, unit_seconds)
    if size < 1 or len(ts) < size:
        raise ValueError(f"series of {len(ts)} samples is shorter than one {size}-sample unit")
    return [
        Unit(ts.samples[i * size:(i + 1) * size], ts.label, i, ts.channel_id, ts.source_id, i * size)
        for i in range(len(ts) // size)
    ]


def segment_samples(unit: Unit, window: int = 3932, n_windows: int = WINDOWS_PER_UNIT) -> List[SampleWindow]:
    """Cut ``n_windows`` windows with 50% overlap from the head of a unit."""
    hop = window // 2
    if window < 2:
        raise ValueError("window must be at least 2 samples")
    need = (n_windows - 1) * hop + window
    if len(unit.samples) < need:
        raise ValueError(f"unit of {len(unit.samples)} samples is shorter than the {need} needed")
    return [
        SampleWindow(
            unit.samples[i * hop:i * hop + window],
            unit.label,
            unit.unit_index,
            i,
            unit.channel_id,
            unit.source_id,
            unit.start + i * hop,
        )
        for i in range(n_windows)
    ]


def split_dataset(
    windows: List[SampleWindow],
    target_counts: Mapping[FaultClass, Tuple[int, int]],
    seed: int,
) -> DatasetSplit:
    """Unit-level train/test split truncated to per-class window counts.

    Whole units are shuffled and dealt to train first, then test, so windows
    cut from the same unit never end up on opposite sides.
    """
    units: Dict[tuple, List[SampleWindow]] = defaultdict(list)
    for w in windows:
        units[w.unit_key].append(w)
    by_class: Dict[FaultClass, List[tuple]] = defaultdict(list)
    for key in sorted(units):
        by_class[FaultClass(key[0])].append(key)

    train, test = [], []
    for cls in FaultClass:
        n_train, n_test = target_counts.get(cls, (0, 0))
        if n_train < 0 or n_test < 0:
            raise ValueError("target counts must be nonnegative")
        if n_train == 0 and n_test == 0:
            continue
        keys = by_class.get(cls, [])
        order = substream(seed, "split", int(cls)).permutation(len(keys))
        pos = 0
        for want, sink in ((n_train, train), (n_test, test)):
            got = 0
            while got < want:
                if pos >= len(order):
                    raise ValueError(f"not enough {cls.title} windows for the requested split")
                members = sorted(units[keys[order[pos]]], key=lambda w: w.window_index)
                pos += 1
                take = members[: want - got]
                sink.extend(take)
                got += len(take)
    return DatasetSplit(train, test)
