"""FFT, short-time Fourier transform, mel filterbank and MFCC."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from . import kernels

LOG_FLOOR = 1e-10
N_KEPT_COEFFS = 12


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class StftConfig:
    window_length: int = 1024
    fft_size: int = 1024
    hop: int = 512
    window_kind: str = "hann"

    def __post_init__(self):
        if not 0 < self.window_length <= self.fft_size:
            raise ValueError("need 0 < window_length <= fft_size")
        if self.hop <= 0:
            raise ValueError("hop must be positive")
        if not _is_pow2(self.fft_size):
            raise ValueError("fft_size must be a power of two")
        if self.window_kind != "hann":
            raise ValueError(f"unsupported window {self.window_kind!r}")

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class MelConfig:
    n_filters: int = 26
    f_min: float = 0.0
    f_max: float = 32768.0

    def __post_init__(self):
        if self.n_filters < 2:
            raise ValueError("need at least two mel filters")
        if not 0 <= self.f_min < self.f_max:
            raise ValueError("need 0 <= f_min < f_max")


@dataclass
class Spectrogram:
    magnitudes: np.ndarray  # frames x bins
    bin_hz: float
    frame_seconds: float


@dataclass
class MfccMatrix:
    coefficients: np.ndarray  # 12 x frames


@lru_cache(maxsize=None)
def _fft_tables(n):
    return kernels.bit_reverse_indices(n), kernels.twiddles(n)


def hann_window(length):
    """Periodic Hann window of ``length`` samples."""
    if length < 2:
        raise ValueError("window length must be >= 2")
    m = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * m / length))


def fft(x):
    """Radix-2 DFT along the last axis (1-D or 2-D input)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if x.ndim not in (1, 2):
        raise ValueError("fft accepts 1-D or 2-D input")
    if not _is_pow2(n):
        raise ValueError(f"length {n} is not a power of two")
    rev, tw = _fft_tables(n)
    rows = np.ascontiguousarray(x.reshape(-1, n))
    return kernels.fft_rows(rows, rev, tw).reshape(x.shape)


def ifft(spectrum):
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    return np.conj(fft(np.conj(spectrum))) / spectrum.shape[-1]


def frame_count(n_samples, window_length, hop):
    return (n_samples - window_length) // hop + 1


def _stft_complex(x, cfg: StftConfig):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("stft expects a 1-D signal")
    if len(x) < cfg.window_length:
        raise ValueError(f"signal of {len(x)} samples is shorter than the {cfg.window_length}-sample window")
    n_frames = frame_count(len(x), cfg.window_length, cfg.hop)
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.window_length)[None, :]
    frames = np.zeros((n_frames, cfg.fft_size))
    frames[:, : cfg.window_length] = x[idx] * hann_window(cfg.window_length)
    return fft(frames)[:, : cfg.n_bins]


def stft(x, cfg: StftConfig = StftConfig(), sample_rate: float = 65536.0) -> Spectrogram:
    """Magnitude STFT; frames are zero-padded from window_length to fft_size."""
    mags = np.abs(_stft_complex(x, cfg))
    return Spectrogram(mags, sample_rate / cfg.fft_size, cfg.hop / sample_rate)


def mel_scale(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be nonnegative")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if out.ndim == 0 else out


def inverse_mel(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_points(cfg: MelConfig):
    """n_filters + 2 edge/center frequencies (Hz), equally spaced in mel."""
    return inverse_mel(np.linspace(mel_scale(cfg.f_min), mel_scale(cfg.f_max), cfg.n_filters + 2))


def mel_centers(cfg: MelConfig):
    return mel_points(cfg)[1:-1]


def mel_filterbank(cfg: MelConfig, fft_size: int, sample_rate: float):
    """Triangular filters on the rfft bins, each scaled so its largest weight is 1."""
    if cfg.f_max > sample_rate / 2:
        raise ValueError(f"f_max {cfg.f_max} exceeds Nyquist {sample_rate / 2}")
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    pts = mel_points(cfg)
    bank = np.zeros((cfg.n_filters, len(freqs)))
    for j in range(cfg.n_filters):
        lo, mid, hi = pts[j], pts[j + 1], pts[j + 2]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        bank[j] = np.clip(np.minimum(rise, fall), 0.0, None)
        peak = bank[j].max()
        if peak <= 0:
            raise ValueError(f"mel filter {j} covers no FFT bin; use fewer filters or a larger fft")
        bank[j] /= peak
    return bank


def mfcc(x, stft_cfg: StftConfig = StftConfig(), mel_cfg: MelConfig = MelConfig(), sample_rate: float = 65536.0) -> MfccMatrix:
    """Cepstral coefficients 2..13 (1-based) of the log mel power spectrum, per frame."""
    spec = _stft_complex(x, stft_cfg)
    power = np.abs(spec) ** 2 / stft_cfg.fft_size
    energies = power @ mel_filterbank(mel_cfg, stft_cfg.fft_size, sample_rate).T
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    # a per-frame offset only reaches the discarded coefficient; removing it keeps silence exactly zero
    logs = logs - logs[:, :1]
    ceps = dct(logs, type=2, norm="ortho", axis=1)
    if ceps.shape[1] < N_KEPT_COEFFS + 1:
        raise ValueError("need at least 13 mel filters to keep coefficients 2-13")
    return MfccMatrix(ceps[:, 1:N_KEPT_COEFFS + 1].T.copy())
