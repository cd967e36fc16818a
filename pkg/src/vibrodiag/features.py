"""Engineered 30-value feature vectors for the baseline classifier."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dsp import hann_window

TIME_FEATURES = (
    "mean", "abs_mean", "rms", "std", "variance", "skewness", "kurtosis",
    "maximum", "minimum", "peak_to_peak", "crest_factor", "shape_factor",
    "impulse_factor", "clearance_factor", "energy",
)
FREQ_FEATURES = (
    "spec_mean", "spec_std", "spec_skewness", "spec_kurtosis", "spec_centroid",
    "spec_rms", "spec_peak", "peak_freq",
    "band_1x", "band_2x", "band_3x", "band_4x", "band_5x",
    "spec_entropy", "ratio_2x_1x",
)
FEATURE_NAMES = TIME_FEATURES + FREQ_FEATURES
BAND_HALF_WIDTH_HZ = 5.0


def _div(a, b):
    return a / b if b != 0 else 0.0


def _moments(v):
    """mean, std, skewness, excess kurtosis; higher moments are 0 for zero spread."""
    mu = v.mean()
    d = v - mu
    var = np.mean(d * d)
    if var <= 0.0:
        return mu, 0.0, 0.0, 0.0
    sd = np.sqrt(var)
    return mu, sd, np.mean(d**3) / sd**3, np.mean(d**4) / var**2 - 3.0


def magnitude_spectrum(x, sample_rate):
    """Hann-windowed single-sided |DFT| of the whole window and its bin frequencies."""
    x = np.asarray(x, dtype=np.float64)
    mags = np.abs(np.fft.rfft(x * hann_window(len(x))))
    return mags, np.fft.rfftfreq(len(x), d=1.0 / sample_rate)


def extract_features(x, sample_rate: float, shaft_hz: float, band_half_width=BAND_HALF_WIDTH_HZ):
    """Return the feature vector (ordered as :data:`FEATURE_NAMES`)."""
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    if len(x) < 8:
        raise ValueError("window must have at least 8 samples")

    mean, std, skew, kurt = _moments(x)
    ax = np.abs(x)
    abs_mean = ax.mean()
    energy = float(np.sum(x * x))
    rms = np.sqrt(energy / len(x))
    peak = ax.max()
    clearance_root = np.mean(np.sqrt(ax))
    time = [
        mean, abs_mean, rms, std, std * std, skew, kurt,
        x.max(), x.min(), x.max() - x.min(),
        _div(peak, rms), _div(rms, abs_mean), _div(peak, abs_mean),
        _div(peak, clearance_root**2), energy,
    ]

    mags, freqs = magnitude_spectrum(x, sample_rate)
    s_mean, s_std, s_skew, s_kurt = _moments(mags)
    total = mags.sum()
    power = mags * mags
    bands = []
    for h in range(1, 6):
        sel = np.abs(freqs - h * shaft_hz) <= band_half_width
        bands.append(float(power[sel].sum()))
    p_total = power.sum()
    if p_total > 0:
        p = power[power > 0] / p_total
        entropy = float(-np.sum(p * np.log(p)))
    else:
        entropy = 0.0
    freq = [
        s_mean, s_std, s_skew, s_kurt, _div(np.sum(freqs * mags), total),
        np.sqrt(np.mean(power)), mags.max(), freqs[int(np.argmax(mags))],
        *bands, entropy, _div(bands[1], bands[0]),
    ]
    out = np.array(time + freq, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite feature value")
    return out


@dataclass
class FeatureScaler:
    """Z-score parameters learned on the training split.

    Features with zero training spread are dropped; ``mask`` records which
    columns survive.
    """

    mean: np.ndarray
    std: np.ndarray
    mask: np.ndarray

    @property
    def n_kept(self):
        return int(self.mask.sum())

    def transform(self, feats):
        feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
        return (feats[:, self.mask] - self.mean[self.mask]) / self.std[self.mask]

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "mask": self.mask.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64), np.array(d["mask"], dtype=bool))


def fit_scaler(train: Sequence[np.ndarray]) -> FeatureScaler:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or len(train) == 0:
        raise ValueError("fit_scaler needs a nonempty list of feature vectors")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    mask = std > 1e-12 * np.maximum(1.0, np.abs(mean))
    return FeatureScaler(mean, np.where(mask, std, 1.0), mask)
