"""Vibration fault diagnosis from STFT/MFCC spectrogram images."""
__version__ = "0.1.0"
