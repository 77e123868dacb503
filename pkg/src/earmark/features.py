"""Log mel filterbank (FBank) extraction.

Framing, pre-emphasis, and windowing are done per frame the way Kaldi does
it: the frame is sliced out of the signal first, then pre-emphasized within
the frame (first sample against itself), then windowed and zero-padded for
the FFT. Filterbank triangles use the HTK mel scale m = 1127 ln(1 + f/700),
with weights evaluated in hertz at the FFT bin centers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import PIPELINE_RATE, Waveform
from .errors import ConfigError, ValidationError


@dataclass
class FbankConfig:
    frame_len_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_mels: int = 80
    fft_size: int = 512
    preemphasis: float = 0.97
    window: str = "hamming"
    log_floor: float = 1e-10
    mel_low_hz: float = 20.0
    mel_high_hz: float = 7600.0

    def __post_init__(self):
        if self.window != "hamming":
            raise ConfigError(f"unsupported window {self.window!r}")
        if self.num_mels < 2:
            raise ConfigError("num_mels must be >= 2")
        if not 0.0 <= self.preemphasis < 1.0:
            raise ConfigError("preemphasis must lie in [0, 1)")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")
        if self.fft_size & (self.fft_size - 1) or self.fft_size <= 0:
            raise ConfigError("fft_size must be a power of two")
        if self.frame_len(PIPELINE_RATE) > self.fft_size:
            raise ConfigError(
                f"frame of {self.frame_len(PIPELINE_RATE)} samples exceeds fft_size {self.fft_size}"
            )
        if not self.mel_low_hz < self.mel_high_hz <= PIPELINE_RATE / 2:
            raise ConfigError("need mel_low_hz < mel_high_hz <= Nyquist")

    def frame_len(self, rate: int) -> int:
        return int(round(self.frame_len_ms * rate / 1000.0))

    def frame_shift(self, rate: int) -> int:
        return int(round(self.frame_shift_ms * rate / 1000.0))


@dataclass
class FeatureMatrix:
    """T x D matrix of frame-level features; row t covers frame t."""

    data: np.ndarray
    frame_shift_ms: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValidationError(f"feature matrix must be T x D with T,D >= 1, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("feature matrix contains non-finite entries")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def frame_count(n_samples: int, cfg: FbankConfig, rate: int = PIPELINE_RATE) -> int:
    """Number of full frames: 1 + floor((n - frame_len) / shift)."""
    flen = cfg.frame_len(rate)
    if n_samples < flen:
        raise ValidationError(f"{n_samples} samples is shorter than one {flen}-sample frame")
    return 1 + (n_samples - flen) // cfg.frame_shift(rate)


def hz_to_mel(f):
    return 1127.0 * np.log(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.exp(np.asarray(m, dtype=np.float64) / 1127.0) - 1.0)


def mel_filterbank(cfg: FbankConfig, rate: int = PIPELINE_RATE) -> np.ndarray:
    """Triangular filter weights, shape [num_mels, fft_size//2 + 1].

    Filter centers are equally spaced on the mel scale between mel_low_hz
    and mel_high_hz; each triangle rises from the previous center and falls
    to the next, so any FFT bin is covered by at most two filters.
    """
    n_bins = cfg.fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * rate / cfg.fft_size
    edges_mel = np.linspace(hz_to_mel(cfg.mel_low_hz), hz_to_mel(cfg.mel_high_hz), cfg.num_mels + 2)
    edges_hz = mel_to_hz(edges_mel)
    weights = np.zeros((cfg.num_mels, n_bins))
    for k in range(cfg.num_mels):
        left, center, right = edges_hz[k], edges_hz[k + 1], edges_hz[k + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        weights[k] = np.maximum(0.0, np.minimum(rising, falling))
    return weights


def frame_signal(samples: np.ndarray, cfg: FbankConfig, rate: int = PIPELINE_RATE) -> np.ndarray:
    """Slice into overlapping frames and pre-emphasize within each frame."""
    flen = cfg.frame_len(rate)
    shift = cfg.frame_shift(rate)
    n_frames = frame_count(len(samples), cfg, rate)
    idx = np.arange(flen)[None, :] + shift * np.arange(n_frames)[:, None]
    frames = samples[idx].astype(np.float64)
    if cfg.preemphasis > 0.0:
        out = frames.copy()
        out[:, 1:] -= cfg.preemphasis * frames[:, :-1]
        out[:, 0] -= cfg.preemphasis * frames[:, 0]
        frames = out
    return frames


def fbank(w: Waveform, cfg: FbankConfig) -> FeatureMatrix:
    """Log mel filterbank features, shape [frame_count, num_mels]."""
    if w.sample_rate != PIPELINE_RATE:
        raise ValidationError(f"fbank requires {PIPELINE_RATE} Hz input, got {w.sample_rate}")
    frames = frame_signal(w.samples, cfg, w.sample_rate)
    frames = frames * np.hamming(cfg.frame_len(w.sample_rate))
    spectrum = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ mel_filterbank(cfg, w.sample_rate).T
    feats = np.log(np.maximum(energies, cfg.log_floor))
    if not np.all(np.isfinite(feats)):
        raise ValidationError("non-finite filterbank output (bad config?)")
    return FeatureMatrix(feats, frame_shift_ms=cfg.frame_shift_ms)


def mean_normalize(f: FeatureMatrix) -> FeatureMatrix:
    """Subtract the per-dimension mean over frames (utterance-level CMN)."""
    return FeatureMatrix(f.data - f.data.mean(axis=0, keepdims=True), f.frame_shift_ms)
