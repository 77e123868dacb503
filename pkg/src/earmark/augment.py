"""Waveform augmentation: additive noise at a target SNR and reverberation.

Both operations keep the output exactly as long as the input and keep the
peak within the PCM range, so augmented clips stay valid 15 s utterances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .audio import Waveform
from .errors import ValidationError


@dataclass
class RoomImpulseResponse:
    taps: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1 or self.taps.size == 0:
            raise ValidationError("RIR must be a nonempty 1-D tap sequence")
        if not np.all(np.isfinite(self.taps)):
            raise ValidationError("RIR contains non-finite taps")
        if not np.any(self.taps):
            raise ValidationError("RIR is all zero")


def add_noise_at_snr(clean: Waveform, noise: Waveform, snr_db: float, seed: int) -> Waveform:
    """Mix a seeded random segment of `noise` into `clean` at `snr_db`.

    The noise is tiled if shorter than the clean signal, a random offset is
    drawn, and the segment is scaled so 10 log10(P_clean / P_noise) hits the
    requested SNR. If the mixture peaks above 1 it is rescaled as a whole.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValidationError(
            f"rate mismatch: clean {clean.sample_rate} vs noise {noise.sample_rate}"
        )
    if not np.isfinite(snr_db):
        raise ValidationError(f"non-finite snr_db {snr_db}")
    p_clean = float(np.mean(clean.samples**2))
    if p_clean == 0.0:
        raise ValidationError("clean signal has zero power")
    if not np.any(noise.samples):
        raise ValidationError("noise signal has zero power")

    n = len(clean.samples)
    tiled = noise.samples
    if len(tiled) < n:
        reps = -(-n // len(tiled))
        tiled = np.tile(tiled, reps)
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, len(tiled) - n + 1))
    segment = tiled[offset : offset + n]
    p_seg = float(np.mean(segment**2))
    if p_seg == 0.0:
        raise ValidationError("selected noise segment has zero power")

    gain = np.sqrt(p_clean / (p_seg * 10.0 ** (snr_db / 10.0)))
    mix = clean.samples + gain * segment
    peak = float(np.max(np.abs(mix)))
    if peak > 1.0:
        mix = mix / peak
    return Waveform(mix, clean.sample_rate)


def convolve_truncated(signal: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Full convolution cut back to the signal length (no normalization)."""
    return fftconvolve(signal, taps, mode="full")[: len(signal)]


def reverberate(signal: Waveform, rir: RoomImpulseResponse) -> Waveform:
    """Convolve with the RIR, truncate to the input length, and rescale so
    the output peak matches the input peak."""
    if signal.sample_rate != rir.sample_rate:
        raise ValidationError(
            f"rate mismatch: signal {signal.sample_rate} vs RIR {rir.sample_rate}"
        )
    wet = convolve_truncated(signal.samples, rir.taps)
    peak_in = float(np.max(np.abs(signal.samples)))
    peak_out = float(np.max(np.abs(wet)))
    if peak_in > 0.0 and peak_out > 0.0:
        wet = wet * (peak_in / peak_out)
    return Waveform(wet, signal.sample_rate)


def make_rir(rt60_s: float, seed: int, sample_rate: int = 16000, tail_gain: float = 0.3) -> RoomImpulseResponse:
    """Synthetic RIR: a unit direct path followed by an exponentially
    decaying seeded noise tail reaching -60 dB at rt60_s."""
    if not 0.01 <= rt60_s <= 2.0:
        raise ValidationError(f"rt60 {rt60_s} out of supported range [0.01, 2.0] s")
    n_tail = int(round(rt60_s * sample_rate))
    rng = np.random.default_rng(seed)
    t = np.arange(1, n_tail + 1) / sample_rate
    envelope = np.exp(-3.0 * np.log(10.0) * t / rt60_s)
    tail = tail_gain * rng.standard_normal(n_tail) * envelope
    return RoomImpulseResponse(np.concatenate(([1.0], tail)), sample_rate)
