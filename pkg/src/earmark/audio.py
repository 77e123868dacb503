"""Single-channel 16 kHz PCM audio I/O.

Every pipeline stage consumes `Waveform` values produced here. Input files
must already be 16-bit mono PCM at 16000 Hz; there is no resampling or
downmixing, a mismatch is a hard error.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import AudioFormatError

PIPELINE_RATE = 16000

# Write-side quantization allows a hair of numeric slop above full scale
# before treating the signal as a generator bug.
_AMPLITUDE_LIMIT = 1.0001


@dataclass
class Waveform:
    """Mono audio: float amplitudes in [-1, 1] plus the sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = PIPELINE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioFormatError("waveform must be a nonempty 1-D sequence")
        if self.sample_rate <= 0:
            raise AudioFormatError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise AudioFormatError("waveform contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


def read_wav(path) -> Waveform:
    """Read a 16-bit mono PCM WAV file at 16000 Hz.

    Sample i is pcm_i / 32768.0. Any other encoding, channel count, or
    rate raises AudioFormatError; a broken container raises it too.
    """
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            comp = w.getcomptype()
            n = w.getnframes()
            payload = w.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: malformed WAV container: {exc}") from exc
    if comp != "NONE":
        raise AudioFormatError(f"{path}: compressed WAV ({comp}) not supported")
    if width != 2:
        raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if channels != 1:
        raise AudioFormatError(f"{path}: expected 1 channel, got {channels}")
    if rate != PIPELINE_RATE:
        raise AudioFormatError(f"{path}: expected {PIPELINE_RATE} Hz, got {rate} (no resampling)")
    if len(payload) < 2:
        raise AudioFormatError(f"{path}: empty data chunk")
    pcm = np.frombuffer(payload, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, sample_rate=rate)


def write_wav(w: Waveform, path) -> None:
    """Write 16-bit mono PCM. Quantization is round(s * 32767), half away
    from zero, saturated to [-32768, 32767]."""
    peak = float(np.max(np.abs(w.samples))) if len(w.samples) else 0.0
    if peak > _AMPLITUDE_LIMIT:
        raise AudioFormatError(
            f"sample magnitude {peak:.6f} exceeds {_AMPLITUDE_LIMIT} (upstream bug?)"
        )
    scaled = w.samples * 32767.0
    pcm = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled)
    pcm = np.clip(pcm, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())
