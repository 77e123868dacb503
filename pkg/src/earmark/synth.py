"""Deterministic synthetic corpus: long fixed-duration clips where a short
target event is buried in background noise.

Positives carry exactly one target event (a 400->1600 Hz chirp or a fixed
three-tone sequence) at a seeded offset and SNR; negatives carry none, but
may contain steady-tone distractors. Event durations are drawn from a
0.25 s grid so a matched-filter detector with exact templates can verify
the classes are separable by construction.

The "easy" preset keeps distractor tones outside the event band; the
"hard" preset lowers the event SNR and places distractors inside the
event band, so that no single frequency region is conclusive on its own.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .audio import PIPELINE_RATE, Waveform, write_wav
from .errors import ConfigError
from .manifest import Manifest, UtteranceRecord, write_manifest_dir

EVENT_KINDS = ("chirp", "tone_triad")
CHIRP_LOW_HZ = 400.0
CHIRP_HIGH_HZ = 1600.0
TRIAD_HZ = (620.0, 930.0, 1395.0)
DURATION_GRID_S = 0.25
EDGE_FADE_S = 0.010


@dataclass
class SynthSpec:
    clip_seconds: float = 15.0
    rate: int = PIPELINE_RATE
    positive_fraction: float = 0.4305
    event_duration_s: tuple[float, float] = (0.5, 2.0)
    event_kind: str = "chirp"
    event_snr_db: tuple[float, float] = (0.0, 15.0)
    distractor_count: tuple[int, int] = (0, 2)
    distractor_freq_hz: tuple[tuple[float, float], ...] = ((180.0, 350.0), (2200.0, 3200.0))
    background_rms: float = 0.05
    num_speakers: int = 8

    def __post_init__(self):
        if self.rate != PIPELINE_RATE:
            raise ConfigError(f"rate must be {PIPELINE_RATE}")
        if not 0.0 < self.positive_fraction < 1.0:
            raise ConfigError("positive_fraction must lie strictly between 0 and 1")
        if self.event_kind not in EVENT_KINDS:
            raise ConfigError(f"unknown event_kind {self.event_kind!r}")
        lo, hi = self.event_duration_s
        if not 0.0 < lo <= hi:
            raise ConfigError(f"bad event duration range {self.event_duration_s}")
        if hi >= self.clip_seconds:
            raise ConfigError("event duration must be shorter than the clip")
        if self.distractor_count[0] > self.distractor_count[1] or self.distractor_count[0] < 0:
            raise ConfigError(f"bad distractor_count range {self.distractor_count}")
        if self.background_rms <= 0:
            raise ConfigError("background_rms must be positive")

    @property
    def clip_samples(self) -> int:
        return int(round(self.clip_seconds * self.rate))

    def duration_grid(self) -> np.ndarray:
        lo, hi = self.event_duration_s
        grid = np.arange(lo, hi + DURATION_GRID_S / 2, DURATION_GRID_S)
        return grid[grid <= hi]


def preset(name: str, **overrides) -> SynthSpec:
    """Named generation regimes used by the experiment suites."""
    if name == "easy":
        spec = SynthSpec(event_duration_s=(0.5, 1.0))
    elif name == "hard":
        spec = SynthSpec(
            event_duration_s=(0.5, 1.0),
            event_snr_db=(-5.0, 5.0),
            distractor_count=(1, 3),
            distractor_freq_hz=((450.0, 800.0), (1150.0, 1550.0)),
        )
    else:
        raise ConfigError(f"unknown preset {name!r} (expected easy or hard)")
    return replace(spec, **overrides) if overrides else spec


def _edge_envelope(n: int, rate: int) -> np.ndarray:
    env = np.ones(n)
    fade = min(int(EDGE_FADE_S * rate), n // 2)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
        env[:fade] = ramp
        env[-fade:] = ramp[::-1]
    return env


def event_template(kind: str, duration_s: float, rate: int = PIPELINE_RATE) -> np.ndarray:
    """Unit-RMS target event waveform; deterministic in its arguments."""
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    if kind == "chirp":
        sweep = CHIRP_LOW_HZ * t + (CHIRP_HIGH_HZ - CHIRP_LOW_HZ) * t**2 / (2.0 * duration_s)
        sig = np.sin(2.0 * np.pi * sweep)
    elif kind == "tone_triad":
        sig = np.zeros(n)
        third = n // 3
        for k, hz in enumerate(TRIAD_HZ):
            lo = k * third
            hi = n if k == 2 else (k + 1) * third
            sig[lo:hi] = np.sin(2.0 * np.pi * hz * t[: hi - lo])
    else:
        raise ConfigError(f"unknown event_kind {kind!r}")
    sig = sig * _edge_envelope(n, rate)
    return sig / np.sqrt(np.mean(sig**2))


def pink_noise(n: int, rng: np.random.Generator, rms: float) -> np.ndarray:
    """1/f-shaped noise with the requested RMS."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freq = np.fft.rfftfreq(n, d=1.0)
    spectrum /= np.sqrt(np.maximum(freq, freq[1] * 8))
    noise = np.fft.irfft(spectrum, n=n)
    return noise * (rms / np.sqrt(np.mean(noise**2)))


def _steady_tone(hz: float, n: int, rate: int) -> np.ndarray:
    tone = np.sin(2.0 * np.pi * hz * np.arange(n) / rate)
    return tone * _edge_envelope(n, rate)


def generate_clip(seed: int, label: int, spec: SynthSpec):
    """One clip. Returns (Waveform, event offset in seconds or None)."""
    if label not in (0, 1):
        raise ConfigError(f"label must be 0 or 1, got {label!r}")
    rng = np.random.default_rng([int(seed), label])
    n = spec.clip_samples
    clip = pink_noise(n, rng, spec.background_rms)
    p_bg = float(np.mean(clip**2))

    offset_s = None
    if label == 1:
        duration = float(rng.choice(spec.duration_grid()))
        event = event_template(spec.event_kind, duration, spec.rate)
        snr_db = rng.uniform(*spec.event_snr_db)
        gain = np.sqrt(p_bg * 10.0 ** (snr_db / 10.0))
        offset = int(rng.integers(0, n - len(event) + 1))
        clip[offset : offset + len(event)] += gain * event
        offset_s = offset / spec.rate
    else:
        count = int(rng.integers(spec.distractor_count[0], spec.distractor_count[1] + 1))
        for _ in range(count):
            band = spec.distractor_freq_hz[rng.integers(0, len(spec.distractor_freq_hz))]
            hz = rng.uniform(*band)
            dur = rng.uniform(*spec.event_duration_s)
            tone = _steady_tone(hz, int(round(dur * spec.rate)), spec.rate)
            tone /= np.sqrt(np.mean(tone**2))
            snr_db = rng.uniform(*spec.event_snr_db)
            gain = np.sqrt(p_bg * 10.0 ** (snr_db / 10.0))
            off = int(rng.integers(0, n - len(tone) + 1))
            clip[off : off + len(tone)] += gain * tone

    peak = float(np.max(np.abs(clip)))
    if peak > 0.99:
        clip *= 0.99 / peak
    return Waveform(clip, spec.rate), offset_s


def positive_count(n: int, fraction: float) -> int:
    return int(np.floor(n * fraction + 0.5))


def generate_dataset(n: int, spec: SynthSpec, out_dir, seed: int) -> dict:
    """Write n WAVs plus manifests and a ground-truth event sidecar.

    Exactly round(n * positive_fraction) clips are positive; the label
    order is a seeded shuffle. Layout: out_dir/{wav/*.wav, wav.scp,
    utt2spk, spk2utt, labels, events.gt}.
    """
    if n < 2:
        raise ConfigError(f"need n >= 2 clips, got {n}")
    out_dir = str(out_dir)
    wav_dir = os.path.join(out_dir, "wav")
    os.makedirs(wav_dir, exist_ok=True)

    rng = np.random.default_rng(seed)
    n_pos = positive_count(n, spec.positive_fraction)
    labels = np.zeros(n, dtype=int)
    labels[rng.permutation(n)[:n_pos]] = 1
    clip_seeds = rng.integers(0, 2**31, size=n)

    records = []
    offsets: dict[str, float | None] = {}
    for i in range(n):
        utt_id = f"utt{i:05d}"
        wav_path = os.path.join(wav_dir, f"{utt_id}.wav")
        wave, offset_s = generate_clip(int(clip_seeds[i]), int(labels[i]), spec)
        write_wav(wave, wav_path)
        speaker = f"spk{i % spec.num_speakers:03d}"
        records.append(UtteranceRecord(utt_id, wav_path, speaker, int(labels[i])))
        offsets[utt_id] = offset_s

    manifest = Manifest(records)
    write_manifest_dir(manifest, out_dir)
    with open(os.path.join(out_dir, "events.gt"), "w", encoding="utf-8") as f:
        for rec in manifest.records:
            off = offsets[rec.utt_id]
            f.write(f"{rec.utt_id} {'-' if off is None else f'{off:.6f}'}\n")
    return {
        "out_dir": out_dir,
        "n": n,
        "positives": int(labels.sum()),
        "negatives": int(n - labels.sum()),
    }


def read_event_offsets(path) -> dict[str, float | None]:
    """Parse the events.gt sidecar written by generate_dataset."""
    out: dict[str, float | None] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            utt_id, value = line.split()
            out[utt_id] = None if value == "-" else float(value)
    return out
