"""Pluggable frozen acoustic encoders and ensemble concatenation.

Encoders stand in for large pre-trained acoustic models: each one maps a
frame-level feature matrix to a [T' x output_dim] representation, where
T' = ceil(T / frame_stride). Their weights are fully determined by an
init seed, are never touched by training, and can be checkpointed and
byte-compared to prove they stayed frozen. A `precomputed` kind loads
representations verbatim from a feature archive instead, so outputs of
real external encoders can be plugged in unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import archive
from .errors import ConfigError, ValidationError
from .features import FeatureMatrix
from .nn import LstmDirection, ParameterSet, uniform_init

ENCODER_KINDS = ("frozen_projection", "frozen_recurrent", "precomputed")


@dataclass
class EncoderSpec:
    id: str
    kind: str = "frozen_projection"
    output_dim: int = 1024
    frame_stride: int = 1
    init_seed: int = 0
    feature_scp: Optional[str] = None
    # Restrict the encoder to feature columns [lo, hi); None sees everything.
    # This is how a band-limited view is built for ensemble experiments.
    input_band: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if not self.id or any(c.isspace() for c in self.id):
            raise ConfigError(f"encoder id must be a whitespace-free token, got {self.id!r}")
        if self.kind not in ENCODER_KINDS:
            raise ConfigError(f"unknown encoder kind {self.kind!r}")
        if self.output_dim < 1:
            raise ConfigError("encoder output_dim must be >= 1")
        if self.frame_stride < 1:
            raise ConfigError("encoder frame_stride must be >= 1")
        if self.kind == "precomputed" and not self.feature_scp:
            raise ConfigError(f"encoder {self.id!r}: precomputed kind requires feature_scp")
        if self.input_band is not None:
            lo, hi = self.input_band
            if not 0 <= lo < hi:
                raise ConfigError(f"encoder {self.id!r}: bad input_band {self.input_band}")


@dataclass
class EncoderOutput:
    data: np.ndarray
    stride: int
    # Milliseconds per output row (input frame shift times stride).
    row_ms: float


class FrozenEncoder:
    """A materialized encoder: spec plus fixed weights."""

    def __init__(self, spec: EncoderSpec, input_dim: int):
        self.spec = spec
        lo, hi = spec.input_band if spec.input_band is not None else (0, input_dim)
        if hi > input_dim:
            raise ConfigError(
                f"encoder {spec.id!r}: input_band {spec.input_band} exceeds feature dim {input_dim}"
            )
        self.band = (lo, hi)
        self.in_dim = hi - lo
        rng = np.random.default_rng(spec.init_seed)
        self._index = None
        self._lstm = None
        self.proj_w = None
        self.proj_b = None
        if spec.kind == "frozen_projection":
            stacked = self.in_dim * spec.frame_stride
            self.proj_w = uniform_init(rng, (spec.output_dim, stacked), stacked)
            self.proj_b = uniform_init(rng, spec.output_dim, stacked)
        elif spec.kind == "frozen_recurrent":
            self._lstm = LstmDirection(self.in_dim, spec.output_dim, ParameterSet(),
                                       f"enc.{spec.id}", rng)
        else:
            self._index = {e.utt_id: e for e in archive.read_scp(spec.feature_scp)}

    def encode(self, features: FeatureMatrix, utt_id: Optional[str] = None) -> EncoderOutput:
        spec = self.spec
        row_ms = features.frame_shift_ms * spec.frame_stride
        if spec.kind == "precomputed":
            if utt_id is None:
                raise ValidationError(f"encoder {spec.id!r}: precomputed kind needs an utterance id")
            entry = self._index.get(utt_id)
            if entry is None:
                raise ValidationError(f"encoder {spec.id!r}: no precomputed features for {utt_id!r}")
            mat = archive.read_feature(entry)
            if mat.dim != spec.output_dim:
                raise ValidationError(
                    f"encoder {spec.id!r}: precomputed dim {mat.dim} != declared {spec.output_dim}"
                )
            return EncoderOutput(mat.data, spec.frame_stride, row_ms)

        x = features.data[:, self.band[0] : self.band[1]]
        if spec.kind == "frozen_projection":
            out = np.tanh(stack_frames(x, spec.frame_stride) @ self.proj_w.T + self.proj_b)
        else:
            hidden = self._lstm.forward(x)
            out = hidden[:: spec.frame_stride].copy()
        return EncoderOutput(out, spec.frame_stride, row_ms)

    def tensors(self) -> dict[str, np.ndarray]:
        """Weight arrays for checkpointing; empty for precomputed kind."""
        if self.spec.kind == "frozen_projection":
            return {"proj_w": self.proj_w, "proj_b": self.proj_b}
        if self.spec.kind == "frozen_recurrent":
            return {"w_x": self._lstm.w_x.value, "w_h": self._lstm.w_h.value,
                    "b": self._lstm.b.value}
        return {}


def stack_frames(x: np.ndarray, stride: int) -> np.ndarray:
    """Group `stride` consecutive rows into one; the tail group is padded
    with zero rows. [T x D] -> [ceil(T/stride) x stride*D]."""
    t, d = x.shape
    t_out = -(-t // stride)
    padded = np.zeros((t_out * stride, d))
    padded[:t] = x
    return padded.reshape(t_out, stride * d)


def encode(features: FeatureMatrix, spec: EncoderSpec, utt_id: Optional[str] = None) -> EncoderOutput:
    """Materialize the encoder for this spec and run it once."""
    return FrozenEncoder(spec, features.dim).encode(features, utt_id)


def align_and_concat(a: EncoderOutput, b: EncoderOutput) -> FeatureMatrix:
    """Bring two encoder outputs of one utterance onto the finer time base
    (repeating coarser rows), truncate to the shorter, and concatenate
    along the feature axis."""
    return align_and_concat_all([a, b])


def align_and_concat_all(outputs: list[EncoderOutput]) -> FeatureMatrix:
    if not outputs:
        raise ValidationError("need at least one encoder output")
    fine = min(o.stride for o in outputs)
    upsampled = []
    for o in outputs:
        if o.stride % fine:
            raise ValidationError(
                f"stride {o.stride} is not a multiple of the finest stride {fine}"
            )
        ratio = o.stride // fine
        upsampled.append(np.repeat(o.data, ratio, axis=0) if ratio > 1 else o.data)
    lengths = [u.shape[0] for u in upsampled]
    tolerance = max(o.stride for o in outputs)
    if max(lengths) - min(lengths) > tolerance:
        raise ValidationError(
            f"encoder output lengths {lengths} differ by more than {tolerance} frames; "
            "are these from the same utterance?"
        )
    t = min(lengths)
    if t == 0:
        raise ValidationError("zero-length ensemble output after truncation")
    row_ms = min(outputs, key=lambda o: o.stride).row_ms
    return FeatureMatrix(np.concatenate([u[:t] for u in upsampled], axis=1), row_ms)
