"""The end-to-end classifier: feature extraction, frozen encoder ensemble,
bidirectional LSTM, per-step linear, and a temporal pooling head.

Training runs one utterance per step over the full sequence (no padding or
masking), which keeps everything deterministic: a fixed seed reproduces
checkpoints byte for byte, and resuming from a checkpoint matches the
uninterrupted run exactly. Encoders are frozen, so their outputs are
cached per utterance across epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import archive, metrics
from .audio import Waveform, read_wav
from .config import (SluConfig, TrainConfig, slu_config_from_dict, slu_config_to_dict,
                     train_config_to_dict)
from .encoders import FrozenEncoder, align_and_concat_all
from .errors import NumericError, ValidationError
from .features import FeatureMatrix, fbank, mean_normalize
from .nn import (AttentionPool, BiLstm, Linear, MaxPoolTime, ParameterSet, clip_gradients,
                 make_optimizer, softmax, softmax_cross_entropy)

CHECKPOINT_FORMAT = 1


@dataclass
class Example:
    """One labeled utterance; features come inline or from an archive."""

    utt_id: str
    label: int
    features: Optional[FeatureMatrix] = None
    entry: Optional[archive.ArchiveIndexEntry] = None

    def load(self) -> FeatureMatrix:
        if self.features is not None:
            return self.features
        if self.entry is None:
            raise ValidationError(f"{self.utt_id}: example has neither features nor archive entry")
        return archive.read_feature(self.entry)


@dataclass
class ForwardResult:
    scores: np.ndarray
    # Per-class winning rows for the maxpool head, attention weights otherwise.
    argmax_rows: Optional[np.ndarray] = None
    attention: Optional[np.ndarray] = None
    row_seconds: float = 0.0

    @property
    def label(self) -> int:
        return int(np.argmax(self.scores))

    @property
    def probabilities(self) -> np.ndarray:
        return softmax(self.scores)

    def event_time_s(self) -> Optional[float]:
        if self.argmax_rows is None:
            return None
        return float(self.argmax_rows[self.label] * self.row_seconds)


class SluModel:
    """Frozen encoders feeding a trainable biLSTM + linear + pooling head."""

    def __init__(self, config: SluConfig):
        self.config = config
        self.encoders = [FrozenEncoder(spec, config.fbank.num_mels)
                         for spec in config.encoder_specs]
        self.params = ParameterSet()
        rng = np.random.default_rng(config.init_seed)
        self.bilstm = BiLstm(config.ensemble_dim, config.hidden, config.lstm_layers,
                             self.params, "bilstm", rng)
        self.out = Linear(2 * config.hidden, config.num_classes, self.params, "out", rng)
        self.attn = None
        self.maxpool = None
        if config.head == "attention":
            self.attn = AttentionPool(2 * config.hidden, config.attention_dim,
                                      self.params, "attn", rng)
        else:
            self.maxpool = MaxPoolTime()

    def extract(self, w: Waveform) -> FeatureMatrix:
        feats = fbank(w, self.config.fbank)
        return mean_normalize(feats) if self.config.mean_normalize else feats

    def encode(self, feats: FeatureMatrix, utt_id: Optional[str] = None) -> FeatureMatrix:
        """Run every encoder and concatenate on the common time base."""
        return align_and_concat_all([enc.encode(feats, utt_id) for enc in self.encoders])

    def forward_encoded(self, ensemble: FeatureMatrix) -> ForwardResult:
        h = self.bilstm.forward(ensemble.data)
        row_s = ensemble.frame_shift_ms / 1000.0
        if self.attn is not None:
            context, alpha = self.attn.forward(h)
            scores = self.out.forward(context[None, :])[0]
            return ForwardResult(scores, attention=alpha, row_seconds=row_s)
        logits = self.out.forward(h)
        scores = self.maxpool.forward(logits)
        return ForwardResult(scores, argmax_rows=self.maxpool.argmax_rows.copy(),
                             row_seconds=row_s)

    def backward(self, dscores: np.ndarray) -> None:
        """Backpropagate from pooled-score gradients through the classifier.
        Must follow a forward_encoded call on the same utterance."""
        if self.attn is not None:
            dcontext = self.out.backward(dscores[None, :])[0]
            dh = self.attn.backward(dcontext)
        else:
            dlogits = self.maxpool.backward(dscores)
            dh = self.out.backward(dlogits)
        self.bilstm.backward(dh)

    def forward_features(self, feats: FeatureMatrix, utt_id: Optional[str] = None) -> ForwardResult:
        return self.forward_encoded(self.encode(feats, utt_id))

    def forward_wav(self, w: Waveform) -> ForwardResult:
        return self.forward_features(self.extract(w))


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    steps: int = 0


def train(model: SluModel, examples: list[Example], cfg: TrainConfig,
          optimizer=None, start_epoch: int = 0, encoded_cache: Optional[dict] = None,
          log=None) -> tuple[TrainResult, object]:
    """Train the classifier in place; returns (history, optimizer).

    The per-epoch visit order is drawn from a generator seeded with
    (cfg.seed, epoch), so a run resumed at epoch k replays exactly what the
    uninterrupted run would have done.
    """
    if not examples:
        raise ValidationError("training set is empty")
    if {e.label for e in examples} != {0, 1}:
        raise ValidationError("training set must contain both classes")
    if optimizer is None:
        optimizer = make_optimizer(cfg.optimizer, cfg.lr, cfg.momentum)
    cache = encoded_cache if encoded_cache is not None else {}
    result = TrainResult()
    step = start_epoch * len(examples)
    for epoch in range(start_epoch, cfg.epochs):
        order = np.arange(len(examples))
        if cfg.shuffle:
            order = np.random.default_rng([cfg.seed, epoch]).permutation(len(examples))
        losses = []
        counts = metrics.ConfusionCounts()
        for idx in order:
            ex = examples[idx]
            ensemble = cache.get(ex.utt_id)
            if ensemble is None:
                ensemble = model.encode(ex.load(), ex.utt_id)
                cache[ex.utt_id] = ensemble
            out = model.forward_encoded(ensemble)
            loss, dscores = softmax_cross_entropy(out.scores, ex.label)
            step += 1
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at step {step} on {ex.utt_id!r}")
            model.backward(dscores)
            clip_gradients(model.params, cfg.gradient_clip_norm)
            optimizer.step(model.params)
            losses.append(loss)
            counts = metrics.accumulate(counts, out.label, ex.label)
        entry = {"epoch": epoch, "mean_loss": float(np.mean(losses)),
                 "train_f1": metrics.f1(counts)}
        result.history.append(entry)
        if log is not None:
            print(f"epoch {epoch}: loss {entry['mean_loss']:.4f} "
                  f"train_f1 {entry['train_f1']:.4f}", file=log)
    result.steps = step
    return result, optimizer


def evaluate(model: SluModel, examples: list[Example],
             model_name: str = "model") -> tuple[metrics.ConfusionCounts, dict]:
    """Argmax predictions over a labeled set; positive class is 1."""
    if not examples:
        raise ValidationError("evaluation set is empty")
    counts = metrics.ConfusionCounts()
    for ex in examples:
        out = model.forward_features(ex.load(), ex.utt_id)
        counts = metrics.accumulate(counts, out.label, ex.label)
    return counts, metrics.report(counts, model_name)


@dataclass
class Prediction:
    label: int
    scores: np.ndarray
    probabilities: np.ndarray
    event_time_s: Optional[float]


def predict(model: SluModel, wav_path) -> Prediction:
    """Classify one WAV file; maxpool models also report the time of the
    frame that drove the winning score."""
    out = model.forward_wav(read_wav(wav_path))
    return Prediction(out.label, out.scores, out.probabilities, out.event_time_s())


def save_checkpoint(path, model: SluModel, optimizer=None,
                    train_cfg: Optional[TrainConfig] = None, epochs_done: int = 0) -> None:
    tensors: dict[str, np.ndarray] = {}
    for p in model.params:
        tensors[f"classifier.{p.name}"] = p.value
    for enc in model.encoders:
        for key, value in enc.tensors().items():
            tensors[f"encoder.{enc.spec.id}.{key}"] = value
    if optimizer is not None:
        for key, value in optimizer.state_tensors().items():
            tensors[f"optim.{key}"] = value
    meta = {
        "format": CHECKPOINT_FORMAT,
        "config": slu_config_to_dict(model.config),
        "train": train_config_to_dict(train_cfg) if train_cfg is not None else None,
        "epochs_done": epochs_done,
    }
    archive.write_checkpoint(path, tensors, meta)


def load_checkpoint(path):
    """Returns (model, optimizer or None, meta). Classifier and encoder
    weights come from the stored tensors, so the forward pass reproduces
    the saved model bit for bit."""
    tensors, meta = archive.read_checkpoint(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
    model = SluModel(slu_config_from_dict(meta["config"]))
    model.params.load_tensors(
        {k[len("classifier."):]: v for k, v in tensors.items() if k.startswith("classifier.")})
    for enc in model.encoders:
        prefix = f"encoder.{enc.spec.id}."
        for key, value in enc.tensors().items():
            stored = tensors.get(prefix + key)
            if stored is None:
                raise ValidationError(f"{path}: checkpoint is missing {prefix + key!r}")
            if stored.shape != value.shape:
                raise ValidationError(f"{path}: shape mismatch for {prefix + key!r}")
            value[...] = stored
    optimizer = None
    if meta.get("train") is not None:
        tc = meta["train"]
        optimizer = make_optimizer(tc["optimizer"], tc["lr"], tc.get("momentum", 0.0))
        optimizer.load_state_tensors(
            {k[len("optim."):]: v for k, v in tensors.items() if k.startswith("optim.")})
    return model, optimizer, meta


def examples_from_scp(scp_path, labels: dict[str, int]) -> list[Example]:
    """Pair archive index entries with labels; every utterance in the scp
    must be labeled."""
    out = []
    for entry in archive.read_scp(scp_path):
        if entry.utt_id not in labels:
            raise ValidationError(f"{entry.utt_id!r} in {scp_path} has no label")
        out.append(Example(entry.utt_id, labels[entry.utt_id], entry=entry))
    return out
