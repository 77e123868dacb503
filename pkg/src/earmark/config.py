"""Model, training, and experiment configuration.

Experiment configs are JSON documents; parsing is strict (unknown keys are
errors) so a typo can never silently fall back to a default. Model and
training settings sit at the top level; `synth`, `shard`, and `augment`
sections configure the corresponding pipeline stages.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError
from .features import FbankConfig
from .encoders import EncoderSpec
from .manifest import ShardPlan
from .synth import SynthSpec

HEADS = ("maxpool", "attention")
OPTIMIZERS = ("sgd", "adam")


@dataclass
class SluConfig:
    encoder_specs: list[EncoderSpec] = field(default_factory=lambda: [
        EncoderSpec(id="ctc_like", kind="frozen_projection", output_dim=1024, init_seed=101),
        EncoderSpec(id="transformer_like", kind="frozen_projection", output_dim=256, init_seed=202),
    ])
    lstm_layers: int = 2
    hidden: int = 256
    num_classes: int = 2
    head: str = "maxpool"
    fbank: FbankConfig = field(default_factory=FbankConfig)
    mean_normalize: bool = False
    attn_dim: int = 0  # 0 means "use hidden"
    init_seed: int = 0

    def __post_init__(self):
        if not self.encoder_specs:
            raise ConfigError("need at least one encoder")
        if len({s.id for s in self.encoder_specs}) != len(self.encoder_specs):
            raise ConfigError("encoder ids must be unique")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.hidden < 1 or self.lstm_layers < 1:
            raise ConfigError("hidden and lstm_layers must be >= 1")
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got {self.head!r}")

    @property
    def attention_dim(self) -> int:
        return self.attn_dim or self.hidden

    @property
    def ensemble_dim(self) -> int:
        return sum(s.output_dim for s in self.encoder_specs)


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.0
    epochs: int = 5
    seed: int = 0
    shuffle: bool = True
    gradient_clip_norm: float = 5.0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass
class AugmentConfig:
    snr_db: tuple[float, float] = (5.0, 20.0)
    rt60_s: tuple[float, float] = (0.1, 0.6)

    def __post_init__(self):
        if self.snr_db[0] > self.snr_db[1] or self.rt60_s[0] > self.rt60_s[1]:
            raise ConfigError("augment ranges must be (low, high) with low <= high")


@dataclass
class ExperimentConfig:
    slu: SluConfig = field(default_factory=SluConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)
    shard: ShardPlan = field(default_factory=ShardPlan)
    augment: AugmentConfig = field(default_factory=AugmentConfig)


def _build(cls, doc: dict, what: str, converters: dict | None = None):
    converters = converters or {}
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {what} config "
                          f"(allowed: {', '.join(sorted(allowed))})")
    kwargs = {}
    for key, value in doc.items():
        kwargs[key] = converters[key](value) if key in converters else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {what} config: {exc}") from exc


def encoder_spec_from_dict(doc: dict) -> EncoderSpec:
    return _build(EncoderSpec, doc, "encoder",
                  {"input_band": lambda v: None if v is None else tuple(v)})


def _pair(value) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"expected a [low, high] pair, got {value!r}")
    return tuple(value)


def synth_spec_from_dict(doc: dict) -> SynthSpec:
    return _build(SynthSpec, doc, "synth", {
        "event_duration_s": _pair,
        "event_snr_db": _pair,
        "distractor_count": lambda v: tuple(int(x) for x in _pair(v)),
        "distractor_freq_hz": lambda v: tuple(_pair(b) for b in v),
    })


def experiment_from_dict(doc: dict) -> ExperimentConfig:
    """Parse the experiment JSON document. Model and training keys live at
    the top level; synth/shard/augment are nested sections."""
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a JSON object")
    doc = dict(doc)
    synth = synth_spec_from_dict(doc.pop("synth", {}))
    shard = _build(ShardPlan, doc.pop("shard", {}), "shard")
    augment = _build(AugmentConfig, doc.pop("augment", {}), "augment",
                     {"snr_db": _pair, "rt60_s": _pair})

    slu_keys = {"encoders", "lstm_layers", "hidden", "num_classes", "head", "fbank",
                "mean_normalize", "attn_dim", "init_seed"}
    train_keys = {"optimizer", "lr", "momentum", "epochs", "seed", "shuffle",
                  "gradient_clip_norm"}
    unknown = sorted(set(doc) - slu_keys - train_keys)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in experiment config")

    slu_doc = {k: doc[k] for k in slu_keys if k in doc}
    if "encoders" in slu_doc:
        slu_doc["encoder_specs"] = [encoder_spec_from_dict(e) for e in slu_doc.pop("encoders")]
    if "fbank" in slu_doc:
        slu_doc["fbank"] = _build(FbankConfig, slu_doc["fbank"], "fbank")
    slu = _build(SluConfig, slu_doc, "model")
    train = _build(TrainConfig, {k: doc[k] for k in train_keys if k in doc}, "training")
    return ExperimentConfig(slu=slu, train=train, synth=synth, shard=shard, augment=augment)


def load_experiment_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return experiment_from_dict(doc)


def slu_config_to_dict(cfg: SluConfig) -> dict:
    out = asdict(cfg)
    out["encoders"] = [
        {k: (list(v) if isinstance(v, tuple) else v) for k, v in e.items()}
        for e in out.pop("encoder_specs")
    ]
    return out


def slu_config_from_dict(doc: dict) -> SluConfig:
    doc = dict(doc)
    doc["encoder_specs"] = [encoder_spec_from_dict(e) for e in doc.pop("encoders")]
    doc["fbank"] = _build(FbankConfig, doc["fbank"], "fbank")
    return _build(SluConfig, doc, "model")


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
