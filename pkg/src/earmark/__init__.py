"""Abnormal-event detection in long audio clips.

The pipeline: WAV in, log mel filterbank features, a frozen acoustic
encoder ensemble, a bidirectional LSTM with a per-step linear layer, and
temporal max-pooling (or attention pooling) down to two intent classes.
"""

from .audio import Waveform, read_wav, write_wav
from .config import ExperimentConfig, SluConfig, TrainConfig
from .encoders import EncoderSpec
from .features import FbankConfig, FeatureMatrix, fbank
from .model import Example, SluModel, evaluate, load_checkpoint, predict, save_checkpoint, train
from .synth import SynthSpec, generate_clip, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "EncoderSpec",
    "Example",
    "ExperimentConfig",
    "FbankConfig",
    "FeatureMatrix",
    "SluConfig",
    "SluModel",
    "SynthSpec",
    "TrainConfig",
    "Waveform",
    "evaluate",
    "fbank",
    "generate_clip",
    "generate_dataset",
    "load_checkpoint",
    "predict",
    "read_wav",
    "save_checkpoint",
    "train",
    "write_wav",
]
