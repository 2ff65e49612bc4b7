"""Audio-to-LLM speech recognition at desk scale: log-Mel frontend, numpy autodiff,
transformer encoder/decoder with an adaptation layer, staged training and WER/EWER scoring."""

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (AumolError, ChecksumError, ConfigError, ContractError, EmptyAudio, InvalidAudio,
                     InvalidConfig, NumericError, ShapeError, ShortAudio, UnsupportedVersion)
from .frontend import AudioBuffer, LogMelFeatures, MelFilterbank, StftConfig, build_mel_filterbank, featurize
from .model import AuMolModel, ModelConfig, Vocabulary, greedy_transcribe
from .trainer import Stage, StagePlan, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "AuMolModel", "AumolError", "ChecksumError", "ConfigError", "ContractError", "EmptyAudio",
    "InvalidAudio", "InvalidConfig", "LogMelFeatures", "MelFilterbank", "ModelConfig", "NumericError",
    "ShapeError", "ShortAudio", "Stage", "StagePlan", "StftConfig", "TrainConfig", "UnsupportedVersion",
    "Vocabulary", "build_mel_filterbank", "featurize", "greedy_transcribe", "load_checkpoint",
    "save_checkpoint", "train",
]
