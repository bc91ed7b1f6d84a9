from .autodiff import Tensor
from .network import (
    CheckpointError,
    CorruptCheckpoint,
    DecodeConfig,
    ManifestMismatch,
    ModelConfig,
    ModelParams,
    ProgramMismatchError,
    SimplifierModel,
    load_params,
    load_pretrained_embeddings,
    save_params,
)
from .training import Adam, NumericError, TrainConfig, TrainResult, edit_accuracy, train, validate_programs

__all__ = [
    "Adam",
    "CheckpointError",
    "CorruptCheckpoint",
    "DecodeConfig",
    "ManifestMismatch",
    "ModelConfig",
    "ModelParams",
    "NumericError",
    "ProgramMismatchError",
    "SimplifierModel",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "edit_accuracy",
    "load_params",
    "load_pretrained_embeddings",
    "save_params",
    "train",
    "validate_programs",
]
