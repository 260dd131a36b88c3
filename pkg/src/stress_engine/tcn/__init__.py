from .layers import (
    Affine,
    CausalConv1d,
    Embedding,
    GlobalAvgPool,
    ReLU,
    ResidualBlock,
    cross_entropy,
    softmax,
)
from .model import ModelConfig, ResTcnModel, build_model, load_model, receptive_field, save_model
from .training import TrainConfig, grad_check, predict_log, train

__all__ = [
    "Affine", "CausalConv1d", "Embedding", "GlobalAvgPool", "ReLU",
    "ResidualBlock", "cross_entropy", "softmax",
    "ModelConfig", "ResTcnModel", "build_model", "load_model",
    "receptive_field", "save_model",
    "TrainConfig", "grad_check", "predict_log", "train",
]
