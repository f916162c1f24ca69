"""Supervised learning regularized by a self-supervised transform-prediction task."""

from .datasets import Dataset, SplitDataset, make_split, three_spirals, two_moons
from .estimator import GlobalContrastNormalizer, SesemiClassifier, ZCAWhitener
from .exceptions import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    NumericalError,
    ParameterError,
    SesemiError,
    StateError,
)
from .models import DualHeadModel, build_model, convnet_spec, mlp_spec
from .rng import RngStream
from .training import TrainConfig, train_sesemi

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "Dataset", "DimensionError", "DualHeadModel",
    "FormatError", "GlobalContrastNormalizer", "NumericalError", "ParameterError",
    "RngStream", "SesemiClassifier", "SesemiError", "SplitDataset", "StateError",
    "TrainConfig", "ZCAWhitener", "build_model", "convnet_spec", "make_split",
    "mlp_spec", "three_spirals", "train_sesemi", "two_moons",
]
