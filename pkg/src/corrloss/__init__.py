"""Correlation losses for regression: a robust Pearson loss and a coarse-to-fine rank loss."""
from .losses import LossConfig, loss_plc, loss_src, loss_total
from .metrics import evaluate, kendall, pearson, spearman
from .model import MlpRegressor
from .trainer import TrainConfig, train

__all__ = [
    "LossConfig", "loss_plc", "loss_src", "loss_total",
    "evaluate", "kendall", "pearson", "spearman",
    "MlpRegressor", "TrainConfig", "train",
]
