"""Minimal float64 neural-network engine with hand-derived gradients."""

from .layers import LSTM, Conv1D, Dense, Dropout, MaxPool1D, Network, ReLU, layer_from_spec
from .loss import softmax, softmax_cross_entropy
from .optim import Adam
from .gradcheck import gradient_check, max_relative_error, numeric_gradients
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "Checkpoint",
    "Conv1D",
    "Dense",
    "Dropout",
    "LSTM",
    "MaxPool1D",
    "Network",
    "ReLU",
    "gradient_check",
    "layer_from_spec",
    "load_checkpoint",
    "max_relative_error",
    "numeric_gradients",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
