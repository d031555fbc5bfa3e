"""Stacked-LSTM classifier trained with hand-derived gradients."""

from .checkpoint import load_checkpoint, save_checkpoint
from .lstm import LstmLayerParams, layer_backward, layer_forward, lstm_cell_backward, lstm_cell_forward, sigmoid
from .model import LstmModel, backward, forward, loss_and_grads, mse_grad, mse_loss, predict
from .optim import RmspropState, rmsprop_step
from .train import TrainReport, TrainResult, build_sequences, split_indices, train

__all__ = [
    "LstmLayerParams", "LstmModel", "RmspropState", "TrainReport", "TrainResult",
    "backward", "build_sequences", "forward", "layer_backward", "layer_forward",
    "load_checkpoint", "loss_and_grads", "lstm_cell_backward", "lstm_cell_forward",
    "mse_grad", "mse_loss", "predict", "rmsprop_step", "save_checkpoint", "sigmoid",
    "split_indices", "train",
]
