"""From-scratch convolutional autoencoder: layers, gradients, Adam and training."""
from .checkpoint import CheckpointError, load_checkpoint, read_header, save_checkpoint
from .model import DECODER, ENCODER, Autoencoder, LayerSpec, count_params, layer_table, score, to_unit
from .optim import AdamState, NonFiniteGradient, adam_step, global_norm
from .train import TrainConfig, TrainResult, batch_gradient, train

__all__ = [
    "Autoencoder", "LayerSpec", "ENCODER", "DECODER", "layer_table", "count_params", "score", "to_unit",
    "AdamState", "adam_step", "global_norm", "NonFiniteGradient",
    "TrainConfig", "TrainResult", "train", "batch_gradient",
    "save_checkpoint", "load_checkpoint", "read_header", "CheckpointError",
]
