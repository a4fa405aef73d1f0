from .adam import AdamState, adam_init, adam_update
from .gradcheck import finite_diff_grad_check
from .layers import (BatchNormParams, LstmCellParams, ShapeError, batchnorm_forward,
                     bilstm_forward, dense_forward, dropout_apply, init_lstm_params,
                     lstm_cell_step, sigmoid)
from .losses import bce_loss, soft_f2_loss
from .network import (NetworkParams, apply_bn_stats, init_network_params,
                      network_backward, network_forward, network_loss)
from .params_io import FORMAT_LINE, load_tensors, save_tensors

__all__ = [
    "AdamState", "adam_init", "adam_update", "finite_diff_grad_check",
    "BatchNormParams", "LstmCellParams", "ShapeError", "batchnorm_forward",
    "bilstm_forward", "dense_forward", "dropout_apply", "init_lstm_params",
    "lstm_cell_step", "sigmoid", "bce_loss", "soft_f2_loss", "NetworkParams",
    "apply_bn_stats", "init_network_params", "network_backward",
    "network_forward", "network_loss", "FORMAT_LINE", "load_tensors",
    "save_tensors",
]
