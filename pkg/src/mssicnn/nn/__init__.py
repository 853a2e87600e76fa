from .functional import (
    conv2d_backward,
    conv2d_forward,
    dropout,
    fc_forward,
    loss_ce_l2,
    maxpool_backward,
    maxpool_forward,
    softmax,
)
from .model import PARAM_ORDER, CnnModel, grad_check
from .optim import Adam

__all__ = [
    "Adam",
    "CnnModel",
    "PARAM_ORDER",
    "conv2d_backward",
    "conv2d_forward",
    "dropout",
    "fc_forward",
    "grad_check",
    "loss_ce_l2",
    "maxpool_backward",
    "maxpool_forward",
    "softmax",
]
