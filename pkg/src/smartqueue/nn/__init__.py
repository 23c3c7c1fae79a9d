"""Small numpy neural-network core: dense and attention layers, exact
backpropagation, optimisers and a finite-difference gradient oracle."""

from .gradcheck import finite_diff_check
from .layers import Tape, attention_conv, backward, concat, linear, mlp_forward, relu
from .optim import SGD, Adam, make_optimizer, optimizer_step, soft_update
from .params import (
    AttentionConfig,
    ParamSet,
    dumps_params,
    init_attention,
    init_dense,
    init_mlp,
    load_params,
    loads_params,
    save_params,
)

__all__ = [
    "Adam",
    "AttentionConfig",
    "ParamSet",
    "SGD",
    "Tape",
    "attention_conv",
    "backward",
    "concat",
    "dumps_params",
    "finite_diff_check",
    "init_attention",
    "init_dense",
    "init_mlp",
    "linear",
    "load_params",
    "loads_params",
    "make_optimizer",
    "mlp_forward",
    "optimizer_step",
    "relu",
    "save_params",
    "soft_update",
]
