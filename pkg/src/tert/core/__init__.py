from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    TapeConsumedError,
    Tensor,
    add,
    backward,
    clip,
    concat,
    dropout,
    elu,
    embedding,
    exp,
    gaussian_log_prob,
    layer_norm,
    log,
    matmul,
    minimum,
    mse,
    mul,
    neg,
    reshape,
    softmax,
    square,
    sub,
    take,
    tmean,
    transpose,
    tsum,
)
from .optim import AdamState, adam_step, clip_grad_norm
from .gradcheck import grad_check

__all__ = [
    "NonFiniteError",
    "ShapeError",
    "Tape",
    "TapeConsumedError",
    "Tensor",
    "AdamState",
    "adam_step",
    "clip_grad_norm",
    "grad_check",
    "add",
    "backward",
    "clip",
    "concat",
    "dropout",
    "elu",
    "embedding",
    "exp",
    "gaussian_log_prob",
    "layer_norm",
    "log",
    "matmul",
    "minimum",
    "mse",
    "mul",
    "neg",
    "reshape",
    "softmax",
    "square",
    "sub",
    "take",
    "tmean",
    "transpose",
    "tsum",
]
