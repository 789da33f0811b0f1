"""Tensors, the gradient tape and finite-difference checks."""

from .gradcheck import grad_check, relative_error
from .tensor import (
    LOG_FLOOR,
    PRIMITIVES,
    Tape,
    Tensor,
    add,
    backward,
    concat,
    constant,
    current_tape,
    detach,
    embedding,
    gelu,
    gradients,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    reshape,
    scale,
    slice,
    softmax,
    sum,
    transpose,
)

__all__ = [
    "LOG_FLOOR",
    "PRIMITIVES",
    "Tape",
    "Tensor",
    "add",
    "backward",
    "concat",
    "constant",
    "current_tape",
    "detach",
    "embedding",
    "gelu",
    "grad_check",
    "gradients",
    "layer_norm",
    "log",
    "matmul",
    "mean",
    "mul",
    "relative_error",
    "reshape",
    "scale",
    "slice",
    "softmax",
    "sum",
    "transpose",
]
