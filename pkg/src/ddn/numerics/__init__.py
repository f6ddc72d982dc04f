"""Minimal differentiable tensor core: dense/conv layers, loss, SGD."""

from .layers import (
    ActivationKind,
    conv2d_forward,
    conv2d_raw,
    conv_output_hw,
    dense_forward,
    dense_raw,
    he_uniform,
    parameter_count,
)
from .loss import softmax_cross_entropy
from .optim import sgd_step, zero_grad
from .tensor import (
    Parameter,
    ShapeError,
    Tensor,
    backward,
    concat_rows,
    float_dtype,
    float_mode,
    no_grad,
    set_float_mode,
    sigmoid,
    sigmoid_raw,
    take_rows,
)

__all__ = [
    "ActivationKind",
    "Parameter",
    "ShapeError",
    "Tensor",
    "backward",
    "concat_rows",
    "conv2d_forward",
    "conv2d_raw",
    "conv_output_hw",
    "dense_forward",
    "dense_raw",
    "float_dtype",
    "float_mode",
    "he_uniform",
    "no_grad",
    "parameter_count",
    "set_float_mode",
    "sgd_step",
    "sigmoid",
    "sigmoid_raw",
    "take_rows",
    "softmax_cross_entropy",
    "zero_grad",
]
