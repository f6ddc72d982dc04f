"""Dense and 2-D convolution ops with hand-written backward passes.

Each op has a raw array form (used by folded/frozen networks on the
inference hot path) and a graph form that wraps the same math in an
autodiff node, so folded and dynamic execution are bit-identical.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .tensor import Parameter, ShapeError, Tensor, make_node


class ActivationKind(Enum):
    RELU = "relu"
    IDENTITY = "identity"


def apply_activation(x: np.ndarray, act: ActivationKind) -> np.ndarray:
    if act is ActivationKind.RELU:
        return np.maximum(x, 0.0)
    return x


def he_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


# -- dense ----------------------------------------------------------------

def dense_raw(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
              act: ActivationKind) -> np.ndarray:
    """act(x @ weight.T + bias) for x of shape (B, n), weight (m, n)."""
    return apply_activation(x @ weight.T + bias, act)


def dense_forward(x: Tensor, weight: Tensor, bias: Tensor,
                  act: ActivationKind = ActivationKind.IDENTITY) -> Tensor:
    """Affine layer on a batch of row vectors, with optional ReLU."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or bias.data.ndim != 1:
        raise ShapeError(
            f"dense expects x(B,n), weight(m,n), bias(m); got "
            f"x{x.data.shape}, weight{weight.data.shape}, bias{bias.data.shape}"
        )
    if x.data.shape[1] != weight.data.shape[1] or weight.data.shape[0] != bias.data.shape[0]:
        raise ShapeError(
            f"dense dimension mismatch: x{x.data.shape} · weight{weight.data.shape}ᵀ "
            f"+ bias{bias.data.shape}"
        )
    out = dense_raw(x.data, weight.data, bias.data, act)

    def grad_fn(g):
        if act is ActivationKind.RELU:
            g = g * (out > 0.0)
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    return make_node(out, (x, weight, bias), grad_fn)


# -- conv2d ---------------------------------------------------------------

def conv_output_hw(h: int, w: int, k: int, stride: int, pad: int) -> tuple[int, int]:
    return (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1


def _im2col(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*k*k, H'*W') patch matrix (input already padded)."""
    b, c, h, w = x.shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    sb, sc, sh, sw = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, k, k, ho, wo),
        strides=(sb, sc, sh, sw, stride * sh, stride * sw),
        writeable=False,
    )
    return patches.reshape(b, c * k * k, ho * wo)


def _col2im(cols: np.ndarray, x_shape: tuple[int, ...], k: int, stride: int) -> np.ndarray:
    """Scatter-add columns back onto the (padded) input; inverse of _im2col."""
    b, c, h, w = x_shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    out = np.zeros(x_shape, dtype=cols.dtype)
    cols = cols.reshape(b, c, k, k, ho, wo)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return out


def _pad_hw(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_raw(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
               stride: int, pad: int, act: ActivationKind) -> np.ndarray:
    """Cross-correlation with zero padding: x(B,C,H,W) * weight(F,C,k,k) + bias."""
    b = x.shape[0]
    f, _, k, _ = weight.shape
    xp = _pad_hw(x, pad)
    ho, wo = conv_output_hw(x.shape[2], x.shape[3], k, stride, pad)
    cols = _im2col(xp, k, stride)
    out = np.matmul(weight.reshape(f, -1), cols).reshape(b, f, ho, wo)
    out += bias[None, :, None, None]
    return apply_activation(out, act)


def _check_conv_shapes(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                       stride: int, pad: int) -> None:
    if x.ndim != 4 or weight.ndim != 4 or bias.ndim != 1:
        raise ShapeError(
            f"conv2d expects x(B,C,H,W), weight(F,C,k,k), bias(F); got "
            f"x{x.shape}, weight{weight.shape}, bias{bias.shape}"
        )
    f, cw, kh, kw = weight.shape
    if kh != kw:
        raise ShapeError(f"conv2d expects square kernels, got {kh}×{kw}")
    if cw != x.shape[1]:
        raise ShapeError(f"conv2d channel mismatch: input C={x.shape[1]}, weight C={cw}")
    if bias.shape[0] != f:
        raise ShapeError(f"conv2d bias length {bias.shape[0]} != filters {f}")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be >= 1, got {stride}")
    if kh > x.shape[2] + 2 * pad or kh > x.shape[3] + 2 * pad:
        raise ShapeError(
            f"conv2d kernel {kh}×{kw} larger than padded input "
            f"{x.shape[2] + 2 * pad}×{x.shape[3] + 2 * pad}"
        )


def conv2d_forward(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1,
                   pad: int = 0, act: ActivationKind = ActivationKind.IDENTITY) -> Tensor:
    """2-D convolution layer node; weight may be a Parameter or a folded node."""
    _check_conv_shapes(x.data, weight.data, bias.data, stride, pad)
    b, c, h, w = x.data.shape
    f, _, k, _ = weight.data.shape
    ho, wo = conv_output_hw(h, w, k, stride, pad)
    xp = _pad_hw(x.data, pad)
    cols = _im2col(xp, k, stride)
    out = np.matmul(weight.data.reshape(f, -1), cols).reshape(b, f, ho, wo)
    out += bias.data[None, :, None, None]
    out = apply_activation(out, act)

    def grad_fn(g):
        if act is ActivationKind.RELU:
            g = g * (out > 0.0)
        gf = g.reshape(b, f, ho * wo)
        g_weight = np.einsum("bfn,bcn->fc", gf, cols).reshape(weight.data.shape)
        g_bias = gf.sum(axis=(0, 2))
        g_cols = np.matmul(weight.data.reshape(f, -1).T, gf)
        g_xp = _col2im(g_cols, xp.shape, k, stride)
        g_x = g_xp[:, :, pad:pad + h, pad:pad + w] if pad else g_xp
        return g_x, g_weight, g_bias

    return make_node(out, (x, weight, bias), grad_fn)


def parameter_count(params: list[Parameter]) -> int:
    return sum(p.data.size for p in params)
