"""Softmax cross-entropy with analytic gradient."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, make_node


def softmax_cross_entropy(logits: Tensor, labels) -> tuple[Tensor, np.ndarray]:
    """Mean negative log-likelihood over a batch of class logits.

    Returns the scalar loss node and the analytic logits gradient
    (softmax minus one-hot, divided by batch size). The gradient array
    is returned eagerly so callers can inspect it without a backward
    pass; the loss node carries the same gradient for autodiff.
    """
    if logits.data.ndim != 2:
        raise ValueError(f"logits must be (B, C), got shape {logits.data.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    b, c = logits.data.shape
    if labels.shape != (b,):
        raise ValueError(f"labels must have shape ({b},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels out of range [0, {c}): {labels.tolist()}")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    rows = np.arange(b)
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
    loss = -log_probs[rows, labels].mean()

    grad_logits = probs.copy()
    grad_logits[rows, labels] -= 1.0
    grad_logits /= b

    def grad_fn(g):
        return (g * grad_logits,)

    return make_node(np.asarray(loss), (logits,), grad_fn), grad_logits.copy()
