"""SGD with classical momentum."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter


def sgd_step(params: list[Parameter], lr: float, momentum: float = 0.0) -> None:
    """One in-place update: v ← momentum·v + grad; value ← value − lr·v.

    Gradients are left untouched; callers zero them between steps.
    Velocity buffers live on the parameters and persist across steps.
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    for p in params:
        if momentum == 0.0:
            p.data -= lr * p.grad
            continue
        if p._velocity is None:
            p._velocity = np.zeros_like(p.data)
        p._velocity *= momentum
        p._velocity += p.grad
        p.data -= lr * p._velocity


def zero_grad(params: list[Parameter]) -> None:
    for p in params:
        p.zero_grad()
