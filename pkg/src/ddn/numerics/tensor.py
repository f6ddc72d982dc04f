"""Reverse-mode autodiff over dense numpy arrays.

Values are row-major float arrays in a process-wide float mode (f64 by
default, f32 selectable for benchmark runs). Every differentiable op
records its parents and a gradient closure on the output tensor;
``backward(loss)`` walks the recorded graph in reverse topological order
and accumulates gradients into reachable :class:`Parameter` leaves.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_FLOAT_MODES = {"f32": np.dtype(np.float32), "f64": np.dtype(np.float64)}
_dtype = _FLOAT_MODES["f64"]


class ShapeError(ValueError):
    """Raised when operand shapes do not agree; message reports both sides."""


def set_float_mode(mode: str) -> None:
    """Select the global float mode: "f64" (tests, gradient checks) or "f32" (benchmarks)."""
    global _dtype
    if mode not in _FLOAT_MODES:
        raise ValueError(f"unknown float mode {mode!r}, expected one of {sorted(_FLOAT_MODES)}")
    _dtype = _FLOAT_MODES[mode]


def float_mode() -> str:
    return "f32" if _dtype == np.float32 else "f64"


def float_dtype() -> np.dtype:
    return _dtype


_grad_enabled = True


class no_grad:
    """Context manager disabling graph recording (evaluation / benchmark paths)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense array node in the autodiff graph.

    Leaf tensors have no parents. Op outputs carry ``_parents`` and a
    ``_grad_fn`` mapping the output gradient to per-parent gradients.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, grad_fn={self._grad_fn is not None})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __neg__(self):
        return mul(self, _coerce(-1.0))

    def sum(self):
        return tsum(self)

    def reshape(self, shape: Sequence[int]):
        return reshape(self, tuple(shape))


class Parameter(Tensor):
    """Trainable leaf: value plus a persistent, accumulating gradient buffer.

    The gradient is zero after construction and after :meth:`zero_grad`;
    repeated backward passes add into it.
    """

    __slots__ = ("_velocity",)

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self._velocity: np.ndarray | None = None

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def _coerce(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=_dtype))


def make_node(data: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    """Wrap an op result, recording the graph edge only when grad is live."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so grad matches the original operand shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- primitive ops -------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return make_node(out, (a, b), grad_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data - b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return make_node(out, (a, b), grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data * b.data

    def grad_fn(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return make_node(out, (a, b), grad_fn)


def tsum(a: Tensor) -> Tensor:
    out = a.data.sum()

    def grad_fn(g):
        return (np.broadcast_to(g, a.data.shape),)

    return make_node(out, (a,), grad_fn)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def grad_fn(g):
        return (g * (out > 0.0),)

    return make_node(out, (a,), grad_fn)


def sigmoid_raw(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function on arrays."""
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out = sigmoid_raw(a.data)

    def grad_fn(g):
        return (g * out * (1.0 - out),)

    return make_node(out, (a,), grad_fn)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape)

    def grad_fn(g):
        return (g.reshape(a.data.shape),)

    return make_node(out, (a,), grad_fn)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors along axis 0; backward slices the gradient back."""
    parts = list(tensors)
    out = np.concatenate([t.data for t in parts], axis=0)
    offsets = np.cumsum([0] + [t.data.shape[0] for t in parts])

    def grad_fn(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return make_node(out, tuple(parts), grad_fn)


def take_rows(a: Tensor, indices) -> Tensor:
    """Row gather along axis 0; backward scatter-adds into the source rows."""
    idx = np.asarray(indices, dtype=np.int64)
    out = a.data[idx]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)

    return make_node(out, (a,), grad_fn)


# -- backward pass -------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Populate gradients of every Parameter reachable from ``loss``.

    Gradients accumulate (+=) into parameter buffers; intermediate adjoints
    are kept off-node so repeated calls on the same graph add exactly one
    more copy of the gradient. Raises if ``loss`` has no recorded graph.
    """
    if loss._grad_fn is None:
        raise RuntimeError(
            "backward() called without a recorded forward pass "
            "(tensor has no graph; was it computed under no_grad?)"
        )

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node._grad_fn is None:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if not parent.requires_grad:
                continue
            prev = adjoint.get(id(parent))
            adjoint[id(parent)] = pg if prev is None else prev + pg
