"""Dynamic networks: expert-weight layers folded per domain into static nets.

Each dynamic layer holds K expert weight tensors and K controllers. A
controller maps a domain embedding to a scalar factor in (0,1) through a
linear transform and a sigmoid; the layer's effective weight is the
factor-weighted sum of its experts. Folding materializes those effective
weights into an immutable static network with exactly the parameter count
of the static baseline, which can then be reused for every input while
the domain is stable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..numerics import (
    ActivationKind,
    Parameter,
    ShapeError,
    Tensor,
    conv2d_forward,
    conv2d_raw,
    conv_output_hw,
    dense_forward,
    dense_raw,
    he_uniform,
    sigmoid,
    sigmoid_raw,
)
from ..numerics.tensor import float_dtype

RELU = ActivationKind.RELU
IDENTITY = ActivationKind.IDENTITY


# -- architecture ----------------------------------------------------------

@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    pad: int = 1


@dataclass(frozen=True)
class ArchSpec:
    """Conv backbone plus a two-layer dense head; the backbone is what folds."""

    convs: tuple[ConvSpec, ...]
    hidden: int = 64
    classes: int = 10
    in_channels: int = 3
    image_hw: int = 32

    def feature_shape(self) -> tuple[int, int]:
        """(channels, flattened feature length) after the last conv."""
        h = w = self.image_hw
        for conv in self.convs:
            h, w = conv_output_hw(h, w, conv.kernel, conv.stride, conv.pad)
        c = self.convs[-1].out_channels
        return c, c * h * w

    def to_json(self) -> dict:
        return {
            "convs": [[c.out_channels, c.kernel, c.stride, c.pad] for c in self.convs],
            "hidden": self.hidden,
            "classes": self.classes,
            "in_channels": self.in_channels,
            "image_hw": self.image_hw,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ArchSpec":
        return cls(
            convs=tuple(ConvSpec(*row) for row in data["convs"]),
            hidden=data["hidden"],
            classes=data["classes"],
            in_channels=data["in_channels"],
            image_hw=data["image_hw"],
        )


DEFAULT_ARCH = ArchSpec(convs=(
    ConvSpec(8, 3, 2, 1),
    ConvSpec(16, 3, 2, 1),
    ConvSpec(32, 3, 2, 1),
    ConvSpec(48, 3, 1, 1),
    ConvSpec(48, 3, 2, 1),
))


# -- layers -----------------------------------------------------------------

@dataclass
class ControllerParams:
    """One controller: alpha = sigmoid(weight · embedding + bias)."""

    weight: Parameter  # (d,)
    bias: Parameter    # scalar

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class StaticLayer:
    def __init__(self, kind: str, weight: Parameter, bias: Parameter,
                 stride: int = 1, pad: int = 0,
                 act: ActivationKind = IDENTITY):
        self.kind = kind
        self.weight = weight
        self.bias = bias
        self.stride = stride
        self.pad = pad
        self.act = act

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class ExpertLayer:
    """K same-shape expert weights, a shared bias, and K controllers."""

    def __init__(self, kind: str, experts: list[Parameter], bias: Parameter,
                 controllers: list[ControllerParams], stride: int = 1,
                 pad: int = 0, act: ActivationKind = IDENTITY):
        if not experts:
            raise ValueError("expert layer needs at least one expert")
        shapes = {e.data.shape for e in experts}
        if len(shapes) > 1:
            raise ShapeError(f"expert weights must share one shape, got {shapes}")
        if len(controllers) != len(experts):
            raise ValueError(
                f"{len(experts)} experts but {len(controllers)} controllers"
            )
        self.kind = kind
        self.experts = experts
        self.bias = bias
        self.controllers = controllers
        self.stride = stride
        self.pad = pad
        self.act = act

    @property
    def k(self) -> int:
        return len(self.experts)

    def parameters(self) -> list[Parameter]:
        params = list(self.experts) + [self.bias]
        for ctrl in self.controllers:
            params.extend(ctrl.parameters())
        return params


def _run_layer_graph(kind: str, x: Tensor, weight: Tensor, bias: Tensor,
                     stride: int, pad: int, act: ActivationKind) -> Tensor:
    if kind == "dense":
        if x.data.ndim == 4:
            x = x.reshape((x.data.shape[0], -1))
        return dense_forward(x, weight, bias, act)
    return conv2d_forward(x, weight, bias, stride=stride, pad=pad, act=act)


def _run_layer_raw(kind: str, x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                   stride: int, pad: int, act: ActivationKind) -> np.ndarray:
    if kind == "dense":
        if x.ndim == 4:
            x = x.reshape(x.shape[0], -1)
        return dense_raw(x, weight, bias, act)
    return conv2d_raw(x, weight, bias, stride=stride, pad=pad, act=act)


# -- controllers and folding --------------------------------------------------

def controller_alpha(theta: ControllerParams, embedding: np.ndarray) -> float:
    """Combination factor in (0,1) for one expert given a domain embedding."""
    embedding = np.asarray(embedding)
    if embedding.shape != theta.weight.data.shape:
        raise ShapeError(
            f"controller expects embedding of shape {theta.weight.data.shape}, "
            f"got {embedding.shape}"
        )
    z = (theta.weight.data * embedding).sum() + theta.bias.data
    return float(sigmoid_raw(np.asarray(z)))


def _controller_alpha_node(theta: ControllerParams, embedding: Tensor) -> Tensor:
    z = (theta.weight * embedding).sum() + theta.bias
    return sigmoid(z)


def fold_layer(layer: ExpertLayer, embedding: np.ndarray) -> tuple[np.ndarray, list[float]]:
    """Effective weight = sum_j alpha_j · W_j; the factors are returned for export."""
    alphas = [controller_alpha(ctrl, embedding) for ctrl in layer.controllers]
    weight = alphas[0] * layer.experts[0].data
    for alpha, expert in zip(alphas[1:], layer.experts[1:]):
        weight = weight + alpha * expert.data
    return weight, alphas


def _fold_layer_node(layer: ExpertLayer, embedding: Tensor) -> tuple[Tensor, list[Tensor]]:
    """Graph-recorded fold, same op order as :func:`fold_layer`."""
    alpha_nodes = [_controller_alpha_node(ctrl, embedding) for ctrl in layer.controllers]
    weight = alpha_nodes[0] * layer.experts[0]
    for alpha, expert in zip(alpha_nodes[1:], layer.experts[1:]):
        weight = weight + alpha * expert
    return weight, alpha_nodes


def embedding_fingerprint(vector: np.ndarray) -> str:
    vector = np.ascontiguousarray(vector)
    digest = hashlib.sha256()
    digest.update(str(vector.dtype).encode())
    digest.update(str(vector.shape).encode())
    digest.update(vector.tobytes())
    return digest.hexdigest()


# -- networks ------------------------------------------------------------------

class DynamicNetwork:
    """Ordered layers, dynamic in the conv backbone and static in the head."""

    def __init__(self, layers: list, embed_dim: int, arch: ArchSpec, k: int):
        ks = {layer.k for layer in layers if isinstance(layer, ExpertLayer)}
        if ks and ks != {k}:
            raise ValueError(f"all dynamic layers must share expansion factor {k}, got {ks}")
        self.layers = layers
        self.embed_dim = embed_dim
        self.arch = arch
        self.k = k

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def dynamic_layers(self) -> list[ExpertLayer]:
        return [l for l in self.layers if isinstance(l, ExpertLayer)]

    @property
    def total_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    @property
    def inference_params(self) -> int:
        n = 0
        for layer in self.layers:
            if isinstance(layer, ExpertLayer):
                n += layer.experts[0].data.size + layer.bias.data.size
            else:
                n += layer.weight.data.size + layer.bias.data.size
        return n

    def forward_dynamic(self, embedding: np.ndarray, x) -> Tensor:
        """Fold on the fly and run; identical math to fold-then-forward."""
        embedding = np.asarray(embedding, dtype=float_dtype())
        if not np.isfinite(embedding).all():
            raise ValueError("embedding has non-finite entries")
        emb_node = Tensor(embedding)
        out = x if isinstance(x, Tensor) else Tensor(x)
        for layer in self.layers:
            if isinstance(layer, ExpertLayer):
                weight, _ = _fold_layer_node(layer, emb_node)
                out = _run_layer_graph(layer.kind, out, weight, layer.bias,
                                       layer.stride, layer.pad, layer.act)
            else:
                out = _run_layer_graph(layer.kind, out, layer.weight, layer.bias,
                                       layer.stride, layer.pad, layer.act)
        return out


class StaticNetwork:
    """The baseline: same architecture, one weight per layer."""

    def __init__(self, layers: list[StaticLayer], arch: ArchSpec):
        self.layers = layers
        self.arch = arch

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    @property
    def total_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    inference_params = total_params

    def forward(self, x) -> Tensor:
        out = x if isinstance(x, Tensor) else Tensor(x)
        for layer in self.layers:
            out = _run_layer_graph(layer.kind, out, layer.weight, layer.bias,
                                   layer.stride, layer.pad, layer.act)
        return out

    def forward_raw(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=float_dtype())
        for layer in self.layers:
            out = _run_layer_raw(layer.kind, out, layer.weight.data, layer.bias.data,
                                 layer.stride, layer.pad, layer.act)
        return out


@dataclass(frozen=True)
class FoldProvenance:
    domain_id: int | None
    fingerprint: str


class _FoldedLayer:
    __slots__ = ("kind", "weight", "bias", "stride", "pad", "act")

    def __init__(self, kind, weight, bias, stride, pad, act):
        weight = np.asarray(weight).copy()
        bias = np.asarray(bias).copy()
        weight.flags.writeable = False
        bias.flags.writeable = False
        self.kind = kind
        self.weight = weight
        self.bias = bias
        self.stride = stride
        self.pad = pad
        self.act = act


class FoldedNetwork:
    """Immutable static snapshot of a dynamic network for one domain."""

    def __init__(self, layers: list[_FoldedLayer], provenance: FoldProvenance,
                 alphas: list[list[float]], arch: ArchSpec):
        self.layers = layers
        self.provenance = provenance
        self.alphas = alphas
        self.arch = arch

    @property
    def total_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=float_dtype())
        for layer in self.layers:
            out = _run_layer_raw(layer.kind, out, layer.weight, layer.bias,
                                 layer.stride, layer.pad, layer.act)
        return out


def fold_network(net: DynamicNetwork, embedding: np.ndarray,
                 domain_id: int | None = None) -> FoldedNetwork:
    """Materialize every dynamic layer at this embedding; static layers are copied."""
    embedding = np.asarray(embedding, dtype=float_dtype())
    if not np.isfinite(embedding).all():
        raise ValueError("embedding has non-finite entries")
    folded: list[_FoldedLayer] = []
    alpha_record: list[list[float]] = []
    for layer in net.layers:
        if isinstance(layer, ExpertLayer):
            weight, alphas = fold_layer(layer, embedding)
            alpha_record.append(alphas)
            folded.append(_FoldedLayer(layer.kind, weight, layer.bias.data,
                                       layer.stride, layer.pad, layer.act))
        else:
            folded.append(_FoldedLayer(layer.kind, layer.weight.data, layer.bias.data,
                                       layer.stride, layer.pad, layer.act))
    provenance = FoldProvenance(domain_id=domain_id,
                                fingerprint=embedding_fingerprint(embedding))
    return FoldedNetwork(folded, provenance, alpha_record, net.arch)


def export_factor_vector(net: DynamicNetwork, conditioning: np.ndarray) -> np.ndarray:
    """All combination factors, layer order then expert order.

    ``conditioning`` may be a domain embedding or a single image's feature
    vector; both are d-dimensional inputs to the controllers.
    """
    factors: list[float] = []
    for layer in net.dynamic_layers():
        for ctrl in layer.controllers:
            factors.append(controller_alpha(ctrl, conditioning))
    return np.asarray(factors)


# -- builders --------------------------------------------------------------------

def _head_layers(arch: ArchSpec, rng: np.random.Generator) -> list[StaticLayer]:
    _, feat = arch.feature_shape()
    dense1 = StaticLayer(
        "dense",
        Parameter(he_uniform((arch.hidden, feat), feat, rng)),
        Parameter(np.zeros(arch.hidden)),
        act=RELU,
    )
    dense2 = StaticLayer(
        "dense",
        Parameter(he_uniform((arch.classes, arch.hidden), arch.hidden, rng)),
        Parameter(np.zeros(arch.classes)),
        act=IDENTITY,
    )
    return [dense1, dense2]


def build_static_network(arch: ArchSpec = DEFAULT_ARCH, seed: int = 0) -> StaticNetwork:
    rng = np.random.default_rng(seed)
    layers: list[StaticLayer] = []
    cin = arch.in_channels
    for conv in arch.convs:
        fan_in = cin * conv.kernel * conv.kernel
        layers.append(StaticLayer(
            "conv",
            Parameter(he_uniform((conv.out_channels, cin, conv.kernel, conv.kernel),
                                 fan_in, rng)),
            Parameter(np.zeros(conv.out_channels)),
            stride=conv.stride, pad=conv.pad, act=RELU,
        ))
        cin = conv.out_channels
    return StaticNetwork(layers + _head_layers(arch, rng), arch)


def build_dynamic_network(arch: ArchSpec = DEFAULT_ARCH, k: int = 2,
                          embed_dim: int = 32, seed: int = 0) -> DynamicNetwork:
    """K experts per backbone conv layer; controllers start at alpha = 0.5."""
    if k < 1:
        raise ValueError(f"expansion factor must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    layers: list = []
    cin = arch.in_channels
    for conv in arch.convs:
        fan_in = cin * conv.kernel * conv.kernel
        experts = [
            Parameter(he_uniform((conv.out_channels, cin, conv.kernel, conv.kernel),
                                 fan_in, rng))
            for _ in range(k)
        ]
        controllers = [
            ControllerParams(weight=Parameter(np.zeros(embed_dim)),
                             bias=Parameter(np.zeros(())))
            for _ in range(k)
        ]
        layers.append(ExpertLayer("conv", experts, Parameter(np.zeros(conv.out_channels)),
                                  controllers, stride=conv.stride, pad=conv.pad, act=RELU))
        cin = conv.out_channels
    return DynamicNetwork(layers + _head_layers(arch, rng), embed_dim, arch, k)
