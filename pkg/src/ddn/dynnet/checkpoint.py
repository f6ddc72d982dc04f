"""Binary model checkpoints: magic "DDN1", JSON header, little-endian f64 blobs.

Parameter blobs are written in the network's canonical parameter order,
so a save/load round trip is bit-exact (f32 values round trip losslessly
through the f64 storage).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..numerics.tensor import float_dtype
from .network import (
    ArchSpec,
    DynamicNetwork,
    ExpertLayer,
    StaticNetwork,
    build_dynamic_network,
    build_static_network,
)

MAGIC = b"DDN1"


def _layer_table(net) -> list[dict]:
    table = []
    for layer in net.layers:
        entry = {
            "kind": layer.kind,
            "stride": layer.stride,
            "pad": layer.pad,
            "act": layer.act.value,
            "dynamic": isinstance(layer, ExpertLayer),
        }
        if entry["dynamic"]:
            entry["experts"] = layer.k
            entry["weight_shape"] = list(layer.experts[0].data.shape)
        else:
            entry["weight_shape"] = list(layer.weight.data.shape)
        table.append(entry)
    return table


def save_checkpoint(net: StaticNetwork | DynamicNetwork, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(net, DynamicNetwork):
        header = {"kind": "dynamic", "k": net.k, "d": net.embed_dim}
    else:
        header = {"kind": "static", "k": 1, "d": 0}
    header["arch"] = net.arch.to_json()
    header["layers"] = _layer_table(net)
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for param in net.parameters():
            fh.write(np.ascontiguousarray(param.data, dtype="<f8").tobytes())
    return path


def load_checkpoint(path: str | Path) -> StaticNetwork | DynamicNetwork:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path} is not a model checkpoint (magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()

    arch = ArchSpec.from_json(header["arch"])
    if header["kind"] == "dynamic":
        net = build_dynamic_network(arch, k=header["k"], embed_dim=header["d"], seed=0)
    else:
        net = build_static_network(arch, seed=0)

    values = np.frombuffer(payload, dtype="<f8")
    cursor = 0
    for param in net.parameters():
        n = param.data.size
        if cursor + n > values.size:
            raise ValueError(f"checkpoint {path} truncated: ran out of parameter data")
        param.data = values[cursor:cursor + n].astype(float_dtype()).reshape(param.data.shape)
        param.grad = np.zeros_like(param.data)
        cursor += n
    if cursor != values.size:
        raise ValueError(
            f"checkpoint {path} has {values.size - cursor} unexpected trailing values"
        )
    return net


def clone_network(net: StaticNetwork) -> StaticNetwork:
    """Independent copy sharing no buffers; velocities carry over (no momentum reset)."""
    clone = build_static_network(net.arch, seed=0)
    for dst, src in zip(clone.parameters(), net.parameters()):
        dst.data = src.data.copy()
        dst.grad = np.zeros_like(src.data)
        dst._velocity = None if src._velocity is None else src._velocity.copy()
    return clone
