"""Model pool: one finetuned specialist per sufficiently large domain."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..domains.schema import DomainGroup, DomainPartition, SampleRecord
from ..dynnet.checkpoint import clone_network, load_checkpoint, save_checkpoint
from ..dynnet.network import StaticNetwork
from ..dynnet.training import TrainConfig, run_training, stack_images
from ..numerics import Tensor, softmax_cross_entropy

MIN_FINETUNE_SIZE = 16


@dataclass
class FinetuneConfig:
    """One shared recipe for every domain; velocities carry over from the base."""

    steps: int = 200
    lr_scale: float = 0.1
    min_domain_size: int = MIN_FINETUNE_SIZE


@dataclass
class ModelPool:
    """Base network plus per-domain specialists; None marks "uses base"."""

    base: StaticNetwork
    specialized: dict[int, StaticNetwork | None] = field(default_factory=dict)
    attrs: dict[int, tuple[str, ...]] = field(default_factory=dict)

    @property
    def stored_count(self) -> int:
        n = sum(1 for net in self.specialized.values() if net is not None)
        if any(net is None for net in self.specialized.values()) or n == 0:
            n += 1  # the base itself is stored only if some domain still uses it
        return n

    @property
    def total_params(self) -> int:
        return self.stored_count * self.base.total_params

    @property
    def inference_params(self) -> int:
        return self.base.total_params


def build_model_pool(base: StaticNetwork, samples: list[SampleRecord],
                     part: DomainPartition, cfg: TrainConfig,
                     finetune: FinetuneConfig | None = None) -> ModelPool:
    """Clone and finetune the base per domain with >= min_domain_size samples;
    smaller domains map to the base network unchanged."""
    finetune = finetune or FinetuneConfig()
    images = stack_images(samples)
    labels = np.array([s.label for s in samples])
    pool = ModelPool(base=base)

    for tau in sorted(part.groups):
        group = part.groups[tau]
        pool.attrs[tau] = group.attrs
        if len(group.indices) < finetune.min_domain_size:
            pool.specialized[tau] = None
            continue
        specialist = clone_network(base)
        if finetune.steps > 0:
            sub_cfg = replace(cfg, steps=finetune.steps, lr=cfg.lr * finetune.lr_scale,
                              lr_drop_milestones=(), seed=cfg.seed + tau)
            sub_part = DomainPartition(key_attrs=part.key_attrs,
                                       groups={0: DomainGroup(0, group.attrs,
                                                              list(group.indices))})

            def loss_for_batch(_tau, indices, net=specialist):
                logits = net.forward(Tensor(images[indices]))
                return softmax_cross_entropy(logits, labels[indices])[0]

            run_training(loss_for_batch, sub_part, sub_cfg, specialist.parameters())
        pool.specialized[tau] = specialist
    return pool


def pool_infer(pool: ModelPool, tau: int, x: np.ndarray) -> np.ndarray:
    """Route to the domain's specialist (or the base) and run it."""
    if tau not in pool.specialized:
        raise KeyError(f"unknown domain id {tau}; pool covers {sorted(pool.specialized)}")
    net = pool.specialized[tau] or pool.base
    if x.ndim == 3:
        x = x[None]
    return net.forward_raw(x)


def save_pool(pool: ModelPool, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(pool.base, out_dir / "base.ddn")
    entries = []
    for tau in sorted(pool.specialized):
        net = pool.specialized[tau]
        if net is None:
            checkpoint = "base"
        else:
            checkpoint = f"domain_{tau}.ddn"
            save_checkpoint(net, out_dir / checkpoint)
        entries.append({
            "tau": tau,
            "attrs": list(pool.attrs.get(tau, ())),
            "checkpoint": checkpoint,
        })
    manifest = {"base_checkpoint": "base.ddn", "entries": entries}
    with open(out_dir / "pool.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return out_dir / "pool.json"


def load_pool(path: str | Path) -> ModelPool:
    path = Path(path)
    if path.is_dir():
        path = path / "pool.json"
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = load_checkpoint(path.parent / manifest["base_checkpoint"])
    pool = ModelPool(base=base)
    for entry in manifest["entries"]:
        tau = entry["tau"]
        pool.attrs[tau] = tuple(entry["attrs"])
        if entry["checkpoint"] == "base":
            pool.specialized[tau] = None
        else:
            pool.specialized[tau] = load_checkpoint(path.parent / entry["checkpoint"])
    return pool
