"""Single static network trained on the whole dataset."""

from __future__ import annotations

import numpy as np

from ..domains.schema import DomainGroup, DomainPartition, SampleRecord
from ..dynnet.network import DEFAULT_ARCH, ArchSpec, StaticNetwork, build_static_network
from ..dynnet.training import TrainConfig, TrainHistory, run_training, stack_images
from ..numerics import Tensor, softmax_cross_entropy


def whole_dataset_partition(n: int) -> DomainPartition:
    return DomainPartition(key_attrs=(), groups={0: DomainGroup(0, (), list(range(n)))})


def train_static(samples: list[SampleRecord], cfg: TrainConfig,
                 arch: ArchSpec = DEFAULT_ARCH, net: StaticNetwork | None = None,
                 ) -> tuple[StaticNetwork, TrainHistory]:
    """SGD over the full dataset; architecture matches the folded dynamic net."""
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    if net is None:
        net = build_static_network(arch, seed=cfg.seed)
    images = stack_images(samples)
    labels = np.array([s.label for s in samples])

    def loss_for_batch(tau, indices):
        logits = net.forward(Tensor(images[indices]))
        return softmax_cross_entropy(logits, labels[indices])[0]

    history = run_training(loss_for_batch, whole_dataset_partition(len(samples)),
                           cfg, net.parameters())
    return net, history
