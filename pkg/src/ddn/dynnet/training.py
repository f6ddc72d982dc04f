"""Training loops: domain-sampled SGD through the fold.

One shared loop drives every model kind; only the per-batch loss closure
differs (static forward, domain-embedding fold, or per-sample-feature
fold). Keeping the RNG consumption identical across kinds makes the
degenerate equivalences (K=1 saturated DDN vs static, constant-feature
SDN vs single-domain DDN) exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..domains.schema import DomainEmbedding, DomainPartition, SampleRecord
from ..numerics import Tensor, backward, sgd_step, softmax_cross_entropy, zero_grad
from ..numerics.tensor import float_dtype
from .network import DynamicNetwork

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    lr_drop_milestones: tuple[float, ...] = (2 / 3, 8 / 9)
    lr_drop_factor: float = 0.1
    warmup_steps: int = 0
    seed: int = 0
    uniform_domain_sampling: bool = False
    log_every: int = 200

    def lr_at(self, step: int) -> float:
        if self.warmup_steps and step < self.warmup_steps:
            # linear ramp from lr/10; keeps early high-lr steps stable
            frac = step / self.warmup_steps
            return self.lr * (0.1 + 0.9 * frac)
        lr = self.lr
        for milestone in self.lr_drop_milestones:
            if step >= milestone * self.steps:
                lr *= self.lr_drop_factor
        return lr


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    tau: list[int] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.loss[0]

    @property
    def final_loss(self) -> float:
        """Mean of the last 5% of steps; single-step noise is not a trend."""
        tail = max(1, len(self.loss) // 20)
        return float(np.mean(self.loss[-tail:]))


def stack_images(samples: list[SampleRecord]) -> np.ndarray:
    return np.stack([s.image for s in samples]).astype(float_dtype())


def run_training(loss_for_batch, part: DomainPartition, cfg: TrainConfig,
                 params) -> TrainHistory:
    """Shared loop: sample a domain, sample a batch, step.

    ``loss_for_batch(tau, indices)`` returns the scalar loss node.
    Domain sampling is proportional to group size unless
    ``cfg.uniform_domain_sampling`` is set; empty groups are skipped with
    a warning (they can only be drawn under uniform sampling).
    """
    rng = np.random.default_rng(cfg.seed)
    taus = sorted(part.groups)
    sizes = np.array([len(part.groups[t].indices) for t in taus], dtype=np.float64)
    if cfg.uniform_domain_sampling:
        probs = np.full(len(taus), 1.0 / len(taus))
    else:
        if sizes.sum() == 0:
            raise ValueError("cannot train on an all-empty partition")
        probs = sizes / sizes.sum()

    history = TrainHistory()
    for step in range(cfg.steps):
        tau = taus[rng.choice(len(taus), p=probs)]
        group = part.groups[tau]
        if not group.indices:
            logger.warning("sampled empty domain %d at step %d; skipping", tau, step)
            continue
        indices = rng.choice(group.indices, size=cfg.batch_size, replace=True)
        loss = loss_for_batch(tau, indices)
        backward(loss)
        sgd_step(params, lr=cfg.lr_at(step), momentum=cfg.momentum)
        zero_grad(params)
        history.loss.append(loss.item())
        history.tau.append(tau)
        if cfg.log_every and step % cfg.log_every == 0:
            logger.info("step %d loss %.4f (domain %d)", step, history.loss[-1], tau)
    return history


def train_ddn(net: DynamicNetwork, samples: list[SampleRecord], part: DomainPartition,
              embeddings: dict[int, DomainEmbedding], cfg: TrainConfig) -> TrainHistory:
    """Domain-aware training: per step, fold with the sampled domain's fixed
    embedding and update experts and controllers through the fold."""
    for tau, group in part.groups.items():
        if group.indices and tau not in embeddings:
            raise KeyError(f"no embedding precomputed for domain {tau}")
    images = stack_images(samples)
    labels = np.array([s.label for s in samples])

    def loss_for_batch(tau, indices):
        logits = net.forward_dynamic(embeddings[tau].vector, Tensor(images[indices]))
        return softmax_cross_entropy(logits, labels[indices])[0]

    return run_training(loss_for_batch, part, cfg, net.parameters())
