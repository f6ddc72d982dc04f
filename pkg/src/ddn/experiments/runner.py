"""End-to-end experiment driver: data prep, training, evaluation, ablations."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import (
    build_model_pool,
    pool_infer,
    save_pool,
    sdn_forward_batch,
    train_sdn,
    train_static,
)
from ..domains import (
    DEFAULT_SCHEMA,
    DatasetConfig,
    DomainEmbedding,
    DomainPartition,
    SampleRecord,
    compute_domain_embeddings,
    encode_batch,
    generate_dataset,
    partition,
    save_dataset,
    shuffle_embeddings,
)
from ..dynnet import (
    DynamicNetwork,
    StaticNetwork,
    build_dynamic_network,
    fold_network,
    load_checkpoint,
    save_checkpoint,
    train_ddn,
)
from ..numerics import no_grad
from .config import ExperimentConfig
from .metrics import MetricsRecord

MODEL_KINDS = ("static", "pool", "ddn", "sdn")


@dataclass
class DataBundle:
    train_samples: list[SampleRecord]
    eval_samples: list[SampleRecord]
    train_part: DomainPartition
    eval_part: DomainPartition
    train_embeddings: dict[int, DomainEmbedding]
    eval_embeddings: dict[int, DomainEmbedding]
    schema: object = DEFAULT_SCHEMA
    _train_images: np.ndarray | None = field(default=None, repr=False)
    _eval_images: np.ndarray | None = field(default=None, repr=False)

    @property
    def train_images(self) -> np.ndarray:
        if self._train_images is None:
            self._train_images = np.stack([s.image for s in self.train_samples])
        return self._train_images

    @property
    def eval_images(self) -> np.ndarray:
        if self._eval_images is None:
            self._eval_images = np.stack([s.image for s in self.eval_samples])
        return self._eval_images


def prepare_data(config: ExperimentConfig) -> DataBundle:
    """Generate train/eval splits and the fixed per-domain embeddings.

    Training embeddings come from the training split and stay fixed during
    training; evaluation embeddings are re-estimated from the evaluation
    split's groups, mirroring deployment where the domain representation
    is always collected from the data actually seen.
    """
    data_seed = config.effective_data_seed
    train_cfg = DatasetConfig.uniform(config.classes, config.per_domain_train,
                                      seed=data_seed)
    eval_cfg = DatasetConfig.uniform(config.classes, config.per_domain_eval,
                                     seed=data_seed + 1)
    train_samples = generate_dataset(train_cfg)
    eval_samples = generate_dataset(eval_cfg)
    train_part = partition(train_samples, config.train_keys)
    eval_part = partition(eval_samples, config.train_keys)
    return DataBundle(
        train_samples=train_samples,
        eval_samples=eval_samples,
        train_part=train_part,
        eval_part=eval_part,
        train_embeddings=compute_domain_embeddings(train_part, train_samples),
        eval_embeddings=compute_domain_embeddings(eval_part, eval_samples),
    )


# -- evaluation ------------------------------------------------------------------

def _batched_predictions(forward_raw, images: np.ndarray, batch: int = 256) -> np.ndarray:
    preds = []
    for start in range(0, len(images), batch):
        preds.append(forward_raw(images[start:start + batch]).argmax(axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def _per_domain_table(part: DomainPartition, correct: np.ndarray) -> dict[int, dict]:
    table = {}
    for tau in sorted(part.groups):
        group = part.groups[tau]
        idx = np.asarray(group.indices)
        table[tau] = {
            "attrs": list(group.attrs),
            "count": len(idx),
            "accuracy": float(correct[idx].mean()) if len(idx) else 0.0,
        }
    return table


def eval_static_like(forward_raw, samples: list[SampleRecord], images: np.ndarray,
                     part: DomainPartition) -> tuple[float, dict[int, dict]]:
    labels = np.array([s.label for s in samples])
    with no_grad():
        preds = _batched_predictions(forward_raw, images)
    correct = (preds == labels).astype(np.float64)
    return float(correct.mean()), _per_domain_table(part, correct)


def eval_ddn_grouped(net: DynamicNetwork, samples: list[SampleRecord],
                     images: np.ndarray, part: DomainPartition,
                     embeddings: dict[int, DomainEmbedding],
                     ) -> tuple[float, dict[int, dict], int]:
    """Fold once per group and evaluate members; returns the fold count."""
    labels = np.array([s.label for s in samples])
    correct = np.zeros(len(samples))
    folds = 0
    with no_grad():
        for tau in sorted(part.groups):
            idx = np.asarray(part.groups[tau].indices)
            if len(idx) == 0:
                continue
            folded = fold_network(net, embeddings[tau].vector, domain_id=tau)
            folds += 1
            preds = _batched_predictions(folded.forward, images[idx])
            correct[idx] = (preds == labels[idx]).astype(np.float64)
    return float(correct.mean()), _per_domain_table(part, correct), folds


def eval_sdn(net: DynamicNetwork, samples: list[SampleRecord], images: np.ndarray,
             part: DomainPartition) -> tuple[float, dict[int, dict]]:
    labels = np.array([s.label for s in samples])
    with no_grad():
        features = encode_batch(images)
        logits = sdn_forward_batch(net, images, features=features)
    correct = (logits.argmax(axis=1) == labels).astype(np.float64)
    return float(correct.mean()), _per_domain_table(part, correct)


def eval_pool(pool, samples: list[SampleRecord], images: np.ndarray,
              eval_part: DomainPartition, train_part: DomainPartition,
              ) -> tuple[float, dict[int, dict]]:
    """Route each eval group to the pool entry with matching attributes."""
    labels = np.array([s.label for s in samples])
    by_attrs = {train_part.groups[t].attrs: t for t in train_part.groups}
    correct = np.zeros(len(samples))
    with no_grad():
        for tau in sorted(eval_part.groups):
            group = eval_part.groups[tau]
            idx = np.asarray(group.indices)
            if len(idx) == 0:
                continue
            train_tau = by_attrs.get(group.attrs)
            if train_tau is None:
                preds = _batched_predictions(pool.base.forward_raw, images[idx])
            else:
                preds = _batched_predictions(
                    lambda x, t=train_tau: pool_infer(pool, t, x), images[idx])
            correct[idx] = (preds == labels[idx]).astype(np.float64)
    return float(correct.mean()), _per_domain_table(eval_part, correct)


# -- experiment driver --------------------------------------------------------------

def _check_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    try:
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        raise ValueError(f"output directory {out_dir} is not writable: {exc}") from exc


def run_experiment(config: ExperimentConfig, models=("static", "ddn"),
                   bundle: DataBundle | None = None,
                   persist: bool = True) -> dict[str, MetricsRecord]:
    """Train the requested model kinds on the synthetic benchmark and evaluate.

    Persists (under ``config.output_dir``) the dataset manifests, one
    checkpoint per model, and one metrics JSON per model, so every metric
    is recomputable from the artifacts alone.
    """
    for kind in models:
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    out_dir = Path(config.output_dir)
    if persist:
        _check_writable(out_dir)

    if bundle is None:
        bundle = prepare_data(config)
    if persist:
        save_dataset(bundle.train_samples, DEFAULT_SCHEMA, out_dir / "dataset" / "train")
        save_dataset(bundle.eval_samples, DEFAULT_SCHEMA, out_dir / "dataset" / "eval")
        config.save(out_dir / "config.json")

    records: dict[str, MetricsRecord] = {}
    train_cfg = config.train_config()
    for kind in models:
        run_id = f"{kind}-k{config.k}-seed{config.seed}" if kind in ("ddn", "sdn") \
            else f"{kind}-seed{config.seed}"
        start = time.perf_counter()
        if kind == "static":
            net, history = train_static(bundle.train_samples, train_cfg,
                                        arch=config.arch)
            val_acc, table = eval_static_like(net.forward_raw, bundle.eval_samples,
                                              bundle.eval_images, bundle.eval_part)
            train_acc, _ = eval_static_like(net.forward_raw, bundle.train_samples,
                                            bundle.train_images, bundle.train_part)
            params_total = params_inf = net.total_params
            if persist:
                save_checkpoint(net, out_dir / f"{run_id}.ddn")
        elif kind == "pool":
            base, history = train_static(bundle.train_samples, train_cfg,
                                         arch=config.arch)
            pool = build_model_pool(base, bundle.train_samples, bundle.train_part,
                                    train_cfg, config.finetune)
            val_acc, table = eval_pool(pool, bundle.eval_samples, bundle.eval_images,
                                       bundle.eval_part, bundle.train_part)
            train_acc, _ = eval_pool(pool, bundle.train_samples, bundle.train_images,
                                     bundle.train_part, bundle.train_part)
            params_total = pool.total_params
            params_inf = pool.inference_params
            if persist:
                save_pool(pool, out_dir / f"{run_id}")
        elif kind == "ddn":
            net = build_dynamic_network(config.arch, k=config.k,
                                        embed_dim=config.embed_dim, seed=config.seed)
            history = train_ddn(net, bundle.train_samples, bundle.train_part,
                                bundle.train_embeddings, train_cfg)
            val_acc, table, _ = eval_ddn_grouped(net, bundle.eval_samples,
                                                 bundle.eval_images, bundle.eval_part,
                                                 bundle.eval_embeddings)
            train_acc, _, _ = eval_ddn_grouped(net, bundle.train_samples,
                                               bundle.train_images, bundle.train_part,
                                               bundle.train_embeddings)
            params_total = net.total_params
            params_inf = net.inference_params
            if persist:
                save_checkpoint(net, out_dir / f"{run_id}.ddn")
        else:  # sdn
            net = build_dynamic_network(config.arch, k=config.k,
                                        embed_dim=config.embed_dim, seed=config.seed)
            history = train_sdn(net, bundle.train_samples, train_cfg)
            val_acc, table = eval_sdn(net, bundle.eval_samples, bundle.eval_images,
                                      bundle.eval_part)
            train_acc, _ = eval_sdn(net, bundle.train_samples, bundle.train_images,
                                    bundle.train_part)
            params_total = net.total_params
            params_inf = net.inference_params
            if persist:
                save_checkpoint(net, out_dir / f"{run_id}.ddn")

        record = MetricsRecord(
            run_id=run_id,
            model_kind=kind,
            train_accuracy=train_acc,
            val_accuracy=val_acc,
            per_domain=table,
            params_total=params_total,
            params_inference=params_inf,
            wall_clock_sec=time.perf_counter() - start,
            extra={"k": config.k, "steps": config.steps,
                   "final_loss": history.final_loss},
        )
        record.validate()
        records[kind] = record
        if persist:
            record.save(out_dir / f"{run_id}-metrics.json")
    return records


def recompute_metrics(run_dir: str | Path, run_id: str) -> MetricsRecord:
    """Re-evaluate a persisted checkpoint against the persisted dataset."""
    from ..domains import load_dataset

    run_dir = Path(run_dir)
    config = ExperimentConfig.load(run_dir / "config.json")
    eval_samples, _ = load_dataset(run_dir / "dataset" / "eval")
    eval_part = partition(eval_samples, config.train_keys)
    eval_images = np.stack([s.image for s in eval_samples])
    net = load_checkpoint(run_dir / f"{run_id}.ddn")
    if isinstance(net, DynamicNetwork):
        embeddings = compute_domain_embeddings(eval_part, eval_samples)
        val_acc, table, _ = eval_ddn_grouped(net, eval_samples, eval_images,
                                             eval_part, embeddings)
    else:
        val_acc, table = eval_static_like(net.forward_raw, eval_samples,
                                          eval_images, eval_part)
    kind = run_id.split("-")[0]
    return MetricsRecord(run_id=run_id, model_kind=kind, train_accuracy=float("nan"),
                         val_accuracy=val_acc, per_domain=table)


# -- ablations ------------------------------------------------------------------------

@dataclass
class ShuffleResult:
    normal: float
    worst: float
    average: float
    shuffled: list[float]

    def to_json(self) -> dict:
        return {"normal": self.normal, "worst": self.worst,
                "average": self.average, "shuffled": self.shuffled}


def eval_shuffle(net: DynamicNetwork, samples: list[SampleRecord],
                 part: DomainPartition, embeddings: dict[int, DomainEmbedding],
                 n_shuffles: int = 20, seed: int = 0) -> ShuffleResult:
    """Accuracy with correct embeddings vs randomly reassigned ones.

    Shuffles permute embeddings only among the domains present in the
    evaluation partition; identity permutations are allowed draws.
    """
    if part.domain_count < 2:
        raise ValueError("shuffle evaluation needs at least 2 domains")
    images = np.stack([s.image for s in samples])
    normal, _, _ = eval_ddn_grouped(net, samples, images, part, embeddings)
    shuffled_accs = []
    for i in range(n_shuffles):
        permuted = shuffle_embeddings(embeddings, seed=seed + i)
        acc, _, _ = eval_ddn_grouped(net, samples, images, part, permuted)
        shuffled_accs.append(acc)
    return ShuffleResult(
        normal=normal,
        worst=float(min(shuffled_accs)),
        average=float(np.mean(shuffled_accs)),
        shuffled=shuffled_accs,
    )


@dataclass
class MismatchResult:
    matched: float
    mismatched: float
    reference: float
    reference_folds: int

    def to_json(self) -> dict:
        return {"matched": self.matched, "mismatched": self.mismatched,
                "reference": self.reference, "reference_folds": self.reference_folds}


def eval_mismatch(net: DynamicNetwork, samples: list[SampleRecord],
                  train_keys, eval_keys, schema=DEFAULT_SCHEMA) -> MismatchResult:
    """Evaluate under the training grouping, a different grouping, and a
    single whole-set embedding (the reference, which folds exactly once)."""
    images = np.stack([s.image for s in samples])

    def grouped_accuracy(keys):
        part_k = partition(samples, keys, schema)
        embeddings = compute_domain_embeddings(part_k, samples)
        acc, _, folds = eval_ddn_grouped(net, samples, images, part_k, embeddings)
        return acc, folds

    matched, _ = grouped_accuracy(train_keys)
    mismatched, _ = grouped_accuracy(eval_keys)
    reference, ref_folds = grouped_accuracy([])
    return MismatchResult(matched=matched, mismatched=mismatched,
                          reference=reference, reference_folds=ref_folds)
