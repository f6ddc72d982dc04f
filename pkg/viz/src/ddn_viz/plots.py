"""Figure rendering: factor-line plots and t-SNE projections."""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from sklearn.manifold import TSNE

from .table import FactorTable, FactorTableError, top_variance_indices


def _content_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _save_png(fig, out_path: str | Path, source_csv: str | Path | None) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {}
    if source_csv is not None:
        metadata["Source-CSV-SHA256"] = _content_hash(source_csv)
    fig.savefig(out_path, format="png", dpi=130, metadata=metadata)
    plt.close(fig)
    return out_path


def plot_factor_lines(table: FactorTable, top_k: int, out_path: str | Path,
                      source_csv: str | Path | None = None) -> tuple[Path, np.ndarray]:
    """One line per domain row over the top_k highest-variance factors.

    Returns the written path and the selected column indices (descending
    variance, ties by index).
    """
    if table.n_rows < 2:
        raise FactorTableError(f"need at least 2 domain rows to plot, got {table.n_rows}")
    selected = top_variance_indices(table.factors, top_k)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    xs = np.arange(len(selected))
    for row in range(table.n_rows):
        ax.plot(xs, table.factors[row, selected], marker="o", markersize=3,
                linewidth=1.2, label=table.label_for_row(row))
    ax.set_xticks(xs)
    ax.set_xticklabels([str(i + 1) for i in selected], fontsize=7, rotation=60)
    ax.set_xlabel("factor index (sorted by variance across domains)")
    ax.set_ylabel("combination factor")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return _save_png(fig, out_path, source_csv), selected


def plot_tsne(table: FactorTable, out_path: str | Path, coords_out: str | Path,
              color_by: str | None = None, perplexity: float = 30.0,
              seed: int = 0, source_csv: str | Path | None = None,
              ) -> tuple[Path, Path, np.ndarray]:
    """2-D t-SNE of per-image factor vectors; coordinates also written as CSV.

    Perplexity is clamped to rows/4 (and must stay below the row count).
    The exact-gradient solver keeps runs reproducible for a fixed seed.
    """
    if table.n_rows < 10:
        raise FactorTableError(f"need at least 10 rows for t-SNE, got {table.n_rows}")
    perplexity = min(perplexity, table.n_rows / 4)
    if perplexity >= table.n_rows:
        raise FactorTableError(
            f"perplexity {perplexity} must be below the row count {table.n_rows}")
    method = "exact" if table.n_rows <= 1500 else "barnes_hut"
    tsne = TSNE(n_components=2, perplexity=perplexity, random_state=seed,
                max_iter=1000, init="pca", method=method)
    coords = tsne.fit_transform(table.factors)

    labels = table.attr_column(color_by) if color_by else [""] * table.n_rows
    unique = sorted(set(labels))
    cmap = plt.colormaps["tab10"]
    fig, ax = plt.subplots(figsize=(6.5, 6))
    for i, value in enumerate(unique):
        mask = np.array([lab == value for lab in labels])
        ax.scatter(coords[mask, 0], coords[mask, 1], s=14,
                   color=cmap(i % 10), label=value or None, alpha=0.8)
    if color_by:
        ax.legend(title=color_by, fontsize=8)
    ax.set_xlabel("t-SNE 1")
    ax.set_ylabel("t-SNE 2")
    fig.tight_layout()
    png = _save_png(fig, out_path, source_csv)

    coords_out = Path(coords_out)
    coords_out.parent.mkdir(parents=True, exist_ok=True)
    with open(coords_out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *(["label"] if color_by else []), "x", "y"])
        for row in range(table.n_rows):
            cells = [table.ids[row]]
            if color_by:
                cells.append(labels[row])
            cells.extend([repr(float(coords[row, 0])), repr(float(coords[row, 1]))])
            writer.writerow(cells)
    return png, coords_out, coords
