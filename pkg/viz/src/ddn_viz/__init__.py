"""Offline plotting for exported combination-factor CSVs."""

from .plots import plot_factor_lines, plot_tsne
from .table import FactorTable, FactorTableError, load_factor_table, top_variance_indices

__version__ = "0.1.0"

__all__ = [
    "FactorTable",
    "FactorTableError",
    "load_factor_table",
    "plot_factor_lines",
    "plot_tsne",
    "top_variance_indices",
]
