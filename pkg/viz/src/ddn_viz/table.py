"""Parsing and validation of exported factor CSVs.

Expected layout: an ``id`` column, any number of attribute columns, then
``alpha_1..alpha_L`` factor columns with values strictly inside (0, 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FactorTableError(ValueError):
    """Malformed factor CSV; message carries row/column diagnostics."""


@dataclass
class FactorTable:
    ids: list[str]
    attr_names: list[str]
    attrs: list[tuple[str, ...]]      # one tuple per row, aligned with attr_names
    factors: np.ndarray               # (rows, L)

    @property
    def n_rows(self) -> int:
        return len(self.ids)

    @property
    def n_factors(self) -> int:
        return self.factors.shape[1]

    def label_for_row(self, row: int) -> str:
        return "/".join(self.attrs[row]) if self.attrs[row] else str(self.ids[row])

    def attr_column(self, name: str) -> list[str]:
        try:
            pos = self.attr_names.index(name)
        except ValueError:
            raise FactorTableError(
                f"no attribute column {name!r}; available: {self.attr_names}"
            ) from None
        return [row[pos] for row in self.attrs]


def load_factor_table(path: str | Path) -> FactorTable:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FactorTableError(f"{path}: empty file") from None
        rows = list(reader)

    if not header or header[0] != "id":
        raise FactorTableError(f"{path}: first column must be 'id', got {header[:1]}")
    first_alpha = next((i for i, name in enumerate(header)
                        if name.startswith("alpha_")), None)
    if first_alpha is None:
        raise FactorTableError(f"{path}: no alpha_* factor columns in header {header}")
    attr_names = header[1:first_alpha]
    factor_names = header[first_alpha:]
    for i, name in enumerate(factor_names):
        if name != f"alpha_{i + 1}":
            raise FactorTableError(
                f"{path}: factor columns must be alpha_1..alpha_L in order; "
                f"column {first_alpha + i} is {name!r}"
            )

    ids, attrs, factor_rows = [], [], []
    for row_idx, row in enumerate(rows, start=2):  # header is line 1
        if len(row) != len(header):
            raise FactorTableError(
                f"{path}: line {row_idx} has {len(row)} cells, expected {len(header)}"
            )
        ids.append(row[0])
        attrs.append(tuple(row[1:first_alpha]))
        try:
            values = [float(cell) for cell in row[first_alpha:]]
        except ValueError as exc:
            raise FactorTableError(f"{path}: line {row_idx}: {exc}") from None
        for col_off, value in enumerate(values):
            if not 0.0 < value < 1.0:
                raise FactorTableError(
                    f"{path}: line {row_idx}, column {factor_names[col_off]}: "
                    f"factor {value} outside (0, 1)"
                )
        factor_rows.append(values)

    if not factor_rows:
        raise FactorTableError(f"{path}: no data rows")
    return FactorTable(ids=ids, attr_names=attr_names, attrs=attrs,
                       factors=np.asarray(factor_rows))


def top_variance_indices(factors: np.ndarray, top_k: int) -> np.ndarray:
    """Column indices of the top_k highest-variance factors, descending.

    Ties (including the all-degenerate zero-variance case) fall back to
    index order, so the selection is always deterministic.
    """
    top_k = min(top_k, factors.shape[1])
    variances = factors.var(axis=0)
    order = np.lexsort((np.arange(len(variances)), -variances))
    return order[:top_k]
