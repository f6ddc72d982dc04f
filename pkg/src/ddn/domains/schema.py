"""Attribute schemas and attribute-based domain partitions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered environmental attributes and their allowed values."""

    attributes: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names in schema: {names}")
        for name, values in self.attributes:
            if not values:
                raise ValueError(f"attribute {name!r} has no allowed values")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    def values(self, name: str) -> tuple[str, ...]:
        for attr, vals in self.attributes:
            if attr == name:
                return vals
        raise KeyError(f"unknown attribute {name!r}; schema has {self.names}")

    @property
    def domain_count(self) -> int:
        n = 1
        for _, values in self.attributes:
            n *= len(values)
        return n

    def validate_attrs(self, attrs: dict[str, str]) -> None:
        for name, values in self.attributes:
            if name not in attrs:
                raise ValueError(f"sample missing attribute {name!r}")
            if attrs[name] not in values:
                raise ValueError(f"attribute {name}={attrs[name]!r} not in {values}")

    def to_json(self) -> list:
        return [[name, list(values)] for name, values in self.attributes]

    @classmethod
    def from_json(cls, data: list) -> "AttributeSchema":
        return cls(tuple((name, tuple(values)) for name, values in data))


DEFAULT_SCHEMA = AttributeSchema((
    ("time", ("day", "night")),
    ("weather", ("clear", "fog", "rain")),
    ("scene", ("plain", "textured")),
))


@dataclass
class SampleRecord:
    """One image with its class label and environmental attributes."""

    image: np.ndarray  # (3, 32, 32), values in [0, 1]
    label: int
    attrs: dict[str, str]


@dataclass
class DomainGroup:
    tau: int
    attrs: tuple[str, ...]  # key-attribute values, schema order
    indices: list[int]


@dataclass
class DomainPartition:
    """Disjoint, exhaustive grouping of sample indices by key-attribute tuple.

    Domain ids are assigned by lexicographic order of the occurring value
    tuples, so the numbering is stable across runs for the same data.
    """

    key_attrs: tuple[str, ...]
    groups: dict[int, DomainGroup] = field(default_factory=dict)

    @property
    def domain_count(self) -> int:
        return len(self.groups)

    def group_sizes(self) -> dict[int, int]:
        return {tau: len(g.indices) for tau, g in self.groups.items()}

    def tau_for_attrs(self, attrs: dict[str, str]) -> int:
        key = tuple(attrs[a] for a in self.key_attrs)
        for tau, group in self.groups.items():
            if group.attrs == key:
                return tau
        raise KeyError(f"no domain for attribute tuple {key}")


def partition(samples: list[SampleRecord], key_attrs,
              schema: AttributeSchema = DEFAULT_SCHEMA) -> DomainPartition:
    """Group samples by their values of ``key_attrs`` (schema-ordered subset)."""
    key_attrs = set(key_attrs)
    unknown = key_attrs - set(schema.names)
    if unknown:
        raise KeyError(f"unknown attribute(s) {sorted(unknown)}; schema has {schema.names}")
    ordered_keys = tuple(n for n in schema.names if n in key_attrs)

    by_tuple: dict[tuple[str, ...], list[int]] = {}
    for idx, sample in enumerate(samples):
        key = tuple(sample.attrs[a] for a in ordered_keys)
        by_tuple.setdefault(key, []).append(idx)

    part = DomainPartition(key_attrs=ordered_keys)
    for tau, key in enumerate(sorted(by_tuple)):
        part.groups[tau] = DomainGroup(tau=tau, attrs=key, indices=by_tuple[key])
    return part


def regroup(train_keys, eval_keys, samples: list[SampleRecord],
            schema: AttributeSchema = DEFAULT_SCHEMA) -> DomainPartition:
    """Partition evaluation data under ``eval_keys``, independent of the training split."""
    partition(samples[:0], train_keys, schema)  # validates the training keys
    return partition(samples, eval_keys, schema)


@dataclass
class DomainEmbedding:
    """Mean encoder feature over a domain's images.

    For very small domains (the synthetic benchmark allows groups of 2)
    the mean is computed normally and is simply a high-variance statistic.
    """

    vector: np.ndarray  # (d,)
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"embedding count must be >= 1, got {self.count}")
        if not np.isfinite(self.vector).all():
            raise ValueError("embedding vector has non-finite entries")
