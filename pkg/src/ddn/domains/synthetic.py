"""Synthetic multi-domain image generator.

Classes are parametric glyph shapes rendered onto a scene-dependent
background; environmental attributes apply deterministic corruptions:
time scales brightness (day x1.0, night x0.35), weather applies nothing /
blur / additive rain streaks, scene selects a plain or textured backdrop.
Labels are drawn independently of the attributes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .schema import DEFAULT_SCHEMA, AttributeSchema, SampleRecord

IMAGE_SIZE = 32
NIGHT_BRIGHTNESS = 0.35


@dataclass
class DatasetConfig:
    classes: int = 10
    schema: AttributeSchema = DEFAULT_SCHEMA
    counts: dict[tuple[str, ...], int] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def uniform(cls, classes: int, per_domain: int, seed: int,
                schema: AttributeSchema = DEFAULT_SCHEMA) -> "DatasetConfig":
        counts = {combo: per_domain
                  for combo in itertools.product(*(v for _, v in schema.attributes))}
        return cls(classes=classes, schema=schema, counts=counts, seed=seed)


def _coords(size: int = IMAGE_SIZE):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return ys, xs


_YS, _XS = _coords()


def _glyph_mask(label: int, cy: float, cx: float, r: float, classes: int) -> np.ndarray:
    """Boolean mask of the class glyph; 10 distinct parametric shapes, cycled."""
    dy = _YS - cy
    dx = _XS - cx
    ady, adx = np.abs(dy), np.abs(dx)
    shape = label % 10
    if shape == 0:    # disk
        return dy * dy + dx * dx <= r * r
    if shape == 1:    # ring
        d2 = dy * dy + dx * dx
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    if shape == 2:    # filled square
        return (ady <= r * 0.85) & (adx <= r * 0.85)
    if shape == 3:    # square frame
        outer = (ady <= r * 0.9) & (adx <= r * 0.9)
        inner = (ady <= r * 0.45) & (adx <= r * 0.45)
        return outer & ~inner
    if shape == 4:    # diamond
        return ady + adx <= r * 1.2
    if shape == 5:    # plus
        return ((adx <= r / 3) & (ady <= r)) | ((ady <= r / 3) & (adx <= r))
    if shape == 6:    # diagonal cross
        return (np.abs(adx - ady) <= r / 3) & (ady <= r) & (adx <= r)
    if shape == 7:    # horizontal bar
        return (ady <= r / 2.8) & (adx <= r * 1.1)
    if shape == 8:    # vertical bar
        return (adx <= r / 2.8) & (ady <= r * 1.1)
    # triangle, pointing up
    return (dy >= -r) & (dy <= r * 0.8) & (adx <= (r * 0.8 - dy * 0.55))


def _background(scene: str, rng: np.random.Generator) -> np.ndarray:
    if scene == "plain":
        level = rng.uniform(0.05, 0.18)
        return np.full((3, IMAGE_SIZE, IMAGE_SIZE), level)
    # textured: an oriented sinusoidal grating, random frequency and phase
    theta = rng.uniform(0.0, np.pi)
    freq = rng.uniform(0.35, 0.9)
    phase = rng.uniform(0.0, 2 * np.pi)
    wave = 0.16 + 0.15 * np.sin(freq * (_XS * np.cos(theta) + _YS * np.sin(theta)) + phase)
    return np.broadcast_to(wave, (3, IMAGE_SIZE, IMAGE_SIZE)).copy()


def _box_blur(img: np.ndarray, passes: int = 2) -> np.ndarray:
    """3x3 box blur with edge replication, applied ``passes`` times."""
    out = img
    for _ in range(passes):
        padded = np.pad(out, ((0, 0), (1, 1), (1, 1)), mode="edge")
        acc = np.zeros_like(out)
        for di in range(3):
            for dj in range(3):
                acc += padded[:, di:di + IMAGE_SIZE, dj:dj + IMAGE_SIZE]
        out = acc / 9.0
    return out


def _rain_streaks(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = img.copy()
    n_streaks = rng.integers(14, 22)
    for _ in range(n_streaks):
        x = rng.uniform(0, IMAGE_SIZE)
        y = rng.uniform(-6, IMAGE_SIZE / 2)
        length = rng.integers(10, 20)
        slope = rng.uniform(0.25, 0.5)  # mostly vertical streaks
        gain = rng.uniform(0.3, 0.7)
        for step in range(length):
            yi = int(y + step)
            xi = int(x + slope * step)
            if 0 <= yi < IMAGE_SIZE and 0 <= xi < IMAGE_SIZE:
                out[:, yi, xi] += gain
    return out


def render_sample(label: int, attrs: dict[str, str], rng: np.random.Generator,
                  classes: int) -> np.ndarray:
    img = _background(attrs.get("scene", "plain"), rng)
    cy = rng.uniform(10.0, IMAGE_SIZE - 10.0)
    cx = rng.uniform(10.0, IMAGE_SIZE - 10.0)
    r = rng.uniform(5.0, 8.0)
    color = rng.uniform(0.35, 0.95, size=3)
    mask = _glyph_mask(label, cy, cx, r, classes)
    for ch in range(3):
        img[ch][mask] = color[ch]

    weather = attrs.get("weather", "clear")
    if weather == "fog":
        img = _box_blur(img, passes=3)
    elif weather == "rain":
        img = _rain_streaks(img, rng)

    if attrs.get("time") == "night":
        img = img * NIGHT_BRIGHTNESS
    return np.clip(img, 0.0, 1.0)


def generate_dataset(config: DatasetConfig) -> list[SampleRecord]:
    """Generate samples domain by domain in lexicographic tuple order, fully seeded."""
    if config.classes < 2:
        raise ValueError(f"need at least 2 classes, got {config.classes}")
    schema = config.schema
    names = schema.names
    for combo, count in config.counts.items():
        if len(combo) != len(names):
            raise ValueError(f"count key {combo} does not match schema attributes {names}")
        if count < 0:
            raise ValueError(f"negative count for {combo}")

    rng = np.random.default_rng(config.seed)
    samples: list[SampleRecord] = []
    for combo in sorted(config.counts):
        attrs = dict(zip(names, combo))
        schema.validate_attrs(attrs)
        for _ in range(config.counts[combo]):
            label = int(rng.integers(0, config.classes))
            image = render_sample(label, attrs, rng, config.classes)
            samples.append(SampleRecord(image=image, label=label, attrs=dict(attrs)))
    return samples
