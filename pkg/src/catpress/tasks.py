"""Deterministic synthetic paired-image task: outlines in, filled shapes out.

Each sample is generated from its own PCG64 stream keyed by (seed, index),
so any pair can be produced independently, in any order, on any platform,
with identical bytes.  The input is a binary edge map of 2..5 axis-aligned
rectangles and ellipses; the target fills the same shapes with colors drawn
from the same stream (later shapes painted over earlier ones) on a -1
background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SyntheticTask:
    seed: int
    image_size: int = 32
    n_train: int = 256
    n_val: int = 64
    shape_count_range: tuple = (2, 5)

    def train_pair(self, index: int):
        return synth_pair(self.seed, index, self.image_size, self.shape_count_range)

    def val_pair(self, index: int):
        return synth_pair(self.seed, self.n_train + index, self.image_size, self.shape_count_range)

    def train_batches(self, batch_size: int):
        for start in range(0, self.n_train, batch_size):
            yield [self.train_pair(i) for i in range(start, min(start + batch_size, self.n_train))]


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), int(index)))))


def _erode(mask: np.ndarray) -> np.ndarray:
    """4-neighborhood erosion with a zero border."""
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), bool)
    padded[1:-1, 1:-1] = mask
    return (
        padded[1:-1, 1:-1]
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )


def shape_masks(seed: int, index: int, size: int, count_range=(2, 5)):
    """The per-shape fill masks and colors behind one sample, in paint order."""
    rng = _rng(seed, index)
    k = int(rng.integers(count_range[0], count_range[1] + 1))
    yy, xx = np.mgrid[0:size, 0:size]
    masks, colors = [], []
    for _ in range(k):
        kind = int(rng.integers(0, 2))
        cy, cx = rng.uniform(size * 0.2, size * 0.8, 2)
        ry, rx = rng.uniform(size * 0.1, size * 0.3, 2)
        if kind == 0:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        else:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        color = rng.uniform(-1.0, 1.0, 3)
        masks.append(mask)
        colors.append(color)
    return masks, colors


def synth_pair(seed: int, index: int, size: int = 32, count_range=(2, 5)):
    """Returns (input 1xHxW float32 in {0,1}, target 3xHxW float32 in [-1,1])."""
    masks, colors = shape_masks(seed, index, size, count_range)
    edges = np.zeros((size, size), bool)
    target = np.full((3, size, size), -1.0, dtype=np.float32)
    for mask, color in zip(masks, colors):
        outline = mask & ~_erode(mask)
        edges |= outline
        target[:, mask] = np.asarray(color, np.float32)[:, None]
    x = edges.astype(np.float32)[None]
    return x, target


def batch_arrays(pairs):
    """Stack a list of (x, y) pairs into (n,1,h,w) and (n,3,h,w) arrays."""
    xs = np.stack([p[0] for p in pairs]).astype(np.float32)
    ys = np.stack([p[1] for p in pairs]).astype(np.float32)
    return xs, ys
