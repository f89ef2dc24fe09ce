"""Synthetic shapes/colors corpus with planted concept structure.

Four classes arise from crossing two shapes (square, disk) with two
color families (red, blue). A classifier trained on this corpus
develops channels that respond to color and shape, which is what the
concept machinery needs. All generation is seeded; the corpus lives in
the repo as code, never as data files.

Images are float32 CHW in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

IMAGE_SIZE = 16
CHANNELS = 3

CLASS_NAMES = ("red_square", "blue_square", "red_disk", "blue_disk")

_COLORS = {
    "red": (0.85, 0.20, 0.20),
    "blue": (0.20, 0.30, 0.85),
}


@dataclass
class LabeledImages:
    """A batch of images with integer labels, plus the class-name list."""

    images: torch.Tensor  # (N, 3, H, W) float32 in [-1, 1]
    labels: torch.Tensor  # (N,) int64
    class_names: tuple[str, ...] = CLASS_NAMES

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, idx) -> "LabeledImages":
        return LabeledImages(self.images[idx], self.labels[idx], self.class_names)


def _draw_sample(rng: np.random.Generator, label: int, size: int) -> np.ndarray:
    shape = "square" if label < 2 else "disk"
    color_name = "red" if label % 2 == 0 else "blue"
    base = np.array(_COLORS[color_name], dtype=np.float32)

    img = np.full((3, size, size), 0.12, dtype=np.float32)
    img += rng.normal(0.0, 0.02, size=img.shape).astype(np.float32)

    half = rng.integers(3, 6)  # shape half-extent in pixels
    cy = rng.integers(half + 1, size - half - 1)
    cx = rng.integers(half + 1, size - half - 1)
    color = base + rng.normal(0.0, 0.04, size=3).astype(np.float32)
    color = np.clip(color, 0.0, 1.0)

    yy, xx = np.mgrid[0:size, 0:size]
    if shape == "square":
        mask = (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)
    else:
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= half**2
    for c in range(3):
        img[c][mask] = color[c]

    img += rng.normal(0.0, 0.015, size=img.shape).astype(np.float32)
    img = np.clip(img, 0.0, 1.0)
    return img * 2.0 - 1.0


def make_corpus(n: int, seed: int, size: int = IMAGE_SIZE) -> LabeledImages:
    """Generate ``n`` labeled images, classes balanced round-robin."""
    if n < 1:
        raise ValueError(f"corpus size must be positive, got {n}")
    rng = np.random.default_rng(seed)
    images = np.empty((n, CHANNELS, size, size), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        label = i % len(CLASS_NAMES)
        images[i] = _draw_sample(rng, label, size)
        labels[i] = label
    order = rng.permutation(n)
    return LabeledImages(
        torch.from_numpy(images[order]), torch.from_numpy(labels[order])
    )


def split_corpus(
    corpus: LabeledImages, fractions: tuple[float, ...], seed: int
) -> list[LabeledImages]:
    """Split deterministically into parts of the given fractions (must sum to 1)."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(corpus))
    bounds = np.cumsum([int(round(f * len(corpus))) for f in fractions])
    bounds[-1] = len(corpus)
    parts = []
    start = 0
    for end in bounds:
        parts.append(corpus.subset(torch.from_numpy(order[start:end].copy())))
        start = end
    return parts
