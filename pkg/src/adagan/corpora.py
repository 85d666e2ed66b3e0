"""Procedurally generated toy corpora.

Desk-scale stand-ins for the large photographic source datasets used in
transfer learning: each corpus is a family of synthetic grayscale
patterns with two modes (stored as the class label), written straight
into the record container. The smoke-training corpus is the two-mode
blob family: one Gaussian bump per image at one of two positions.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .datakit import RecordSummary, RecordWriter, round_half_up_u8

KINDS = ("blobs2", "rings", "bars")


def _grid(res: int) -> tuple[np.ndarray, np.ndarray]:
    ax = np.arange(res, dtype=np.float64)
    return np.meshgrid(ax, ax, indexing="ij")


def _blob(res: int, mode: int, g: np.random.Generator) -> np.ndarray:
    yy, xx = _grid(res)
    base = res * 0.28 if mode == 0 else res * 0.72
    cy = base + g.uniform(-1.5, 1.5)
    cx = base + g.uniform(-1.5, 1.5)
    sigma = res * 0.11 * (1.0 + g.uniform(-0.15, 0.15))
    amp = g.uniform(200.0, 255.0)
    return amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))


def _ring(res: int, mode: int, g: np.random.Generator) -> np.ndarray:
    yy, xx = _grid(res)
    c = (res - 1) / 2.0
    radius = res * (0.18 if mode == 0 else 0.34) * (1.0 + g.uniform(-0.1, 0.1))
    width = res * 0.05 * (1.0 + g.uniform(-0.2, 0.2))
    dist = np.sqrt((yy - c) ** 2 + (xx - c) ** 2)
    amp = g.uniform(180.0, 255.0)
    return amp * np.exp(-((dist - radius) ** 2) / (2.0 * width * width))


def _bars(res: int, mode: int, g: np.random.Generator) -> np.ndarray:
    yy, xx = _grid(res)
    axis = yy if mode == 0 else xx
    period = res * (0.25 + g.uniform(-0.05, 0.05))
    phase = g.uniform(0, 2 * np.pi)
    amp = g.uniform(90.0, 127.0)
    return 127.5 + amp * np.sin(2 * np.pi * axis / period + phase)


_FAMILIES = {"blobs2": _blob, "rings": _ring, "bars": _bars}


def toy_image(kind: str, mode: int, g: np.random.Generator, resolution: int) -> np.ndarray:
    """One u8 pattern image of the given family and mode."""
    try:
        fam = _FAMILIES[kind]
    except KeyError:
        raise ValueError(f"unknown corpus kind {kind!r}; choose from {KINDS}") from None
    return round_half_up_u8(fam(resolution, mode, g))


def build_toy_corpus(
    kind: str, n: int, resolution: int, seed: int, out_path
) -> RecordSummary:
    """Write n images (modes alternating) into a record file."""
    if n < 2:
        raise ValueError("corpus needs at least 2 images")
    per_class = {0: 0, 1: 0}
    with RecordWriter(out_path, resolution) as writer:
        for i in range(n):
            mode = i % 2
            g = rng.stream(seed, "corpus", kind, i)
            writer.add(mode, toy_image(kind, mode, g, resolution))
            per_class[mode] += 1
    return RecordSummary(
        count=n,
        per_class=per_class,
        skipped=(),
        resolution=int(resolution),
        path=str(out_path),
    )
