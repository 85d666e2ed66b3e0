"""Adaptive discriminator augmentation.

A seeded pipeline of six augmentation categories, each applied
independently per image with probability p, plus the two overfitting
heuristics computed from discriminator score summaries and the feedback
controller that nudges p toward a target heuristic value. Every
transform has exact gradients w.r.t. pixel values (geometric moves route
gradients through index maps; zero-filled pixels get zero gradient), so
generator updates flow through augmented fakes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import rng, tensor as tt
from .tensor import Tensor

TRANSLATE_FRACTION = 0.125
BRIGHTNESS_STD = 0.2
CONTRAST_LOG_STD = 0.5
NOISE_STD = 0.1
EPS_DENOMINATOR = 1e-12

CATEGORIES = (
    "x_flip",
    "rot90",
    "integer_translate",
    "brightness",
    "contrast",
    "additive_gaussian_noise",
)


class DegenerateScores(ArithmeticError):
    """Heuristic denominator too close to zero to be meaningful."""


@dataclass(frozen=True)
class ScoreSummary:
    """Batch-mean discriminator outputs feeding the heuristics."""

    e_train: float
    e_val: float
    e_gen: float
    sign_mean_train: float


@dataclass(frozen=True)
class ControllerState:
    """Augmentation strength and the settings governing its adjustment."""

    p: float = 0.0
    target: float = 0.6
    mode: str = "rt"
    images_seen_since_update: int = 0
    integration_horizon_images: int = 100_000
    p_max: float = 0.85


def _mask(g: np.random.Generator, n: int, p: float) -> np.ndarray:
    return (g.random(n) < p).astype(np.float64)


def augment_batch(images, p: float, seed: int) -> Tensor:
    """Apply the augmentation categories in declared order.

    Pure in (images, p, seed): all randomness comes from one counter-based
    stream, drawn in a fixed order and count regardless of which images
    each category hits, so the output is bit-reproducible.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"augmentation probability {p} outside [0, 1]")
    x = images if isinstance(images, Tensor) else Tensor(images)
    if x.ndim != 4:
        raise tt.ShapeError("augment_batch expects an (N, H, W, C) batch")
    if p == 0.0:
        return x
    n, h, w, _ = x.shape
    g = rng.stream(seed, "aug")

    m_flip = _mask(g, n, p)
    m_rot = _mask(g, n, p)
    rot_k = g.integers(0, 4, size=n)
    m_tr = _mask(g, n, p)
    max_shift = int(TRANSLATE_FRACTION * min(h, w))
    dy = g.integers(-max_shift, max_shift + 1, size=n)
    dx = g.integers(-max_shift, max_shift + 1, size=n)
    m_br = _mask(g, n, p)
    bright = g.standard_normal(n) * BRIGHTNESS_STD
    m_ct = _mask(g, n, p)
    contrast = np.exp(g.standard_normal(n) * CONTRAST_LOG_STD)
    m_nz = _mask(g, n, p)
    noise = g.standard_normal((n, h, w, 1)) * NOISE_STD

    def per_image(v):
        return Tensor(v.reshape(n, 1, 1, 1))

    if m_flip.any():
        keep = per_image(1.0 - m_flip)
        x = tt.add(tt.mul(per_image(m_flip), tt.flip_w(x)), tt.mul(keep, x))
    if m_rot.any():
        k_eff = np.where(m_rot > 0, rot_k, 0)
        parts = []
        for k in range(4):
            sel = (k_eff == k).astype(np.float64)
            if sel.any():
                parts.append(tt.mul(per_image(sel), tt.rot90k(x, k)))
        x = parts[0] if len(parts) == 1 else _sum_tensors(parts)
    if m_tr.any():
        x = tt.translate2d(x, np.where(m_tr > 0, dy, 0), np.where(m_tr > 0, dx, 0))
    if m_br.any():
        x = tt.add(x, per_image(m_br * bright))
    if m_ct.any():
        x = tt.mul(x, per_image(1.0 + m_ct * (contrast - 1.0)))
    if m_nz.any():
        x = tt.add(x, tt.mul(per_image(m_nz), Tensor(noise)))
    return x


def _sum_tensors(parts):
    out = parts[0]
    for t in parts[1:]:
        out = tt.add(out, t)
    return out


def heuristic_rv(s: ScoreSummary) -> float:
    """Validation-vs-train overfitting ratio, clamped to [0, 1].

    0 when validation scores match training scores; 1 when validation is
    scored no better than generated images.
    """
    den = s.e_train - s.e_gen
    if abs(den) <= EPS_DENOMINATOR:
        raise DegenerateScores("train and generated score means coincide")
    r = (s.e_train - s.e_val) / den
    return float(min(max(r, 0.0), 1.0))


def heuristic_rt(train_scores) -> float:
    """Mean sign of discriminator outputs on real training images."""
    scores = np.asarray(train_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("heuristic_rt needs at least one score")
    return float(np.mean(np.sign(scores)))


def controller_step(
    state: ControllerState, heuristic_value: float, images_in_batch: int
) -> ControllerState:
    """Move p one increment toward the target heuristic value.

    The step size is images_in_batch / horizon, so a persistently wrong
    heuristic walks p across its full range in about one horizon of
    images. Exactly-on-target leaves p untouched.
    """
    if not np.isfinite(heuristic_value):
        raise ValueError("heuristic value must be finite")
    delta = images_in_batch / state.integration_horizon_images
    p = state.p + np.sign(heuristic_value - state.target) * delta
    p = float(min(max(p, 0.0), state.p_max))
    return dataclasses.replace(state, p=p, images_seen_since_update=0)
