"""GAN losses and the lazily scheduled regularizers.

Non-saturating logistic losses for both networks. The discriminator is
regularized with a gradient penalty on real inputs (R1) and the
generator with a path-length penalty that pulls per-sample Jacobian
norms toward their running mean. Both regularizers run only every
interval-th minibatch and are scaled by the interval so the expected
gradient matches the every-step variant.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .tensor import Tensor


@dataclass
class LazySchedule:
    """Fires on step 0 and every interval_minibatches after."""

    interval_minibatches: int = 16
    step_counter: int = 0


def lazy_gate(schedule: LazySchedule) -> bool:
    if schedule.interval_minibatches <= 0:
        raise ValueError("interval must be positive")
    return schedule.step_counter % schedule.interval_minibatches == 0


@dataclass(frozen=True)
class PathLengthState:
    """Running mean of Jacobian-vector norms (the pull target)."""

    ema_a: float = 0.0
    decay: float = 0.99


def loss_d(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    """softplus(−real) + softplus(fake), averaged per side."""
    return tt.add(
        tt.mean(tt.softplus(tt.scale(real_scores, -1.0))),
        tt.mean(tt.softplus(fake_scores)),
    )


def loss_g(fake_scores: Tensor) -> Tensor:
    """Non-saturating generator loss: mean softplus(−fake)."""
    return tt.mean(tt.softplus(tt.scale(fake_scores, -1.0)))


def r1_penalty(discriminator, real_images: Tensor, gamma: float) -> Tensor:
    """(γ/2) · mean over the batch of ‖∇_x D(x)‖².

    `discriminator` is any callable from an image batch to per-image
    scores; the gradient is taken w.r.t. `real_images`, which must
    require gradients. The result stays differentiable w.r.t. the
    discriminator's own parameters (second-order path).
    """
    if not real_images.requires_grad:
        raise ValueError("real_images must require gradients")
    scores = discriminator(real_images)
    total = tt.tsum(scores)
    (gx,) = tt.grad_of(total, [real_images], create_graph=True)
    n = real_images.shape[0]
    return tt.scale(tt.tsum(tt.square(gx)), gamma / (2.0 * n))


def path_length_penalty(
    generator,
    w_batch: Tensor,
    state: PathLengthState,
    direction_rng: np.random.Generator | None = None,
) -> tuple[Tensor, PathLengthState]:
    """Penalty pulling ‖∇_w(G(w)·y)‖ toward its running mean.

    y is a unit-normal image-space direction scaled by 1/√(H·W) so the
    norm target is resolution-independent. Returns the penalty (a
    recorded scalar differentiable through the second-order path) and
    the state with ema_a advanced using the current batch's mean norm.
    """
    if direction_rng is None:
        direction_rng = np.random.default_rng(0)
    if not w_batch.requires_grad:
        raise ValueError("w_batch must require gradients")
    images = generator(w_batch)
    h, w = images.shape[1], images.shape[2]
    y = Tensor(direction_rng.standard_normal(images.shape) / np.sqrt(h * w))
    proj = tt.tsum(tt.mul(images, y))
    (gw,) = tt.grad_of(proj, [w_batch], create_graph=True)
    axes = tuple(range(1, gw.ndim))
    norms = tt.sqrt(tt.sum_axes(tt.square(gw), axes))
    penalty = tt.mean(tt.square(tt.add_const(norms, -state.ema_a)))
    new_ema = state.decay * state.ema_a + (1.0 - state.decay) * float(np.mean(norms.data))
    return penalty, dataclasses.replace(state, ema_a=new_ema)
