"""Shared test machinery: finite-difference checks and tiny model configs."""

from __future__ import annotations

import numpy as np

from adagan import rng, tensor as tt
from adagan.generator import SynthesisConfig
from adagan.tensor import Tensor


def rel_err(numeric: float, analytic: float) -> float:
    return abs(numeric - analytic) / max(1.0, abs(numeric), abs(analytic))


def fd_gradient_check(
    f,
    shapes,
    seed: int,
    n_probes: int = 4,
    eps: float = 1e-5,
    positive: bool = False,
) -> float:
    """Worst relative error between analytic and central-difference grads.

    f maps leaf tensors to one tensor (summed internally if not scalar);
    probes a few coordinates of every input.
    """
    raws = [rng.stream(seed, "fd.in", i).standard_normal(s) for i, s in enumerate(shapes)]
    if positive:
        raws = [np.abs(r) + 0.5 for r in raws]
    leaves = [Tensor(r, requires_grad=True) for r in raws]
    grads = tt.grad_of(tt.tsum(f(*leaves)), leaves)
    worst = 0.0
    for k, (leaf, grad) in enumerate(zip(leaves, grads)):
        assert grad is not None, f"missing gradient for input {k}"
        assert grad.shape == leaf.shape
        flat = leaf.data.ravel()
        picks = rng.stream(seed, "fd.pick", k).integers(
            0, flat.size, size=min(n_probes, flat.size)
        )
        for j in picks:
            orig = flat[j]
            flat[j] = orig + eps
            fp = float(tt.tsum(f(*leaves)).data)
            flat[j] = orig - eps
            fm = float(tt.tsum(f(*leaves)).data)
            flat[j] = orig
            worst = max(worst, rel_err((fp - fm) / (2 * eps), grad.data.ravel()[j]))
    return worst


def fd_scalar_check(value_fn, grad, leaf, picks, eps: float = 1e-5) -> float:
    """FD check for scalar-valued closures that rebuild their own graph.

    Used for second-order quantities: `value_fn()` recomputes the scalar
    (running its own inner backward), `grad` is the analytic gradient
    w.r.t. `leaf`.
    """
    flat = leaf.data.ravel()
    worst = 0.0
    for j in picks:
        orig = flat[j]
        flat[j] = orig + eps
        fp = value_fn()
        flat[j] = orig - eps
        fm = value_fn()
        flat[j] = orig
        worst = max(worst, rel_err((fp - fm) / (2 * eps), grad.data.ravel()[j]))
    return worst


def tiny_synthesis_config(resolution: int = 16) -> SynthesisConfig:
    channels = {4: 8, 8: 8, 16: 6, 32: 6}
    return SynthesisConfig(
        target_resolution=resolution,
        channels={r: c for r, c in channels.items() if r <= resolution},
        z_dim=8,
        w_dim=8,
        mapping_depth=2,
        out_channels=1,
    )
