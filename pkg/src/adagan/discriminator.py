"""Residual downsampling critic producing one realness score per image.

The network never augments its input; callers apply augmentation first.
Each block halves resolution: two 3×3 convs on the main branch, a 1×1
projection on the skip, merged as (main + skip)/√2 to keep variance
flat. Two dense layers map the final 4×4 activations to a scalar.
"""

from __future__ import annotations

import numpy as np

from . import rng, tensor as tt
from .generator import LRELU_SLOPE, SynthesisConfig
from .tensor import Tensor

MERGE_SCALE = 1.0 / np.sqrt(2.0)


def block_resolutions(cfg: SynthesisConfig) -> list[int]:
    """Input resolutions of the residual blocks, highest first."""
    out, res = [], cfg.target_resolution
    while res > 4:
        out.append(res)
        res //= 2
    return out


def init_discriminator_params(cfg: SynthesisConfig, seed: int) -> dict[str, Tensor]:
    g = rng.stream(seed, "init.d")
    params: dict[str, Tensor] = {}

    def param(name, arr):
        params[name] = Tensor(arr, requires_grad=True)

    c_top = cfg.channels[cfg.target_resolution]
    param("fromrgb.w", g.standard_normal((1, 1, cfg.out_channels, c_top))
          / np.sqrt(cfg.out_channels))
    param("fromrgb.b", np.zeros(c_top))

    for res in block_resolutions(cfg):
        cin = cfg.channels[res]
        cout = cfg.channels[res // 2]
        param(f"block{res}.conv0.w", g.standard_normal((3, 3, cin, cin)) / np.sqrt(9 * cin))
        param(f"block{res}.conv0.b", np.zeros(cin))
        param(f"block{res}.conv1.w", g.standard_normal((3, 3, cin, cout)) / np.sqrt(9 * cin))
        param(f"block{res}.conv1.b", np.zeros(cout))
        param(f"block{res}.skip.w", g.standard_normal((1, 1, cin, cout)) / np.sqrt(cin))

    c4 = cfg.channels[4]
    param("dense0.w", g.standard_normal((16 * c4, c4)) / np.sqrt(16 * c4))
    param("dense0.b", np.zeros(c4))
    param("dense1.w", g.standard_normal((c4, 1)) / np.sqrt(c4))
    param("dense1.b", np.zeros(1))
    return params


def score(images, params: dict[str, Tensor], cfg: SynthesisConfig) -> Tensor:
    """Realness scores, one scalar per image in the (N, H, W, C) batch."""
    x = images if isinstance(images, Tensor) else Tensor(images)
    if x.ndim != 4 or x.shape[1] != cfg.target_resolution or x.shape[2] != cfg.target_resolution:
        raise tt.ShapeError(
            f"expected (N, {cfg.target_resolution}, {cfg.target_resolution}, C) images,"
            f" got {x.shape}"
        )
    x = tt.leaky_relu(
        tt.bias_add(tt.conv2d(x, params["fromrgb.w"]), params["fromrgb.b"]), LRELU_SLOPE
    )
    for res in block_resolutions(cfg):
        main = tt.leaky_relu(
            tt.bias_add(tt.conv2d(x, params[f"block{res}.conv0.w"]),
                        params[f"block{res}.conv0.b"]),
            LRELU_SLOPE,
        )
        main = tt.leaky_relu(
            tt.bias_add(tt.conv2d(main, params[f"block{res}.conv1.w"]),
                        params[f"block{res}.conv1.b"]),
            LRELU_SLOPE,
        )
        main = tt.downsample2x_mean(main)
        skip = tt.downsample2x_mean(tt.conv2d(x, params[f"block{res}.skip.w"]))
        x = tt.scale(tt.add(main, skip), MERGE_SCALE)
    n = x.shape[0]
    flat = tt.reshape(x, (n, x.shape[1] * x.shape[2] * x.shape[3]))
    h = tt.leaky_relu(
        tt.bias_add(tt.matmul(flat, params["dense0.w"]), params["dense0.b"]), LRELU_SLOPE
    )
    out = tt.bias_add(tt.matmul(h, params["dense1.w"]), params["dense1.b"])
    return tt.reshape(out, (n,))
