"""Style-based image generator.

A mapping MLP turns latent codes into intermediate style vectors; each
convolution layer's style is an affine projection of that vector. Styles
scale the convolution's input channels and a demodulation coefficient
rescales its outputs so every output channel keeps unit expected
variance. Per-layer seeded noise and bias are added after the
convolution, outside the style path. Each resolution contributes to the
output image through a 1×1 projection summed over upsampled skips.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng, tensor as tt
from .tensor import Tensor

DEMOD_EPS = 1e-8
RMS_EPS = 1e-8
LRELU_SLOPE = 0.2


def default_channels(target_resolution: int) -> dict[int, int]:
    """Channel counts per resolution for desk-scale runs."""
    table = {4: 64, 8: 64, 16: 32, 32: 32, 64: 16, 128: 16}
    res, out = 4, {}
    while res <= target_resolution:
        out[res] = table[res]
        res *= 2
    return out


@dataclass(frozen=True)
class SynthesisConfig:
    """Static shape of one generator."""

    target_resolution: int = 32
    base_resolution: int = 4
    channels: dict[int, int] = field(default_factory=lambda: default_channels(32))
    z_dim: int = 64
    w_dim: int = 64
    mapping_depth: int = 4
    out_channels: int = 1

    def __post_init__(self):
        res = self.base_resolution
        if self.base_resolution != 4:
            raise ValueError("base resolution is fixed at 4")
        seen = []
        while res <= self.target_resolution:
            if res not in self.channels:
                raise ValueError(f"missing channel count for resolution {res}")
            seen.append(res)
            res *= 2
        if seen[-1] != self.target_resolution:
            raise ValueError("target resolution must be 4·2^k")

    def resolutions(self) -> list[int]:
        out, res = [], self.base_resolution
        while res <= self.target_resolution:
            out.append(res)
            res *= 2
        return out

    def num_layers(self) -> int:
        return 2 * len(self.resolutions())

    def layer_channels(self, layer: int) -> tuple[int, int]:
        """(input, output) channel counts of conv layer `layer`."""
        res_list = self.resolutions()
        res = res_list[layer // 2]
        cout = self.channels[res]
        if layer % 2 == 1:
            return cout, cout
        prev = res_list[max(layer // 2 - 1, 0)]
        return self.channels[prev], cout


def init_generator_params(cfg: SynthesisConfig, seed: int) -> dict[str, Tensor]:
    """Fresh parameter set; weights normal(0, 1/√fan_in), style bias 1."""
    g = rng.stream(seed, "init.g")
    params: dict[str, Tensor] = {}

    def param(name, arr):
        params[name] = Tensor(arr, requires_grad=True)

    dims = [cfg.z_dim] + [cfg.w_dim] * cfg.mapping_depth
    for i in range(cfg.mapping_depth):
        fan = dims[i]
        param(f"map.{i}.w", g.standard_normal((fan, dims[i + 1])) / np.sqrt(fan))
        param(f"map.{i}.b", np.zeros(dims[i + 1]))

    param("const", g.standard_normal((1, 4, 4, cfg.channels[4])))

    for layer in range(cfg.num_layers()):
        cin, cout = cfg.layer_channels(layer)
        param(f"conv.{layer}.w", g.standard_normal((3, 3, cin, cout)) / np.sqrt(9 * cin))
        param(f"conv.{layer}.b", np.zeros(cout))
        param(f"conv.{layer}.nstrength", np.zeros(()))
        param(f"style.{layer}.a", g.standard_normal((cfg.w_dim, cin)) / np.sqrt(cfg.w_dim))
        param(f"style.{layer}.b", np.ones(cin))

    for res in cfg.resolutions():
        c = cfg.channels[res]
        param(f"torgb.{res}.w", g.standard_normal((1, 1, c, cfg.out_channels)) / np.sqrt(c))
        param(f"torgb.{res}.b", np.zeros(cfg.out_channels))
    return params


def map_latent(z: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Latent batch (N, Z) → style batch (N, W) through the mapping MLP.

    The input is scaled per vector to unit RMS before the first layer, so
    only latent direction matters.
    """
    if not isinstance(z, Tensor):
        z = Tensor(z)
    if z.ndim != 2:
        raise tt.ShapeError("map_latent expects a (N, z_dim) batch")
    ms = tt.mean(tt.square(z), axes=(1,), keepdims=True)
    x = tt.mul(z, tt.rsqrt(tt.add_const(ms, RMS_EPS)))
    depth = 0
    while f"map.{depth}.w" in params:
        depth += 1
    for i in range(depth):
        x = tt.leaky_relu(
            tt.bias_add(tt.matmul(x, params[f"map.{i}.w"]), params[f"map.{i}.b"]),
            LRELU_SLOPE,
        )
    return x


def style_affine(w: Tensor, layer: int, params: dict[str, Tensor]) -> Tensor:
    """Per-input-channel scales for one conv layer: s = w·A + b."""
    a = params[f"style.{layer}.a"]
    b = params[f"style.{layer}.b"]
    if not isinstance(w, Tensor):
        w = Tensor(w)
    return tt.bias_add(tt.matmul(w, a), b)


def modulate_demodulate(weights: Tensor, s: Tensor, demodulate: bool = True) -> Tensor:
    """Effective weights for one style vector.

    weights: (kh, kw, Cin, Cout); s: (Cin,) scales. Modulation multiplies
    each input channel's taps by s[i]; demodulation then rescales every
    output channel to unit L2 norm (ε guards empty channels). Only the
    scale is normalized; the mean is left alone.
    """
    if not isinstance(weights, Tensor):
        weights = Tensor(weights)
    if not isinstance(s, Tensor):
        s = Tensor(s)
    if s.ndim != 1 or s.shape[0] != weights.shape[2]:
        raise tt.ShapeError("style length must equal input channel count")
    wmod = tt.mul(weights, tt.reshape(s, (1, 1, s.shape[0], 1)))
    if not demodulate:
        return wmod
    sq = tt.sum_axes(tt.square(wmod), axes=(0, 1, 2), keepdims=True)
    return tt.mul(wmod, tt.rsqrt(tt.add_const(sq, DEMOD_EPS)))


def _styled_conv(x: Tensor, s: Tensor, weights: Tensor) -> Tensor:
    """Batched modulated+demodulated conv as activation scaling.

    Scaling the input by s, convolving with shared weights, and scaling
    the output by rsqrt(Σ(w·s)² + ε) equals applying per-sample
    demodulated weights, but runs as one large GEMM.
    """
    n = x.shape[0]
    xin = tt.mul(x, tt.reshape(s, (n, 1, 1, s.shape[1])))
    y = tt.conv2d(xin, weights)
    sw = tt.sum_axes(tt.square(weights), axes=(0, 1))
    norm2 = tt.add_const(tt.matmul(tt.square(s), sw), DEMOD_EPS)
    return tt.mul(y, tt.reshape(tt.rsqrt(norm2), (n, 1, 1, y.shape[3])))


def _per_layer(w_per_layer, num_layers: int) -> list[Tensor]:
    if isinstance(w_per_layer, Tensor):
        return [w_per_layer] * num_layers
    ws = list(w_per_layer)
    if len(ws) != num_layers:
        raise tt.ShapeError(f"need {num_layers} style vectors, got {len(ws)}")
    return ws


def synthesize(
    w_per_layer,
    noise_seed: int,
    params: dict[str, Tensor],
    config: SynthesisConfig,
) -> Tensor:
    """Render images in [−1, 1] from per-layer style vectors.

    w_per_layer: one (N, W) tensor used for all layers, or a sequence
    with one entry per conv layer (style mixing). Noise fields are drawn
    from the seeded stream per layer; their contribution is scaled by the
    layer's learned strength.
    """
    ws = _per_layer(w_per_layer, config.num_layers())
    n = ws[0].shape[0]
    x = tt.broadcast_to(params["const"], (n,) + params["const"].shape[1:])
    image: Tensor | None = None
    layer = 0
    for res in config.resolutions():
        if res > config.base_resolution:
            x = tt.upsample2x_nearest(x)
        for _ in range(2):
            s = style_affine(ws[layer], layer, params)
            y = _styled_conv(x, s, params[f"conv.{layer}.w"])
            noise = rng.stream(noise_seed, "layer", layer).standard_normal(
                (n, y.shape[1], y.shape[2], 1)
            )
            y = tt.add(y, tt.mul(Tensor(noise), params[f"conv.{layer}.nstrength"]))
            y = tt.bias_add(y, params[f"conv.{layer}.b"])
            x = tt.leaky_relu(y, LRELU_SLOPE)
            layer += 1
        rgb = tt.bias_add(
            tt.conv2d(x, params[f"torgb.{res}.w"]), params[f"torgb.{res}.b"]
        )
        image = rgb if image is None else tt.add(tt.upsample2x_nearest(image), rgb)
    return tt.tanh(image)


def style_mix(w_a: Tensor, w_b: Tensor, crossover_layer: int, num_layers: int) -> list[Tensor]:
    """Per-layer styles: layers before the crossover take w_a, the rest w_b."""
    if not 0 <= crossover_layer <= num_layers:
        raise IndexError(f"crossover {crossover_layer} outside [0, {num_layers}]")
    return [w_a if i < crossover_layer else w_b for i in range(num_layers)]


def generate(
    z,
    noise_seed: int,
    params: dict[str, Tensor],
    config: SynthesisConfig,
) -> Tensor:
    """Latents straight to images (mapping + synthesis)."""
    w = map_latent(z if isinstance(z, Tensor) else Tensor(z), params)
    return synthesize(w, noise_seed, params, config)
