"""Distribution distances between real and generated image sets.

Images are embedded into fixed-dimension feature vectors by small
deterministic embedders (a pixel downsampler or a seeded random conv
net), Gaussian moments are fitted, and two distances are computed: the
Fréchet distance between moment pairs and the squared MMD under a cubic
polynomial kernel, estimated unbiasedly over seeded subsample blocks.
All functions here are pure numpy (no gradients needed).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import rng
from .linalg import SpdMatrix, trace_sqrt_product

FEATURE_MAGIC = b"FEAT"
RANDCONV_DIM = 128
LRELU_SLOPE = 0.2


@dataclass(frozen=True)
class Embedder:
    """Deterministic image→feature map. kind: 'pixels' or 'randconv'."""

    kind: str = "pixels"
    seed: int = 0

    def dim(self, resolution: int) -> int:
        if self.kind == "pixels":
            return 64
        if self.kind == "randconv":
            return RANDCONV_DIM
        raise ValueError(f"unknown embedder kind {self.kind!r}")


@dataclass(frozen=True)
class GaussianMoments:
    mu: np.ndarray
    sigma: SpdMatrix
    n: int


def _as_image_array(images) -> np.ndarray:
    x = np.asarray(getattr(images, "data", images), dtype=np.float64)
    if x.ndim == 3:
        x = x[..., None]
    if x.ndim != 4:
        raise ValueError("images must be (N, H, W, C)")
    return x


def _down2(x: np.ndarray) -> np.ndarray:
    return 0.25 * (
        (x[:, 0::2, 0::2, :] + x[:, 0::2, 1::2, :])
        + (x[:, 1::2, 0::2, :] + x[:, 1::2, 1::2, :])
    )


def _conv3x3(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, h, wd, cin = x.shape
    xp = np.zeros((n, h + 2, wd + 2, cin))
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((n, h, wd, 3, 3, cin))
    for ky in range(3):
        for kx in range(3):
            cols[:, :, :, ky, kx, :] = xp[:, ky : ky + h, kx : kx + wd, :]
    return cols.reshape(n * h * wd, 9 * cin) @ w.reshape(9 * cin, w.shape[-1])


def embed(images, e: Embedder) -> np.ndarray:
    """Feature matrix (N, d) for an image batch in [−1, 1]."""
    x = _as_image_array(images)
    n, h, w, c = x.shape
    if h != w or (h & (h - 1)) != 0:
        raise ValueError("embedders expect square power-of-two images")
    if e.kind == "pixels":
        if h < 8:
            raise ValueError("pixels embedder needs resolution ≥ 8")
        if c != 1:
            x = x.mean(axis=3, keepdims=True)
        while x.shape[1] > 8:
            x = _down2(x)
        return x.reshape(n, 64)
    if e.kind == "randconv":
        g = rng.stream(e.seed, "embed.randconv")
        chans = [c, 8, 16, 32]
        y = x
        for i in range(3):
            wk = g.standard_normal((3, 3, chans[i], chans[i + 1])) / np.sqrt(9 * chans[i])
            m, hh, ww, _ = y.shape
            out = _conv3x3(y, wk).reshape(m, hh, ww, chans[i + 1])
            out = np.where(out > 0, out, LRELU_SLOPE * out)
            y = _down2(out) if out.shape[1] >= 2 else out
        flat = y.reshape(n, -1)
        proj = g.standard_normal((flat.shape[1], RANDCONV_DIM)) / np.sqrt(flat.shape[1])
        return flat @ proj
    raise ValueError(f"unknown embedder kind {e.kind!r}")


def gaussian_moments(features: np.ndarray) -> GaussianMoments:
    """Sample mean and unbiased covariance (n−1), symmetrized."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError("need a (n ≥ 2, d) feature matrix")
    mu = f.mean(axis=0)
    cov = np.atleast_2d(np.cov(f, rowvar=False, ddof=1))
    return GaussianMoments(mu=mu, sigma=SpdMatrix((cov + cov.T) * 0.5), n=f.shape[0])


def fid(r: GaussianMoments, g: GaussianMoments) -> float:
    """‖μ_r−μ_g‖² + Tr(Σ_r + Σ_g − 2(Σ_rΣ_g)^{1/2}), clamped at 0.

    The cross term uses the symmetric form √(√Σ_r·Σ_g·√Σ_r); tiny
    negative totals are numerical noise and are clamped to zero.
    """
    if r.mu.shape != g.mu.shape:
        raise ValueError("moment dimensions differ")
    diff = r.mu - g.mu
    val = (
        float(diff @ diff)
        + float(np.trace(r.sigma.entries))
        + float(np.trace(g.sigma.entries))
        - 2.0 * trace_sqrt_product(r.sigma, g.sigma)
    )
    return max(val, 0.0)


def poly_kernel(x: np.ndarray, y: np.ndarray) -> float:
    """Cubic polynomial kernel ((⟨x,y⟩/d) + 1)³."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("poly_kernel takes two equal-length vectors")
    d = x.shape[0]
    return float((x @ y / d + 1.0) ** 3)


def _gram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[1]
    return (a @ b.T / d + 1.0) ** 3


def mmd2_unbiased(fx: np.ndarray, fy: np.ndarray) -> float:
    """Unbiased squared MMD between two equal-size feature blocks."""
    m = fx.shape[0]
    if fy.shape[0] != m or m < 2:
        raise ValueError("blocks must have equal size ≥ 2")
    kxx = _gram(fx, fx)
    kyy = _gram(fy, fy)
    kxy = _gram(fx, fy)
    sum_xx = kxx.sum() - np.trace(kxx)
    sum_yy = kyy.sum() - np.trace(kyy)
    return float(
        sum_xx / (m * (m - 1)) + sum_yy / (m * (m - 1)) - 2.0 * kxy.sum() / (m * m)
    )


def kid(
    f_real: np.ndarray,
    f_gen: np.ndarray,
    block_size: int = 100,
    n_blocks: int = 10,
    seed: int = 0,
) -> float:
    """Mean unbiased block MMD² under the cubic kernel, unclamped.

    Each block subsamples block_size features per side without
    replacement from a seeded stream; slight negativity is expected from
    the unbiased estimator and is reported as-is.
    """
    f_real = np.asarray(f_real, dtype=np.float64)
    f_gen = np.asarray(f_gen, dtype=np.float64)
    if block_size < 2:
        raise ValueError("block_size must be ≥ 2")
    if f_real.shape[0] < block_size or f_gen.shape[0] < block_size:
        raise ValueError("need at least block_size features per side")
    g = rng.stream(seed, "kid")
    total = 0.0
    for _ in range(n_blocks):
        ir = g.choice(f_real.shape[0], size=block_size, replace=False)
        ig = g.choice(f_gen.shape[0], size=block_size, replace=False)
        total += mmd2_unbiased(f_real[ir], f_gen[ig])
    return total / n_blocks


def save_features(path, features: np.ndarray) -> None:
    """Write a FEAT file: magic, version, count, dim, little-endian f64."""
    f = np.ascontiguousarray(features, dtype="<f8")
    if f.ndim != 2:
        raise ValueError("features must be 2-D")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<HQI", 1, f.shape[0], f.shape[1]))
        fh.write(f.tobytes())


def load_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise ValueError("not a feature file")
        version, count, dim = struct.unpack("<HQI", fh.read(14))
        if version != 1:
            raise ValueError(f"unsupported feature file version {version}")
        data = np.frombuffer(fh.read(count * dim * 8), dtype="<f8")
        if data.size != count * dim:
            raise ValueError("feature file truncated")
        return data.reshape(count, dim).astype(np.float64)
