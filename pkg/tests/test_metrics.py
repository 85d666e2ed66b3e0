"""Tests for embedders, moment fitting, FID, and KID."""

import numpy as np
import pytest

from adagan import metrics, rng
from adagan.metrics import Embedder, gaussian_moments


def gaussian_features(seed: int, n: int, d: int, mu=0.0, sd=1.0) -> np.ndarray:
    return rng.stream(seed, "feat").standard_normal((n, d)) * sd + mu


# -- embedders ---------------------------------------------------------------


def test_pixels_embedder_identity_at_8x8():
    imgs = rng.stream(0, "img").uniform(-1, 1, (5, 8, 8, 1))
    feats = metrics.embed(imgs, Embedder("pixels"))
    np.testing.assert_array_equal(feats, imgs.reshape(5, 64))


def test_pixels_embedder_downsamples_to_64():
    imgs = rng.stream(1, "img").uniform(-1, 1, (3, 32, 32, 1))
    feats = metrics.embed(imgs, Embedder("pixels"))
    assert feats.shape == (3, 64)
    # mean pooling preserves the overall mean
    np.testing.assert_allclose(feats.mean(), imgs.mean(), atol=1e-12)


def test_identical_images_identical_features():
    img = rng.stream(2, "img").uniform(-1, 1, (1, 16, 16, 1))
    batch = np.concatenate([img, img], axis=0)
    for kind in ("pixels", "randconv"):
        feats = metrics.embed(batch, Embedder(kind))
        np.testing.assert_array_equal(feats[0], feats[1])


def test_randconv_deterministic_and_seed_sensitive():
    imgs = rng.stream(3, "img").uniform(-1, 1, (4, 16, 16, 1))
    a = metrics.embed(imgs, Embedder("randconv", seed=7))
    b = metrics.embed(imgs, Embedder("randconv", seed=7))
    c = metrics.embed(imgs, Embedder("randconv", seed=8))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (4, metrics.RANDCONV_DIM)
    assert np.any(a != c)


def test_embedder_rejects_non_square():
    with pytest.raises(ValueError):
        metrics.embed(np.zeros((1, 8, 16, 1)), Embedder("pixels"))


# -- moments -----------------------------------------------------------------


def test_moments_hand_example_2d():
    m = gaussian_moments(np.array([[0.0, 0.0], [2.0, 2.0]]))
    np.testing.assert_array_equal(m.mu, [1.0, 1.0])
    np.testing.assert_array_equal(m.sigma.entries, [[2.0, 2.0], [2.0, 2.0]])


def test_moments_hand_example_1d():
    m = gaussian_moments(np.array([[0.0], [2.0]]))
    assert m.mu[0] == 1.0
    assert m.sigma.entries[0, 0] == 2.0


def test_moments_identical_features_zero_sigma():
    m = gaussian_moments(np.ones((5, 3)))
    np.testing.assert_array_equal(m.sigma.entries, np.zeros((3, 3)))


# -- fid ---------------------------------------------------------------------


def test_fid_self_distance_zero():
    f = gaussian_features(0, 200, 8)
    m = gaussian_moments(f)
    assert metrics.fid(m, m) <= 1e-8


def test_fid_1d_mean_shift():
    from adagan.linalg import SpdMatrix
    from adagan.metrics import GaussianMoments

    r = GaussianMoments(np.array([0.0]), SpdMatrix([[1.0]]), 100)
    g = GaussianMoments(np.array([1.0]), SpdMatrix([[1.0]]), 100)
    assert abs(metrics.fid(r, g) - 1.0) <= 1e-8


def test_fid_1d_variance_gap():
    from adagan.linalg import SpdMatrix
    from adagan.metrics import GaussianMoments

    r = GaussianMoments(np.array([0.0]), SpdMatrix([[4.0]]), 100)
    g = GaussianMoments(np.array([0.0]), SpdMatrix([[1.0]]), 100)
    assert abs(metrics.fid(r, g) - 1.0) <= 1e-8


def test_fid_diagonal_closed_form():
    from adagan.linalg import SpdMatrix
    from adagan.metrics import GaussianMoments

    r = GaussianMoments(np.zeros(2), SpdMatrix(np.diag([4.0, 9.0])), 10)
    g = GaussianMoments(np.zeros(2), SpdMatrix(np.eye(2)), 10)
    # 13 + 2 - 2*(2 + 3) = 5
    assert abs(metrics.fid(r, g) - 5.0) <= 1e-8


def test_fid_symmetric():
    a = gaussian_moments(gaussian_features(1, 300, 6))
    b = gaussian_moments(gaussian_features(2, 300, 6, mu=0.3, sd=1.4))
    assert abs(metrics.fid(a, b) - metrics.fid(b, a)) <= 1e-8


# -- kid ---------------------------------------------------------------------


def test_poly_kernel_values():
    assert metrics.poly_kernel(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
    assert metrics.poly_kernel(np.ones(3), np.ones(3)) == 8.0
    assert abs(metrics.poly_kernel(np.ones(3), np.array([2.0, 0.0, 1.0])) - 8.0) < 1e-12


def test_mmd2_hand_example():
    # k(a,a)=k(b,b)=8, k(a,b)=1 -> 1 + 1 - (2/4)(8+1+1+8) = -7
    a = np.array([1.0, 1.0])
    b = np.array([1.0, -1.0])
    x = np.stack([a, b])
    assert metrics.mmd2_unbiased(x, x.copy()) == -7.0


def test_kid_block_matches_brute_force():
    # one block covering the whole set == direct double-loop estimator
    fr = gaussian_features(5, 24, 4)
    fg = gaussian_features(6, 24, 4, mu=0.2)
    blocked = metrics.kid(fr, fg, block_size=24, n_blocks=1, seed=0)

    m = 24
    kxx = sum(
        metrics.poly_kernel(fr[i], fr[j])
        for i in range(m) for j in range(m) if i != j
    ) / (m * (m - 1))
    kyy = sum(
        metrics.poly_kernel(fg[i], fg[j])
        for i in range(m) for j in range(m) if i != j
    ) / (m * (m - 1))
    kxy = sum(
        metrics.poly_kernel(fr[i], fg[j]) for i in range(m) for j in range(m)
    ) / (m * m)
    assert abs(blocked - (kxx + kyy - 2 * kxy)) <= 1e-12


def test_kid_deterministic_in_seed():
    fr = gaussian_features(7, 60, 5)
    fg = gaussian_features(8, 60, 5)
    a = metrics.kid(fr, fg, block_size=20, n_blocks=4, seed=3)
    b = metrics.kid(fr, fg, block_size=20, n_blocks=4, seed=3)
    c = metrics.kid(fr, fg, block_size=20, n_blocks=4, seed=4)
    assert a == b
    assert a != c


def test_kid_needs_enough_features():
    f = gaussian_features(9, 10, 3)
    with pytest.raises(ValueError):
        metrics.kid(f, f, block_size=11)


def test_feature_file_round_trip(tmp_path):
    f = gaussian_features(10, 17, 9)
    path = tmp_path / "x.feat"
    metrics.save_features(path, f)
    np.testing.assert_array_equal(metrics.load_features(path), f)


def test_feature_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.feat"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ValueError):
        metrics.load_features(path)
