"""Record container, image codecs, resize, split, and toy corpora."""

import struct

import numpy as np
import pytest

from adagan import rng
from adagan.corpora import KINDS, build_toy_corpus, toy_image
from adagan.datakit import (
    DataError,
    RecordReader,
    RecordWriter,
    build_records,
    decode_image,
    float_to_pixels,
    pixels_to_float,
    read_pnm,
    resize,
    round_half_up_u8,
    split,
    to_grayscale,
    write_pgm,
)

HEADER_SIZE = 17
RECORD_HEAD_SIZE = 6


def _write_records(path, images, labels):
    res = images[0].shape[0]
    with RecordWriter(path, res) as writer:
        for label, img in zip(labels, images):
            writer.add(label, img)


def _random_images(n, res, seed=0):
    g = rng.stream(seed, "datakit.images")
    return [g.integers(0, 256, (res, res), dtype=np.uint8) for _ in range(n)]


# ---------------------------------------------------------------------------
# record container


def test_record_round_trip_exact(tmp_path):
    path = tmp_path / "set.rec"
    images = _random_images(5, 8)
    labels = [3, 0, 1, 255, 7]
    _write_records(path, images, labels)
    with RecordReader(path) as reader:
        assert reader.count == 5
        assert reader.resolution == 8
        assert reader.channels == 1
        for i in range(5):
            label, pixels = reader.read(i)
            assert label == labels[i]
            np.testing.assert_array_equal(pixels[:, :, 0], images[i])


def test_record_labels_match_reads(tmp_path):
    path = tmp_path / "set.rec"
    labels = [2, 2, 0, 1, 0, 1]
    _write_records(path, _random_images(6, 4), labels)
    with RecordReader(path) as reader:
        np.testing.assert_array_equal(reader.labels(), labels)
        got, stack = reader.load_all()
        np.testing.assert_array_equal(got, labels)
        assert stack.shape == (6, 4, 4, 1)


def test_record_index_out_of_range(tmp_path):
    path = tmp_path / "set.rec"
    _write_records(path, _random_images(2, 4), [0, 1])
    with RecordReader(path) as reader:
        with pytest.raises(IndexError):
            reader.read(2)
        with pytest.raises(IndexError):
            reader.read(-1)


def test_record_writer_rejects_wrong_shape(tmp_path):
    with RecordWriter(tmp_path / "set.rec", 8) as writer:
        with pytest.raises(DataError):
            writer.add(0, np.zeros((4, 4), dtype=np.uint8))


def test_record_payload_corruption_detected(tmp_path):
    path = tmp_path / "set.rec"
    _write_records(path, _random_images(3, 8), [0, 1, 0])
    # flip one pixel byte of record 1; the per-record CRC must catch it
    offset = HEADER_SIZE + (RECORD_HEAD_SIZE + 64 + 4) + RECORD_HEAD_SIZE + 10
    raw = bytearray(path.read_bytes())
    raw[offset] ^= 0xFF
    path.write_bytes(bytes(raw))
    with RecordReader(path) as reader:
        _ = reader.read(0)
        with pytest.raises(DataError, match="CRC"):
            reader.read(1)
        _ = reader.read(2)


def test_record_bad_magic(tmp_path):
    path = tmp_path / "set.rec"
    _write_records(path, _random_images(1, 4), [0])
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError, match="magic"):
        RecordReader(path)


def test_record_bad_version(tmp_path):
    path = tmp_path / "set.rec"
    _write_records(path, _random_images(1, 4), [0])
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError, match="version"):
        RecordReader(path)


def test_record_truncation_detected(tmp_path):
    path = tmp_path / "set.rec"
    _write_records(path, _random_images(2, 4), [0, 1])
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(DataError, match="size"):
        RecordReader(path)


def test_record_short_header(tmp_path):
    path = tmp_path / "set.rec"
    path.write_bytes(b"BTRC")
    with pytest.raises(DataError, match="short header"):
        RecordReader(path)


# ---------------------------------------------------------------------------
# pixel conversions


def test_round_half_up_ties_and_clip():
    vals = np.array([-3.0, -0.5, 0.4, 0.5, 1.5, 254.5, 300.0])
    out = round_half_up_u8(vals)
    np.testing.assert_array_equal(out, [0, 0, 0, 1, 2, 255, 255])
    assert out.dtype == np.uint8


def test_pixel_float_round_trip():
    pixels = np.arange(256, dtype=np.uint8).reshape(16, 16)
    floats = pixels_to_float(pixels)
    assert floats.min() == -1.0 and floats.max() == 1.0
    np.testing.assert_array_equal(float_to_pixels(floats), pixels)


def test_float_to_pixels_endpoints():
    np.testing.assert_array_equal(
        float_to_pixels(np.array([-1.5, -1.0, 0.0, 1.0, 2.0])),
        [0, 0, 128, 255, 255],
    )


def test_to_grayscale_passthrough_and_luma():
    gray = np.arange(16, dtype=np.uint8).reshape(4, 4)
    assert to_grayscale(gray) is gray
    red = np.zeros((2, 2, 3), dtype=np.uint8)
    red[:, :, 0] = 255
    np.testing.assert_array_equal(to_grayscale(red), np.full((2, 2), 76))
    white = np.full((2, 2, 3), 255, dtype=np.uint8)
    np.testing.assert_array_equal(to_grayscale(white), np.full((2, 2), 255))
    with pytest.raises(DataError):
        to_grayscale(np.zeros((2, 2, 2), dtype=np.uint8))


# ---------------------------------------------------------------------------
# resize


def test_resize_identity_returns_copy():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4)
    out = resize(img, 4)
    np.testing.assert_array_equal(out, img)
    out[0, 0] = 99
    assert img[0, 0] == 0


def test_resize_upscale_gradient():
    img = np.array([[0, 0], [255, 255]], dtype=np.uint8)
    out = resize(img, 4)
    assert out.shape == (4, 4)
    # corner-aligned: the top row stays 0, the bottom stays 255, and the
    # interior interpolates monotonically between them
    np.testing.assert_array_equal(out[0], [0, 0, 0, 0])
    np.testing.assert_array_equal(out[3], [255, 255, 255, 255])
    for col in range(4):
        column = out[:, col].astype(int)
        assert np.all(np.diff(column) >= 0)
        assert 0 < column[1] < column[2] < 255


def test_resize_constant_stays_constant():
    img = np.full((5, 5), 137, dtype=np.uint8)
    for target in (2, 8, 16):
        np.testing.assert_array_equal(resize(img, target), np.full((target, target), 137))


def test_resize_preserves_corners():
    g = rng.stream(1, "datakit.corners")
    img = g.integers(0, 256, (6, 6), dtype=np.uint8)
    out = resize(img, 16)
    assert out[0, 0] == img[0, 0]
    assert out[0, -1] == img[0, -1]
    assert out[-1, 0] == img[-1, 0]
    assert out[-1, -1] == img[-1, -1]


def test_resize_multichannel_and_errors():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    assert resize(img, 8).shape == (8, 8, 3)
    with pytest.raises(DataError):
        resize(np.zeros((0, 4), dtype=np.uint8), 4)
    with pytest.raises(DataError):
        resize(np.zeros((4, 4), dtype=np.uint8), 0)


# ---------------------------------------------------------------------------
# codecs


def test_pgm_round_trip(tmp_path):
    path = tmp_path / "img.pgm"
    img = _random_images(1, 9, seed=2)[0]
    write_pgm(path, img)
    np.testing.assert_array_equal(read_pnm(path), img)
    # single-channel 3-D input squeezes to the same file
    write_pgm(path, img[:, :, None])
    np.testing.assert_array_equal(read_pnm(path), img)


def test_write_pgm_rejects_bad_input(tmp_path):
    with pytest.raises(DataError):
        write_pgm(tmp_path / "x.pgm", np.zeros((4, 4), dtype=np.float64))
    with pytest.raises(DataError):
        write_pgm(tmp_path / "x.pgm", np.zeros((4, 4, 3), dtype=np.uint8))


def test_read_ppm_color(tmp_path):
    path = tmp_path / "img.ppm"
    pixels = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    path.write_bytes(b"P6\n3 2\n255\n" + pixels.tobytes())
    np.testing.assert_array_equal(read_pnm(path), pixels)


def test_read_pnm_handles_comments(tmp_path):
    path = tmp_path / "img.pgm"
    path.write_bytes(b"P5\n# a comment line\n2 2\n255\n\x01\x02\x03\x04")
    np.testing.assert_array_equal(read_pnm(path), [[1, 2], [3, 4]])


def test_read_pnm_rejects_garbage(tmp_path):
    bad_magic = tmp_path / "a.pgm"
    bad_magic.write_bytes(b"P7\n2 2\n255\n\x00\x00\x00\x00")
    with pytest.raises(DataError, match="magic"):
        read_pnm(bad_magic)
    deep = tmp_path / "b.pgm"
    deep.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
    with pytest.raises(DataError, match="8-bit"):
        read_pnm(deep)
    short = tmp_path / "c.pgm"
    short.write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(DataError, match="truncated"):
        read_pnm(short)


def test_decode_image_dispatch(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm(path, np.zeros((3, 3), dtype=np.uint8))
    assert decode_image(path).shape == (3, 3)
    with pytest.raises(DataError, match="format"):
        decode_image(tmp_path / "img.tiff")


# ---------------------------------------------------------------------------
# split


def _labeled_records(tmp_path, per_class, n_classes=2, res=4):
    path = tmp_path / "labeled.rec"
    images = _random_images(per_class * n_classes, res, seed=3)
    labels = [i % n_classes for i in range(per_class * n_classes)]
    _write_records(path, images, labels)
    return path, np.asarray(labels)


def test_split_zero_fraction_keeps_everything(tmp_path):
    path, _ = _labeled_records(tmp_path, per_class=5)
    train, val = split(path, 0.0, seed=0)
    np.testing.assert_array_equal(train, np.arange(10))
    assert val.size == 0


def test_split_stratified_counts(tmp_path):
    path, labels = _labeled_records(tmp_path, per_class=10)
    train, val = split(path, 0.2, seed=0)
    assert val.size == 4 and train.size == 16
    for label in (0, 1):
        assert np.sum(labels[val] == label) == 2
        assert np.sum(labels[train] == label) == 8


def test_split_disjoint_and_exhaustive(tmp_path):
    path, _ = _labeled_records(tmp_path, per_class=7, n_classes=3)
    train, val = split(path, 0.3, seed=5)
    combined = np.sort(np.concatenate([train, val]))
    np.testing.assert_array_equal(combined, np.arange(21))
    assert np.intersect1d(train, val).size == 0


def test_split_seed_determinism(tmp_path):
    path, _ = _labeled_records(tmp_path, per_class=20)
    t0, v0 = split(path, 0.25, seed=11)
    t1, v1 = split(path, 0.25, seed=11)
    np.testing.assert_array_equal(t0, t1)
    np.testing.assert_array_equal(v0, v1)
    _, v2 = split(path, 0.25, seed=12)
    assert not np.array_equal(v0, v2)


def test_split_accepts_open_reader(tmp_path):
    path, _ = _labeled_records(tmp_path, per_class=5)
    with RecordReader(path) as reader:
        train, val = split(reader, 0.2, seed=0)
    assert train.size + val.size == 10


def test_split_fraction_validation(tmp_path):
    path, _ = _labeled_records(tmp_path, per_class=2)
    with pytest.raises(ValueError):
        split(path, -0.1, seed=0)
    with pytest.raises(ValueError):
        split(path, 1.0, seed=0)


# ---------------------------------------------------------------------------
# directory ingestion


def _class_tree(tmp_path, counts, res=6):
    root = tmp_path / "raw"
    g = rng.stream(9, "datakit.tree")
    for name, count in counts.items():
        sub = root / name
        sub.mkdir(parents=True)
        for i in range(count):
            write_pgm(sub / f"img{i}.pgm", g.integers(0, 256, (res, res), dtype=np.uint8))
    return root


def test_build_records_from_tree(tmp_path):
    root = _class_tree(tmp_path, {"cats": 2, "dogs": 2, "emus": 2})
    out = tmp_path / "built.rec"
    summary = build_records(root, None, 6, out)
    assert summary.count == 6
    assert summary.per_class == {0: 2, 1: 2, 2: 2}
    assert summary.skipped == ()
    with RecordReader(out) as reader:
        np.testing.assert_array_equal(reader.labels(), [0, 0, 1, 1, 2, 2])


def test_build_records_sorted_class_order(tmp_path):
    # labels derive from subdirectory names in sorted order
    root = _class_tree(tmp_path, {"zebra": 1, "ant": 1})
    summary = build_records(root, None, 6, tmp_path / "o.rec")
    assert summary.per_class == {0: 1, 1: 1}
    with RecordReader(tmp_path / "o.rec") as reader:
        np.testing.assert_array_equal(reader.labels(), [0, 1])


def test_build_records_deterministic(tmp_path):
    root = _class_tree(tmp_path, {"a": 3, "b": 2})
    build_records(root, None, 6, tmp_path / "one.rec")
    build_records(root, None, 6, tmp_path / "two.rec")
    assert (tmp_path / "one.rec").read_bytes() == (tmp_path / "two.rec").read_bytes()


def test_build_records_skips_undecodable(tmp_path):
    root = _class_tree(tmp_path, {"a": 2, "b": 2})
    bad = root / "a" / "broken.pgm"
    bad.write_bytes(b"not an image at all")
    summary = build_records(root, None, 6, tmp_path / "o.rec")
    assert summary.count == 4
    assert summary.per_class == {0: 2, 1: 2}
    assert summary.skipped == (str(bad),)


def test_build_records_resizes_to_target(tmp_path):
    root = _class_tree(tmp_path, {"a": 2}, res=4)
    build_records(root, None, 8, tmp_path / "o.rec")
    with RecordReader(tmp_path / "o.rec") as reader:
        assert reader.resolution == 8
        _, pixels = reader.read(0)
        assert pixels.shape == (8, 8, 1)


def test_build_records_errors(tmp_path):
    with pytest.raises(DataError, match="not a directory"):
        build_records(tmp_path / "nope", None, 8, tmp_path / "o.rec")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError, match="class"):
        build_records(empty, None, 8, tmp_path / "o.rec")
    bare = tmp_path / "bare"
    (bare / "a").mkdir(parents=True)
    with pytest.raises(DataError, match="no images"):
        build_records(bare, None, 8, tmp_path / "o.rec")


# ---------------------------------------------------------------------------
# toy corpora


def test_toy_corpus_round_trip(tmp_path):
    out = tmp_path / "toy.rec"
    summary = build_toy_corpus("blobs2", 8, 16, seed=0, out_path=out)
    assert summary.count == 8
    assert summary.per_class == {0: 4, 1: 4}
    with RecordReader(out) as reader:
        np.testing.assert_array_equal(reader.labels(), [0, 1] * 4)
        assert reader.resolution == 16


def test_toy_corpus_deterministic(tmp_path):
    build_toy_corpus("rings", 6, 16, seed=3, out_path=tmp_path / "a.rec")
    build_toy_corpus("rings", 6, 16, seed=3, out_path=tmp_path / "b.rec")
    build_toy_corpus("rings", 6, 16, seed=4, out_path=tmp_path / "c.rec")
    assert (tmp_path / "a.rec").read_bytes() == (tmp_path / "b.rec").read_bytes()
    assert (tmp_path / "a.rec").read_bytes() != (tmp_path / "c.rec").read_bytes()


def test_toy_image_families():
    for kind in KINDS:
        img = toy_image(kind, 0, rng.stream(0, "toy", kind), 16)
        assert img.shape == (16, 16)
        assert img.dtype == np.uint8
    with pytest.raises(ValueError, match="unknown corpus"):
        toy_image("plaid", 0, rng.stream(0, "toy"), 16)
    with pytest.raises(ValueError):
        build_toy_corpus("blobs2", 1, 16, seed=0, out_path="unused.rec")


def test_blob_modes_occupy_different_quadrants():
    res = 32
    coords = np.arange(res, dtype=np.float64)
    centroids = []
    for mode in (0, 1):
        img = toy_image("blobs2", mode, rng.stream(5, "toy.blob", mode), res).astype(np.float64)
        total = img.sum()
        cy = float((img.sum(axis=1) * coords).sum() / total)
        cx = float((img.sum(axis=0) * coords).sum() / total)
        centroids.append((cy, cx))
    assert centroids[0][0] < res / 2 < centroids[1][0]
    assert centroids[0][1] < res / 2 < centroids[1][1]
