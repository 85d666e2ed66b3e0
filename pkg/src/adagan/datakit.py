"""Dataset ingestion and the binary record container.

Input images (binary PGM/PPM, optionally PNG when Pillow is installed)
are converted to grayscale, resized to the training resolution with
corner-aligned bilinear interpolation, and packed into a seekable
record file whose pixel payloads are CRC-checked on read. Splitting into
train/validation is seeded and stratified per class.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng

log = logging.getLogger(__name__)

RECORD_MAGIC = b"BTRC"
RECORD_VERSION = 1
HEADER_FMT = "<4sHQHB"
HEADER_SIZE = struct.calcsize(HEADER_FMT)
RECORD_HEAD_FMT = "<BHHB"
RECORD_HEAD_SIZE = struct.calcsize(RECORD_HEAD_FMT)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm", ".png")


class DataError(ValueError):
    """Corrupt, missing, or inconsistent dataset content."""


def round_half_up_u8(values: np.ndarray) -> np.ndarray:
    """Deterministic float→u8 conversion: ties round up, then clip."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# codecs


def _read_pnm_token(fh) -> bytes:
    token = b""
    while True:
        ch = fh.read(1)
        if not ch:
            raise DataError("truncated PNM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pnm(path) -> np.ndarray:
    """Binary PGM (P5) → (H, W) u8; binary PPM (P6) → (H, W, 3) u8."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
        if magic not in (b"P5", b"P6"):
            raise DataError(f"{path}: unsupported PNM magic {magic!r}")
        width = int(_read_pnm_token(fh))
        height = int(_read_pnm_token(fh))
        maxval = int(_read_pnm_token(fh))
        if not 0 < maxval < 256:
            raise DataError(f"{path}: only 8-bit PNM supported (maxval {maxval})")
        channels = 1 if magic == b"P5" else 3
        data = fh.read(width * height * channels)
        if len(data) != width * height * channels:
            raise DataError(f"{path}: truncated pixel data")
    arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels)
    return arr[:, :, 0] if channels == 1 else arr


def write_pgm(path, image: np.ndarray) -> None:
    """Write an (H, W) u8 array as binary PGM."""
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim != 2 or img.dtype != np.uint8:
        raise DataError("write_pgm expects a 2-D u8 array")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def _read_png(path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:
        raise DataError(
            f"{path}: PNG support requires the optional Pillow dependency"
        ) from exc
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8)


def decode_image(path) -> np.ndarray:
    """Decode to u8 grayscale (H, W) or color (H, W, 3)."""
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        return read_pnm(path)
    if suffix == ".png":
        return _read_png(path)
    raise DataError(f"{path}: unsupported image format {suffix!r}")


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Collapse 3-channel u8 to luminance u8; pass grayscale through."""
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        y = (
            LUMA_WEIGHTS[0] * image[:, :, 0]
            + LUMA_WEIGHTS[1] * image[:, :, 1]
            + LUMA_WEIGHTS[2] * image[:, :, 2]
        )
        return round_half_up_u8(y)
    raise DataError(f"cannot convert shape {image.shape} to grayscale")


# ---------------------------------------------------------------------------
# resize


def _axis_weights(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if dst == 1 or src == 1:
        pos = np.zeros(dst)
    else:
        pos = np.arange(dst) * ((src - 1) / (dst - 1))
    lo = np.minimum(np.floor(pos).astype(np.int64), src - 1)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def resize(image: np.ndarray, target_resolution: int) -> np.ndarray:
    """Corner-aligned bilinear resample of a u8 image to a square target."""
    img = np.asarray(image)
    if img.size == 0:
        raise DataError("cannot resize an empty image")
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w, _ = img.shape
    t = int(target_resolution)
    if t < 1:
        raise DataError("target resolution must be positive")
    if h == t and w == t:
        return image.copy()
    x = img.astype(np.float64)
    lo, hi, f = _axis_weights(h, t)
    x = x[lo, :, :] * (1.0 - f)[:, None, None] + x[hi, :, :] * f[:, None, None]
    lo, hi, f = _axis_weights(w, t)
    x = x[:, lo, :] * (1.0 - f)[None, :, None] + x[:, hi, :] * f[None, :, None]
    out = round_half_up_u8(x)
    return out[:, :, 0] if squeeze else out


# ---------------------------------------------------------------------------
# record container


@dataclass(frozen=True)
class RecordSummary:
    count: int
    per_class: dict[int, int]
    skipped: tuple[str, ...]
    resolution: int
    path: str


class RecordWriter:
    """Streams fixed-size records; patches the count into the header on close."""

    def __init__(self, path, resolution: int, channels: int = 1):
        self.path = str(path)
        self.resolution = int(resolution)
        self.channels = int(channels)
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(
            struct.pack(HEADER_FMT, RECORD_MAGIC, RECORD_VERSION, 0,
                        self.resolution, self.channels)
        )

    def add(self, label: int, pixels: np.ndarray) -> None:
        img = np.asarray(pixels, dtype=np.uint8)
        if img.ndim == 2:
            img = img[:, :, None]
        if img.shape != (self.resolution, self.resolution, self.channels):
            raise DataError(f"record shape {img.shape} does not match header")
        payload = img.tobytes()
        self._fh.write(
            struct.pack(RECORD_HEAD_FMT, int(label), self.resolution,
                        self.resolution, self.channels)
        )
        self._fh.write(payload)
        self._fh.write(struct.pack("<I", zlib.crc32(payload)))
        self.count += 1

    def close(self) -> None:
        self._fh.seek(0)
        self._fh.write(
            struct.pack(HEADER_FMT, RECORD_MAGIC, RECORD_VERSION, self.count,
                        self.resolution, self.channels)
        )
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RecordReader:
    """Random access over a record file with CRC verification per read."""

    def __init__(self, path):
        self.path = str(path)
        self._fh = open(path, "rb")
        header = self._fh.read(HEADER_SIZE)
        if len(header) < HEADER_SIZE:
            raise DataError(f"{path}: not a record file (short header)")
        magic, version, count, resolution, channels = struct.unpack(HEADER_FMT, header)
        if magic != RECORD_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != RECORD_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        self.count = count
        self.resolution = resolution
        self.channels = channels
        self._record_size = (
            RECORD_HEAD_SIZE + resolution * resolution * channels + 4
        )
        self._fh.seek(0, 2)
        expected = HEADER_SIZE + count * self._record_size
        if self._fh.tell() != expected:
            raise DataError(
                f"{path}: size {self._fh.tell()} != expected {expected} for"
                f" {count} records"
            )

    def read(self, index: int) -> tuple[int, np.ndarray]:
        """(label, u8 pixels (H, W, C)); raises DataError on CRC mismatch."""
        if not 0 <= index < self.count:
            raise IndexError(index)
        self._fh.seek(HEADER_SIZE + index * self._record_size)
        head = self._fh.read(RECORD_HEAD_SIZE)
        label, width, height, channels = struct.unpack(RECORD_HEAD_FMT, head)
        payload = self._fh.read(width * height * channels)
        (crc,) = struct.unpack("<I", self._fh.read(4))
        if zlib.crc32(payload) != crc:
            raise DataError(f"{self.path}: CRC mismatch in record {index}")
        img = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
        return label, img

    def labels(self) -> np.ndarray:
        out = np.empty(self.count, dtype=np.int64)
        for i in range(self.count):
            self._fh.seek(HEADER_SIZE + i * self._record_size)
            out[i] = self._fh.read(1)[0]
        return out

    def load_all(self) -> tuple[np.ndarray, np.ndarray]:
        """(labels, u8 pixel stack) for datasets that fit in memory."""
        labels = np.empty(self.count, dtype=np.int64)
        pixels = np.empty(
            (self.count, self.resolution, self.resolution, self.channels),
            dtype=np.uint8,
        )
        for i in range(self.count):
            labels[i], pixels[i] = self.read(i)
        return labels, pixels

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def pixels_to_float(pixels: np.ndarray) -> np.ndarray:
    """u8 [0, 255] → float64 [−1, 1]."""
    return pixels.astype(np.float64) / 127.5 - 1.0


def float_to_pixels(images: np.ndarray) -> np.ndarray:
    """float [−1, 1] → u8, round half up."""
    return round_half_up_u8((np.asarray(images, dtype=np.float64) + 1.0) * 127.5)


def build_records(input_dir, class_map, resolution: int, out_path) -> RecordSummary:
    """Pack every decodable image under input_dir's class subdirectories.

    class_map maps subdirectory name → label id; None derives it by
    enumerating subdirectory names in sorted order. Files are processed
    in lexicographic path order; undecodable files are skipped with a
    warning and listed in the summary.
    """
    root = Path(input_dir)
    if not root.is_dir():
        raise DataError(f"{input_dir}: not a directory")
    if class_map is None:
        class_map = {d.name: i for i, d in enumerate(sorted(p for p in root.iterdir()
                                                            if p.is_dir()))}
    if not class_map:
        raise DataError(f"{input_dir}: no class subdirectories")
    files = []
    for name in sorted(class_map):
        sub = root / name
        if not sub.is_dir():
            raise DataError(f"{sub}: class directory missing")
        files.extend(
            p for p in sub.rglob("*")
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
    files.sort(key=lambda p: p.relative_to(root).as_posix())
    if not files:
        raise DataError(f"{input_dir}: no images found")

    skipped: list[str] = []
    per_class: dict[int, int] = {label: 0 for label in sorted(class_map.values())}
    with RecordWriter(out_path, resolution) as writer:
        for path in files:
            label = class_map[path.relative_to(root).parts[0]]
            try:
                img = decode_image(path)
            except DataError as exc:
                log.warning("skipping %s: %s", path, exc)
                skipped.append(str(path))
                continue
            writer.add(label, resize(to_grayscale(img), resolution))
            per_class[label] += 1
        count = writer.count
    if count == 0:
        raise DataError(f"{input_dir}: every input file failed to decode")
    return RecordSummary(
        count=count,
        per_class=per_class,
        skipped=tuple(skipped),
        resolution=int(resolution),
        path=str(out_path),
    )


def split(record_file, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded stratified split into (train ids, val ids), disjoint and exhaustive."""
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError(f"val_fraction {val_fraction} outside [0, 1)")
    reader = record_file if isinstance(record_file, RecordReader) else RecordReader(record_file)
    labels = reader.labels()
    train: list[np.ndarray] = []
    val: list[np.ndarray] = []
    for label in np.unique(labels):
        ids = np.flatnonzero(labels == label)
        order = rng.stream(seed, "split", int(label)).permutation(len(ids))
        n_val = int(np.floor(len(ids) * val_fraction + 0.5))
        val.append(ids[order[:n_val]])
        train.append(ids[order[n_val:]])
    train_ids = np.sort(np.concatenate(train)) if train else np.empty(0, np.int64)
    val_ids = np.sort(np.concatenate(val)) if val else np.empty(0, np.int64)
    return train_ids, val_ids
