"""Checkpoint serialization: a named 64-bit tensor table plus JSON state.

Layout (little-endian throughout): magic "STCK", version u16, JSON
metadata block (u32 length + UTF-8 bytes, keys sorted so identical state
serializes to identical bytes), tensor count u32, then per tensor: name
(u16 length + UTF-8), rank u8, dims u32 each, raw float64 data. The
metadata carries everything training needs to resume bit-exactly:
config text and digest, counters, controller and path-length state,
and optimizer step counts (randomness is re-derived from counters, not
stored).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .datakit import DataError

CHECKPOINT_MAGIC = b"STCK"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<H", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            # not ascontiguousarray: that call promotes 0-d arrays to (1,),
            # and tobytes() already emits C order for any layout
            data = np.asarray(arr, dtype="<f8")
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(data.tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise DataError(f"{path}: cannot open checkpoint: {exc}") from exc
    with fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        try:
            meta = json.loads(fh.read(meta_len).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: corrupt checkpoint metadata") from exc
        (count,) = struct.unpack("<I", fh.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            raw = fh.read(2)
            if len(raw) < 2:
                raise DataError(f"{path}: truncated checkpoint")
            (name_len,) = struct.unpack("<H", raw)
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(
                struct.unpack("<I", fh.read(4))[0] for _ in range(ndim)
            )
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(n_items * 8), dtype="<f8")
            if data.size != n_items:
                raise DataError(f"{path}: truncated tensor {name!r}")
            tensors[name] = data.reshape(shape).astype(np.float64)
    return meta, tensors
