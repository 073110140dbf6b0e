"""FMX1 / LBL1 file writing (and reading, for self-checks).

Independent implementation of the interchange contract consumed by the
classification pipeline:

    FMX1: magic b"FMX1", u32 version=1, u32 n_rows, u32 n_cols,
          u32 metadata_len, UTF-8 JSON metadata, row-major f32 values
          (little-endian throughout). Metadata must carry extractor,
          train_corpus, eval_corpus, attribute, repetition, fold.
    LBL1: magic b"LBL1", u32 n_rows, per row u8 class then u8 language
          (0 = eng, 1 = spa).
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

FMX_MAGIC = b"FMX1"
FMX_VERSION = 1
LBL_MAGIC = b"LBL1"

REQUIRED_META = ("extractor", "train_corpus", "eval_corpus", "attribute", "repetition", "fold")


class FmxError(Exception):
    pass


def write_fmx(path, values: np.ndarray, meta: dict) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise FmxError(f"matrix must be 2-D, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise FmxError("refusing to write non-finite values")
    missing = [k for k in REQUIRED_META if k not in meta]
    if missing:
        raise FmxError(f"metadata missing required keys: {missing}")
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<4sIIII", FMX_MAGIC, FMX_VERSION, values.shape[0], values.shape[1], len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(values.tobytes())
    os.replace(tmp, path)


def read_fmx(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIII"))
        magic, version, n_rows, n_cols, meta_len = struct.unpack("<4sIIII", head)
        if magic != FMX_MAGIC or version != FMX_VERSION:
            raise FmxError(f"{path}: not an FMX1 v{FMX_VERSION} file")
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        data = fh.read(4 * n_rows * n_cols)
        if len(data) != 4 * n_rows * n_cols:
            raise FmxError(f"{path}: unexpected EOF")
    return np.frombuffer(data, dtype="<f4").reshape(n_rows, n_cols).copy(), meta


def write_lbl(path, classes, languages) -> None:
    classes = np.asarray(classes, dtype=np.uint8)
    languages = np.asarray(languages, dtype=np.uint8)
    interleaved = np.empty(2 * classes.size, dtype=np.uint8)
    interleaved[0::2] = classes
    interleaved[1::2] = languages
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<4sI", LBL_MAGIC, classes.size))
        fh.write(interleaved.tobytes())
    os.replace(tmp, path)
