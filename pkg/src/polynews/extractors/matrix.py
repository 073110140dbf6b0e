"""FMX1 feature-matrix files and LBL1 companion label files.

FMX1 layout (little-endian):

    magic   4 bytes  b"FMX1"
    u32     version, currently 1
    u32     n_rows
    u32     n_cols
    u32     metadata_len
    bytes   metadata_len bytes of UTF-8 JSON; must contain the keys
            {extractor, train_corpus, eval_corpus, attribute, repetition,
            fold}; writers may add further keys
    f32[]   n_rows * n_cols IEEE-754 floats, row-major

LBL1 layout: magic b"LBL1", u32 n_rows, then per row one u8 class and one
u8 language code (0 = eng, 1 = spa).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import MatrixLoadError, ValidationError

FMX_MAGIC = b"FMX1"
FMX_VERSION = 1
LBL_MAGIC = b"LBL1"

REQUIRED_META = ("extractor", "train_corpus", "eval_corpus", "attribute", "repetition", "fold")


@dataclass
class FeatureMatrix:
    """Dense row-major float32 feature matrix plus provenance metadata."""

    values: np.ndarray
    meta: dict

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.values.shape[1])


def make_meta(
    extractor: str,
    train_corpus: str = "unspecified",
    eval_corpus: str = "unspecified",
    attribute: str = "text",
    repetition: int = -1,
    fold: int = -1,
    **extra,
) -> dict:
    meta = {
        "extractor": extractor,
        "train_corpus": train_corpus,
        "eval_corpus": eval_corpus,
        "attribute": attribute,
        "repetition": int(repetition),
        "fold": int(fold),
    }
    meta.update(extra)
    return meta


def _validate(m: FeatureMatrix) -> None:
    if m.values.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {m.values.shape}")
    if not np.isfinite(m.values).all():
        raise ValidationError("feature matrix contains non-finite values; refusing to save")
    missing = [k for k in REQUIRED_META if k not in m.meta]
    if missing:
        raise ValidationError(f"feature matrix metadata missing keys: {missing}")


def save_matrix(m: FeatureMatrix, path) -> None:
    """Write `m` atomically; values are stored as little-endian float32."""
    _validate(m)
    values = np.ascontiguousarray(m.values, dtype="<f4")
    meta_bytes = json.dumps(m.meta, sort_keys=True).encode("utf-8")
    header = struct.pack(
        "<4sIIII", FMX_MAGIC, FMX_VERSION, values.shape[0], values.shape[1], len(meta_bytes)
    )
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(meta_bytes)
        fh.write(values.tobytes())
    os.replace(tmp, path)


def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise MatrixLoadError(f"{path}: unexpected EOF while reading {what}")
    return buf


def load_matrix(path, expected_meta: dict | None = None) -> FeatureMatrix:
    """Read an FMX1 file, checking structure, finiteness, and provenance.

    `expected_meta` entries are compared against the stored metadata; any
    mismatch raises MatrixLoadError (the provenance guard).
    """
    try:
        with open(path, "rb") as fh:
            head = _read_exact(fh, struct.calcsize("<4sIIII"), path, "header")
            magic, version, n_rows, n_cols, meta_len = struct.unpack("<4sIIII", head)
            if magic != FMX_MAGIC:
                raise MatrixLoadError(f"{path}: bad magic {magic!r}, not an FMX1 file")
            if version != FMX_VERSION:
                raise MatrixLoadError(f"{path}: unsupported FMX1 version {version}")
            meta_bytes = _read_exact(fh, meta_len, path, "metadata")
            try:
                meta = json.loads(meta_bytes.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise MatrixLoadError(f"{path}: corrupt metadata block: {exc}") from exc
            data = _read_exact(fh, 4 * n_rows * n_cols, path, "matrix values")
            trailing = fh.read(1)
            if trailing:
                raise MatrixLoadError(f"{path}: trailing bytes after matrix values")
    except FileNotFoundError as exc:
        raise MatrixLoadError(f"{path}: file not found") from exc

    missing = [k for k in REQUIRED_META if k not in meta]
    if missing:
        raise MatrixLoadError(f"{path}: metadata missing keys {missing}")
    values = np.frombuffer(data, dtype="<f4").reshape(n_rows, n_cols).copy()
    if not np.isfinite(values).all():
        raise MatrixLoadError(f"{path}: matrix contains non-finite values")
    if expected_meta:
        for key, want in expected_meta.items():
            got = meta.get(key)
            if got != want:
                raise MatrixLoadError(
                    f"{path}: provenance mismatch for {key!r}: file has {got!r}, expected {want!r}"
                )
    return FeatureMatrix(values=values, meta=meta)


def load_embeddings(path, expected_meta: dict | None = None) -> FeatureMatrix:
    """Load an externally produced embedding matrix (FMX1) with provenance checks."""
    return load_matrix(path, expected_meta=expected_meta)


def save_labels(path, classes, languages) -> None:
    """Write the LBL1 companion file (u8 class, u8 language per row)."""
    classes = np.asarray(classes, dtype=np.uint8)
    languages = np.asarray(languages, dtype=np.uint8)
    if classes.shape != languages.shape or classes.ndim != 1:
        raise ValidationError("classes and languages must be equal-length 1-D arrays")
    interleaved = np.empty(2 * classes.size, dtype=np.uint8)
    interleaved[0::2] = classes
    interleaved[1::2] = languages
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<4sI", LBL_MAGIC, classes.size))
        fh.write(interleaved.tobytes())
    os.replace(tmp, path)


def load_labels(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        head = _read_exact(fh, struct.calcsize("<4sI"), path, "header")
        magic, n_rows = struct.unpack("<4sI", head)
        if magic != LBL_MAGIC:
            raise MatrixLoadError(f"{path}: bad magic {magic!r}, not an LBL1 file")
        data = _read_exact(fh, 2 * n_rows, path, "label rows")
    interleaved = np.frombuffer(data, dtype=np.uint8)
    return interleaved[0::2].copy(), interleaved[1::2].copy()
