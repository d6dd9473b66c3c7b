"""Binary matrix/label files and small text outputs.

``MXMAT1``: 6-byte magic, u32 rows, u32 cols, then row-major float64
little-endian values.  ``MXLAB1``: 6-byte magic, u32 count, then that
many u32 label values.  Both round-trip bit-exactly; malformed files
raise FormatError with the byte offset of the failure.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ContractError, FormatError
from .data import Dataset

MATRIX_MAGIC = b"MXMAT1"
LABELS_MAGIC = b"MXLAB1"


def save_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ContractError(f"save_matrix expects a 2-D array, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 6 or buf[:6] != MATRIX_MAGIC:
        raise FormatError(f"bad matrix magic in {path}", offset=0)
    if len(buf) < 14:
        raise FormatError("matrix header truncated", offset=len(buf))
    rows, cols = struct.unpack("<II", buf[6:14])
    expected = 14 + rows * cols * 8
    if len(buf) < expected:
        raise FormatError(
            f"matrix payload truncated: need {expected} bytes, have {len(buf)}",
            offset=len(buf),
        )
    if len(buf) > expected:
        raise FormatError("trailing bytes after matrix payload", offset=expected)
    data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=14)
    return data.astype(np.float64).reshape(rows, cols)


def save_labels(path, labels) -> None:
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if lab.size and (lab.min() < 0 or lab.max() >= 2**32):
        raise ContractError("labels must fit in u32")
    with open(path, "wb") as fh:
        fh.write(LABELS_MAGIC)
        fh.write(struct.pack("<I", lab.size))
        fh.write(lab.astype("<u4").tobytes())


def load_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 6 or buf[:6] != LABELS_MAGIC:
        raise FormatError(f"bad labels magic in {path}", offset=0)
    if len(buf) < 10:
        raise FormatError("labels header truncated", offset=len(buf))
    (count,) = struct.unpack("<I", buf[6:10])
    expected = 10 + count * 4
    if len(buf) < expected:
        raise FormatError(
            f"labels payload truncated: need {expected} bytes, have {len(buf)}",
            offset=len(buf),
        )
    if len(buf) > expected:
        raise FormatError("trailing bytes after labels payload", offset=expected)
    return np.frombuffer(buf, dtype="<u4", count=count, offset=10).astype(np.int64)


def save_dataset(features_path, dataset: Dataset, labels_path=None) -> None:
    save_matrix(features_path, dataset.features)
    if labels_path is not None:
        if dataset.labels is None:
            raise ContractError("dataset has no labels to save")
        save_labels(labels_path, dataset.labels)


def load_dataset(features_path, labels_path=None) -> Dataset:
    features = load_matrix(features_path)
    labels = load_labels(labels_path) if labels_path is not None else None
    return Dataset(features, labels)


def write_assignments(path, assignments) -> None:
    """One cluster index per line."""
    a = np.asarray(assignments, dtype=np.int64).reshape(-1)
    with open(path, "w") as fh:
        for v in a:
            fh.write(f"{int(v)}\n")
