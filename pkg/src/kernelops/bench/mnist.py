"""IDX image/label files, the bundled 8x8 digit set, and label encoding.

The IDX format is big-endian: a magic number (2051 for 3-D image files,
2049 for 1-D label files), the dimension sizes as unsigned 32-bit
integers, then the raw unsigned bytes.  Parse errors report the byte
offset at which the file stopped making sense.
"""

from __future__ import annotations

import gzip
import os
import struct

import numpy as np

__all__ = [
    "DataError",
    "read_idx_images",
    "read_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "one_hot",
    "load_mnist",
    "load_digits_bundled",
    "MNIST_DIR_ENV",
]

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
MNIST_DIR_ENV = "KERNELOPS_MNIST_DIR"


class DataError(Exception):
    """Missing, truncated or malformed data file."""


def _read_bytes(path: str) -> bytes:
    try:
        if path.endswith(".gz"):
            with gzip.open(path, "rb") as fh:
                return fh.read()
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _u32(buf: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(buf):
        raise DataError(
            f"{path}: truncated header at byte offset {offset} "
            f"(file has {len(buf)} bytes)"
        )
    return struct.unpack_from(">I", buf, offset)[0]


def read_idx_images(path: str) -> np.ndarray:
    """Parse an IDX image file to a uint8 array of shape (N, rows*cols)."""
    buf = _read_bytes(path)
    magic = _u32(buf, 0, path)
    if magic != IMAGE_MAGIC:
        raise DataError(
            f"{path}: bad magic {magic} at byte offset 0, expected {IMAGE_MAGIC}"
        )
    count = _u32(buf, 4, path)
    rows = _u32(buf, 8, path)
    cols = _u32(buf, 12, path)
    need = 16 + count * rows * cols
    if len(buf) < need:
        raise DataError(
            f"{path}: truncated pixel data at byte offset {len(buf)}, "
            f"expected {need} bytes"
        )
    data = np.frombuffer(buf, dtype=np.uint8, count=count * rows * cols, offset=16)
    return data.reshape(count, rows * cols).copy()


def read_idx_labels(path: str) -> np.ndarray:
    """Parse an IDX label file to a uint8 vector."""
    buf = _read_bytes(path)
    magic = _u32(buf, 0, path)
    if magic != LABEL_MAGIC:
        raise DataError(
            f"{path}: bad magic {magic} at byte offset 0, expected {LABEL_MAGIC}"
        )
    count = _u32(buf, 4, path)
    need = 8 + count
    if len(buf) < need:
        raise DataError(
            f"{path}: truncated label data at byte offset {len(buf)}, "
            f"expected {need} bytes"
        )
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=8).copy()


def write_idx_images(path: str, images: np.ndarray, rows: int, cols: int) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 2 or images.shape[1] != rows * cols:
        raise ValueError("images must be (N, rows*cols)")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, images.shape[0], rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path: str, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def one_hot(labels, n_classes: int = 10) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("label outside class range")
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _find_idx(directory: str, stem: str) -> str:
    for name in (
        f"{stem}-ubyte",
        f"{stem}-ubyte.gz",
        f"{stem}.ubyte",
        stem,
    ):
        cand = os.path.join(directory, name)
        if os.path.exists(cand):
            return cand
    raise DataError(f"no {stem}* file under {directory}")


def load_mnist(directory: str):
    """Load the four-IDX-file layout: train/test images scaled to [0, 1]
    plus integer label vectors."""
    tri = read_idx_images(_find_idx(directory, "train-images-idx3"))
    trl = read_idx_labels(_find_idx(directory, "train-labels-idx1"))
    tei = read_idx_images(_find_idx(directory, "t10k-images-idx3"))
    tel = read_idx_labels(_find_idx(directory, "t10k-labels-idx1"))
    if tri.shape[0] != trl.shape[0] or tei.shape[0] != tel.shape[0]:
        raise DataError(f"image/label count mismatch under {directory}")
    return (
        tri.astype(float) / 255.0,
        trl.astype(int),
        tei.astype(float) / 255.0,
        tel.astype(int),
    )


def load_digits_bundled():
    """The bundled 1797-sample 8x8 digit set, pixels scaled to [0, 1]."""
    path = os.path.join(os.path.dirname(__file__), "data", "digits8x8.npz")
    if not os.path.exists(path):
        raise DataError(f"bundled digit data missing at {path}")
    with np.load(path) as z:
        images = z["images"].astype(float) / 16.0
        labels = z["labels"].astype(int)
    return images, labels
