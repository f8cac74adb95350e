"""CIFAR-10 binary batch I/O and image/signal conversions.

A CIFAR-10 binary batch is a flat file of 3073-byte records: one label byte
in [0, 9] followed by 3072 pixel bytes stored channel-major (1024 red, 1024
green, 1024 blue, each row-major 32x32). Records are flattened verbatim into
1-D signals of length 3072; pixel byte p maps to 2*(p/255) - 1, so signals
live in [-1, 1] and byte index equals signal index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import CifarFormatError, CorruptRecordError

SIGNAL_LENGTH = 3072
RECORD_BYTES = SIGNAL_LENGTH + 1
IMAGE_SHAPE = (32, 32, 3)
NUM_CLASSES = 10


@dataclass(frozen=True)
class ImageSignal:
    """A flattened image: ``values`` has length 3072, samples in [-1, 1]."""

    values: np.ndarray
    label: int | None = None

    def __len__(self) -> int:
        return self.values.shape[0]


def normalize_bytes(raw: np.ndarray) -> np.ndarray:
    """Map pixel bytes 0..255 to floats in [-1, 1] via 2*(p/255) - 1."""
    return 2.0 * (np.asarray(raw, dtype=np.float64) / 255.0) - 1.0


def denormalize_to_bytes(values: np.ndarray) -> np.ndarray:
    """Clamp samples to [-1, 1] and map back to bytes via round(255*(s+1)/2).

    Inverse of :func:`normalize_bytes` on every byte value: rounding makes the
    byte -> float -> byte round trip exact.
    """
    clipped = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    return np.round(255.0 * (clipped + 1.0) / 2.0).astype(np.uint8)


def read_cifar_batch(path, max_records: int | None = None) -> list[ImageSignal]:
    """Read a CIFAR-10 binary batch file into normalized signals.

    Parameters
    ----------
    path : str or Path
        File of concatenated 3073-byte records.
    max_records : int, optional
        Read at most this many records (handy for desk-scale runs).

    Returns
    -------
    list of ImageSignal

    Raises
    ------
    CifarFormatError
        If the file length is not a multiple of 3073.
    CorruptRecordError
        If a label byte exceeds 9.
    """
    raw = np.fromfile(str(path), dtype=np.uint8)
    if raw.size % RECORD_BYTES != 0:
        raise CifarFormatError(
            f"{path}: file length {raw.size} is not a multiple of the "
            f"{RECORD_BYTES}-byte record size"
        )
    n_records = raw.size // RECORD_BYTES
    if max_records is not None:
        n_records = min(n_records, max_records)
    records = raw[: n_records * RECORD_BYTES].reshape(n_records, RECORD_BYTES)
    labels = records[:, 0]
    bad = np.nonzero(labels > NUM_CLASSES - 1)[0]
    if bad.size:
        raise CorruptRecordError(
            f"{path}: record {bad[0]} has label byte {labels[bad[0]]} > 9"
        )
    pixels = normalize_bytes(records[:, 1:])
    return [
        ImageSignal(values=pixels[i], label=int(labels[i])) for i in range(n_records)
    ]


def signals_to_matrix(signals) -> np.ndarray:
    """Stack a list of ImageSignal into an (N, T) float64 matrix."""
    return np.asarray([s.values for s in signals], dtype=np.float64)


def write_png(signal, path) -> None:
    """Write a length-3072 signal as a 32x32 8-bit RGB PNG.

    Samples are clamped to [-1, 1] and converted back to bytes; the
    channel-major layout is rearranged to (row, column, channel) for PNG.
    """
    values = getattr(signal, "values", signal)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (SIGNAL_LENGTH,):
        raise ValueError(
            f"signal must have shape ({SIGNAL_LENGTH},), got {values.shape}"
        )
    raw = denormalize_to_bytes(values)
    rgb = raw.reshape(3, 32, 32).transpose(1, 2, 0)
    Image.fromarray(np.ascontiguousarray(rgb), mode="RGB").save(str(path))


def read_png(path) -> np.ndarray:
    """Read a 32x32 RGB PNG back into the channel-major 3072-byte layout."""
    with Image.open(str(path)) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    if rgb.shape != IMAGE_SHAPE:
        raise ValueError(f"{path}: expected a 32x32 RGB image, got {rgb.shape}")
    return rgb.transpose(2, 0, 1).reshape(SIGNAL_LENGTH)


def write_cifar_batch(path, byte_matrix: np.ndarray, labels: np.ndarray) -> None:
    """Write records in CIFAR-10 binary layout (test fixtures, demo data)."""
    byte_matrix = np.asarray(byte_matrix, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if byte_matrix.ndim != 2 or byte_matrix.shape[1] != SIGNAL_LENGTH:
        raise ValueError(f"byte_matrix must be (N, {SIGNAL_LENGTH})")
    if labels.shape != (byte_matrix.shape[0],):
        raise ValueError("labels must have one entry per record")
    records = np.concatenate([labels[:, None], byte_matrix], axis=1)
    Path(path).write_bytes(records.tobytes())


def make_time_grid(num_points: int) -> np.ndarray:
    """Uniform time grid of ``num_points`` samples covering [0, 1] inclusive.

    Spacing is 1/(num_points - 1) so both endpoints are on the grid.
    """
    if num_points < 2:
        raise ValueError(f"time grid needs at least 2 points, got {num_points}")
    return np.linspace(0.0, 1.0, num_points)
