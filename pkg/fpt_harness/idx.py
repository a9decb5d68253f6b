"""IDX files: big-endian magic (two zero bytes, type code, rank), one u32 per
dimension, then the raw data. Only unsigned-byte data (type 0x08) is handled.

Images are rank 3 (N x H x W, magic 0x00000803) for single-channel data or rank 4
(N x C x H x W, 0x00000804). Labels are rank 1 (0x00000801). Pixels are scaled to
[0, 1] by /255 on read and rounded back to bytes on write.
"""

from pathlib import Path
from typing import Union

import numpy as np

from fpt_utils.errors import FormatError, PairingError

from .datasets import Dataset

UBYTE = 0x08
LABEL_MAGIC = 0x00000801
IMAGE_MAGICS = (0x00000803, 0x00000804)


def _magic(rank: int) -> int:
    return (UBYTE << 8) | rank


def read_idx(path: Union[str, Path]) -> np.ndarray:
    """Raw u8 array with exactly the dimensions the header declares.

    Raises:
        FormatError: on a bad magic, an unsupported type or truncated data.
    """
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise FormatError(f"{path}: file too short for an IDX header", len(data))
    if data[0] != 0 or data[1] != 0:
        raise FormatError(f"{path}: magic must start with two zero bytes", 0)
    if data[2] != UBYTE:
        raise FormatError(f"{path}: unsupported IDX data type 0x{data[2]:02x}", 2)
    rank = data[3]
    if rank < 1:
        raise FormatError(f"{path}: IDX rank must be positive", 3)

    header_end = 4 + 4 * rank
    if len(data) < header_end:
        raise FormatError(f"{path}: truncated dimension header", len(data))
    dims = tuple(int(v) for v in np.frombuffer(data, dtype=">u4", count=rank, offset=4))
    size = int(np.prod(dims))
    if len(data) < header_end + size:
        raise FormatError(
            f"{path}: truncated data, expected {size} bytes after the header", len(data)
        )
    if len(data) > header_end + size:
        raise FormatError(f"{path}: trailing bytes after the data", header_end + size)
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header_end).reshape(dims)


def _expect_magic(path, array: np.ndarray, allowed) -> None:
    if _magic(array.ndim) not in allowed:
        raise FormatError(
            f"{path}: magic 0x{_magic(array.ndim):08x} is not one of"
            f" {', '.join(f'0x{m:08x}' for m in allowed)}",
            0,
        )


def load_idx(images_path: Union[str, Path], labels_path: Union[str, Path]) -> Dataset:
    """Parse an image file and its label file into a Dataset.

    Raises:
        FormatError: on a wrong magic or truncation (message carries the byte offset).
        PairingError: when the two files disagree on the item count.
    """
    images = read_idx(images_path)
    _expect_magic(images_path, images, IMAGE_MAGICS)
    labels = read_idx(labels_path)
    _expect_magic(labels_path, labels, (LABEL_MAGIC,))
    if images.shape[0] != labels.shape[0]:
        raise PairingError(
            f"{images_path} holds {images.shape[0]} images but {labels_path} holds"
            f" {labels.shape[0]} labels"
        )
    if images.ndim == 3:
        images = images[:, None, :, :]
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def _write(path: Union[str, Path], array: np.ndarray) -> None:
    header = bytes((0, 0, UBYTE, array.ndim)) + np.asarray(array.shape, dtype=">u4").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + np.ascontiguousarray(array, dtype=np.uint8).tobytes())


def write_idx(
    dataset: Dataset, images_path: Union[str, Path], labels_path: Union[str, Path]
) -> None:
    """Inverse of load_idx. Pixels are quantized to round(255 * x); single-channel
    images are written as rank 3."""
    labels = np.asarray(dataset.labels)
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise FormatError("IDX labels must fit in one unsigned byte")
    pixels = np.rint(np.clip(dataset.images, 0.0, 1.0) * 255.0).astype(np.uint8)
    if pixels.shape[1] == 1:
        pixels = pixels[:, 0]
    _write(images_path, pixels)
    _write(labels_path, labels.astype(np.uint8))
