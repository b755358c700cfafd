"""Reader for IDX image/label files (optionally gzipped)."""
import gzip
import logging
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from core.constants import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC
from core.exceptions import FormatError
from dataio.dataset import Dataset

logger = logging.getLogger(__name__)

# Images:  [magic 0x00000803][count][rows][cols] then count*rows*cols unsigned bytes
# Labels:  [magic 0x00000801][count] then count unsigned bytes
# All header integers are 32-bit big-endian.


def _read_bytes(path: Path) -> bytes:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as f:
                return f.read()
        return path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read IDX file: {e}", path) from e


def _check_magic(data: bytes, expected: int, path: Path) -> None:
    if len(data) < 4:
        raise FormatError(f"truncated header: {len(data)} bytes, need at least 4", path)
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected:
        raise FormatError(f"bad magic 0x{magic:08x}, expected 0x{expected:08x}", path)


def read_idx_images(path: Union[str, Path]) -> Tuple[np.ndarray, Tuple[int, int]]:
    """Return images as (count, rows*cols) floats in [0, 1] plus the image shape."""
    path = Path(path)
    data = _read_bytes(path)
    _check_magic(data, IDX_IMAGES_MAGIC, path)
    if len(data) < 16:
        raise FormatError(f"truncated header: {len(data)} bytes, need 16", path)
    count, rows, cols = struct.unpack(">III", data[4:16])
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise FormatError(f"truncated pixel data: {len(data)} bytes, expected {expected}", path)
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0, (rows, cols)


def read_idx_labels(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    data = _read_bytes(path)
    _check_magic(data, IDX_LABELS_MAGIC, path)
    if len(data) < 8:
        raise FormatError(f"truncated header: {len(data)} bytes, need 8", path)
    (count,) = struct.unpack(">I", data[4:8])
    if len(data) < 8 + count:
        raise FormatError(f"truncated label data: {len(data)} bytes, expected {8 + count}", path)
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx(images_path: Union[str, Path], labels_path: Union[str, Path]) -> Dataset:
    """
    Load an IDX image file and its label file as a flat dataset.

    Args:
        images_path: Images file (magic 0x00000803)
        labels_path: Labels file (magic 0x00000801)

    Returns:
        Dataset with pixel rows scaled to [0, 1]

    Raises:
        FormatError: On bad magic, truncation or a count mismatch
    """
    images, (rows, cols) = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if labels.shape[0] != images.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels in {labels_path}", images_path
        )
    logger.info("Loaded %d IDX images of %dx%d from %s", images.shape[0], rows, cols, images_path)
    return Dataset(
        x=images,
        labels=labels,
        name=Path(images_path).name,
        meta={"source": "idx", "rows": str(rows), "cols": str(cols)},
    )
