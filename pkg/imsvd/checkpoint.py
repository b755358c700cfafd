"""Binary checkpoint container.

Layout of a matrix file (all integers int64 little-endian, floats float64 LE):

    b"IMSVD001" | count | (rows, cols) * count | row-major data of every matrix

A checkpoint directory holds ``params.bin``, optionally ``optimizer.bin`` in
the same container, and ``manifest.txt`` with the architecture, seeds and
training position as ``key=value`` lines.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from core.constants import CHECKPOINT_MAGIC, MANIFEST_FILENAME, OPTIMIZER_FILENAME, PARAMS_FILENAME
from core.exceptions import CheckpointError, FormatError, IMSVDError
from core.keyvalue import read_key_values, write_key_values
from imsvd.model import Architecture, ModelParams

logger = logging.getLogger(__name__)

_INT = struct.Struct("<q")


def write_matrices(path: Union[str, Path], matrices: Sequence[np.ndarray]) -> Path:
    """Write 2-D float64 matrices into one container file."""
    path = Path(path)
    header = bytearray(CHECKPOINT_MAGIC)
    header += _INT.pack(len(matrices))
    for matrix in matrices:
        if matrix.ndim != 2:
            raise CheckpointError(f"only 2-D matrices can be stored, got shape {matrix.shape}", path)
        header += _INT.pack(matrix.shape[0]) + _INT.pack(matrix.shape[1])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(bytes(header))
            for matrix in matrices:
                f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    except OSError as e:
        raise CheckpointError(f"cannot write checkpoint: {e}", path) from e
    return path


def read_matrices(path: Union[str, Path]) -> List[np.ndarray]:
    """Read every matrix of a container file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}", path) from e

    magic_len = len(CHECKPOINT_MAGIC)
    if data[:magic_len] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {data[:magic_len]!r}, expected {CHECKPOINT_MAGIC!r}", path)
    offset = magic_len
    if len(data) < offset + _INT.size:
        raise CheckpointError("truncated header", path)
    (count,) = _INT.unpack_from(data, offset)
    offset += _INT.size
    if count < 0 or len(data) < offset + 2 * _INT.size * count:
        raise CheckpointError(f"truncated header for {count} matrices", path)

    shapes = []
    for _ in range(count):
        rows, cols = _INT.unpack_from(data, offset)[0], _INT.unpack_from(data, offset + _INT.size)[0]
        offset += 2 * _INT.size
        shapes.append((rows, cols))

    expected = offset + 8 * sum(r * c for r, c in shapes)
    if len(data) != expected:
        raise CheckpointError(f"expected {expected} bytes, found {len(data)}", path)

    matrices = []
    for rows, cols in shapes:
        size = rows * cols
        flat = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
        matrices.append(flat.astype(np.float64).reshape(rows, cols))
        offset += 8 * size
    return matrices


@dataclass
class Checkpoint:
    """Parameters plus everything needed to resume training."""
    params: ModelParams
    manifest: Dict[str, str] = field(default_factory=dict)
    optimizer_state: Optional[List[np.ndarray]] = None

    @property
    def epoch(self) -> int:
        return int(self.manifest.get("epoch", 0))

    @property
    def step(self) -> int:
        return int(self.manifest.get("step", 0))


def save_checkpoint(
    directory: Union[str, Path],
    params: ModelParams,
    extra: Optional[Mapping[str, object]] = None,
    optimizer_state: Optional[Sequence[np.ndarray]] = None,
) -> Path:
    """
    Write parameters, optional optimizer state and the manifest into a directory.

    Args:
        directory: Target directory, created if missing
        params: Model parameters
        extra: Additional manifest entries (seeds, variant, epoch, step, ...)
        optimizer_state: Optimizer matrices to store beside the parameters

    Returns:
        The checkpoint directory
    """
    directory = Path(directory)
    write_matrices(directory / PARAMS_FILENAME, params.matrices())
    optimizer_path = directory / OPTIMIZER_FILENAME
    if optimizer_state is not None:
        write_matrices(optimizer_path, list(optimizer_state))
    elif optimizer_path.exists():
        optimizer_path.unlink()

    manifest: Dict[str, object] = dict(extra or {})
    manifest.update(params.architecture.to_manifest())
    manifest["format"] = CHECKPOINT_MAGIC.decode("ascii")
    manifest["layers"] = len(params.weights)
    try:
        write_key_values(directory / MANIFEST_FILENAME, manifest)
    except FormatError as e:
        raise CheckpointError(str(e), directory) from e
    logger.debug("Checkpoint written to %s", directory)
    return directory


def load_checkpoint(directory: Union[str, Path]) -> Checkpoint:
    """Read a checkpoint directory written by :func:`save_checkpoint`."""
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError("checkpoint directory not found", directory)
    try:
        manifest = read_key_values(directory / MANIFEST_FILENAME)
    except FormatError as e:
        raise CheckpointError(str(e), directory) from e
    try:
        architecture = Architecture.from_manifest(manifest)
    except (KeyError, ValueError, IMSVDError) as e:
        raise CheckpointError(f"incomplete manifest: {e}", directory) from e

    matrices = read_matrices(directory / PARAMS_FILENAME)
    try:
        params = ModelParams.from_matrices(architecture, matrices)
    except IMSVDError as e:
        raise CheckpointError(f"parameters do not match the manifest: {e}", directory) from e

    optimizer_path = directory / OPTIMIZER_FILENAME
    state = read_matrices(optimizer_path) if optimizer_path.exists() else None
    return Checkpoint(params=params, manifest=manifest, optimizer_state=state)
