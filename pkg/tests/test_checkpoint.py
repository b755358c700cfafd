"""Tests for the binary checkpoint container."""
import numpy as np
import pytest
from numpy.testing import assert_array_equal

from core.constants import CHECKPOINT_MAGIC, MANIFEST_FILENAME, OPTIMIZER_FILENAME, PARAMS_FILENAME
from core.exceptions import CheckpointError
from imsvd.checkpoint import load_checkpoint, read_matrices, save_checkpoint, write_matrices
from imsvd.discretize import BlockLayout
from tests.fixtures.builders import small_params


def test_matrices_round_trip_bitwise(tmp_path):
    """Test every bit of every matrix survives, including signed zeros and tiny values."""
    matrices = [
        np.array([[1.0, -0.0], [np.pi, 1e-300]]),
        np.random.default_rng(0).normal(size=(4, 7)),
    ]
    path = write_matrices(tmp_path / "m.bin", matrices)
    loaded = read_matrices(path)
    assert len(loaded) == 2
    for original, restored in zip(matrices, loaded):
        assert restored.shape == original.shape
        assert original.tobytes() == restored.tobytes()


def test_container_layout(tmp_path):
    """Test magic, count and shapes are little-endian int64 after the magic."""
    path = write_matrices(tmp_path / "m.bin", [np.ones((2, 3))])
    data = path.read_bytes()
    assert data[:8] == CHECKPOINT_MAGIC
    header = np.frombuffer(data[8:32], dtype="<i8")
    assert header.tolist() == [1, 2, 3]
    assert len(data) == 32 + 6 * 8


def test_bad_magic_rejected(tmp_path):
    """Test a file from another format."""
    path = tmp_path / "m.bin"
    path.write_bytes(b"NOTIMSVD" + bytes(16))
    with pytest.raises(CheckpointError, match="bad magic"):
        read_matrices(path)


def test_truncated_file_rejected(tmp_path):
    """Test missing payload bytes and a truncated header."""
    path = write_matrices(tmp_path / "m.bin", [np.ones((3, 3))])
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(CheckpointError, match="expected"):
        read_matrices(path)
    path.write_bytes(data[:12])
    with pytest.raises(CheckpointError, match="truncated"):
        read_matrices(path)


def test_trailing_bytes_rejected(tmp_path):
    """Test extra bytes after the last matrix."""
    path = write_matrices(tmp_path / "m.bin", [np.ones((1, 1))])
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError):
        read_matrices(path)


def test_only_matrices_can_be_written(tmp_path):
    """Test a 1-D array is refused."""
    with pytest.raises(CheckpointError):
        write_matrices(tmp_path / "m.bin", [np.ones(3)])


def test_checkpoint_directory_round_trip(tmp_path):
    """Test parameters, optimizer state and manifest entries come back unchanged."""
    params = small_params(5, BlockLayout(2, 3), seed=8)
    state = [np.array([[4.0]]), np.ones((2, 2))]
    directory = save_checkpoint(tmp_path / "ckpt", params, extra={"epoch": 3, "step": 12, "variant": "full"},
                                optimizer_state=state)
    assert (directory / PARAMS_FILENAME).exists()
    assert (directory / MANIFEST_FILENAME).exists()

    checkpoint = load_checkpoint(directory)
    assert checkpoint.epoch == 3
    assert checkpoint.step == 12
    assert checkpoint.manifest["variant"] == "full"
    assert checkpoint.manifest["format"] == "IMSVD001"
    assert checkpoint.params.architecture == params.architecture
    for a, b in zip(checkpoint.params.matrices(), params.matrices()):
        assert a.tobytes() == b.tobytes()
    assert len(checkpoint.optimizer_state) == 2
    assert_array_equal(checkpoint.optimizer_state[1], np.ones((2, 2)))


def test_checkpoint_without_optimizer_state(tmp_path):
    """Test overwriting a checkpoint without state removes the stale state file."""
    params = small_params(3, BlockLayout(2, 2))
    directory = tmp_path / "ckpt"
    save_checkpoint(directory, params, optimizer_state=[np.zeros((1, 1))])
    save_checkpoint(directory, params)
    assert not (directory / OPTIMIZER_FILENAME).exists()
    assert load_checkpoint(directory).optimizer_state is None


def test_missing_directory(tmp_path):
    """Test loading from a path that does not exist."""
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nowhere")


def test_incomplete_manifest(tmp_path):
    """Test a manifest without the architecture keys."""
    params = small_params(3, BlockLayout(2, 2))
    directory = save_checkpoint(tmp_path / "ckpt", params)
    (directory / MANIFEST_FILENAME).write_text("epoch=1\n")
    with pytest.raises(CheckpointError, match="incomplete manifest"):
        load_checkpoint(directory)


def test_parameters_not_matching_manifest(tmp_path):
    """Test a parameter file from a different architecture."""
    directory = save_checkpoint(tmp_path / "ckpt", small_params(3, BlockLayout(2, 2)))
    other = small_params(4, BlockLayout(2, 2))
    write_matrices(directory / PARAMS_FILENAME, other.matrices())
    with pytest.raises(CheckpointError, match="do not match"):
        load_checkpoint(directory)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
