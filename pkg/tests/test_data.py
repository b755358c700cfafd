"""Tests for the synthetic world, augmentation, file loaders and batching."""
import gzip

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from core.exceptions import ContractError, DimensionError, FormatError
from dataio.augment import AugmentPolicy, augment
from dataio.batching import batch_iter, batches_per_epoch, epoch_permutation
from dataio.csv_io import load_dataset_csv, save_dataset_csv
from dataio.dataset import Dataset
from dataio.idx import load_idx, read_idx_images, read_idx_labels
from dataio.world import AttributeWorldSpec, generate_world, one_hot_attributes
from tests.fixtures.builders import toy_dataset, write_idx_images, write_idx_labels

TWO_IMAGES = np.array([[[0, 255], [128, 64]], [[1, 2], [3, 4]]], dtype=np.uint8)


# Synthetic world

def test_world_shapes_and_label_ranges():
    """Test split sizes, observation width and label ranges."""
    spec = AttributeWorldSpec(values=(3, 5), ambient_dim=16, n_train=100, n_test=40, seed=1)
    world = generate_world(spec)
    assert world.train.x.shape == (100, 16)
    assert world.test.x.shape == (40, 16)
    assert world.train.labels.shape == (100, 2)
    assert world.train.labels[:, 0].max() < 3 and world.train.labels[:, 1].max() < 5
    assert world.mixing.shape == (8, 16)


def test_world_deterministic_per_seed():
    """Test the same seed reproduces the world bitwise and another seed does not."""
    spec = AttributeWorldSpec(values=(4, 4), ambient_dim=12, n_train=50, n_test=10, seed=7)
    first, second = generate_world(spec), generate_world(spec)
    assert_array_equal(first.train.x, second.train.x)
    assert_array_equal(first.test.labels, second.test.labels)
    other = generate_world(spec.model_copy(update={"seed": 8}))
    assert not np.array_equal(first.train.x, other.train.x)


def test_world_noise_free_is_deterministic_function_of_labels():
    """Test equal labels give equal observations without noise."""
    spec = AttributeWorldSpec(values=(2, 2), ambient_dim=4, noise_sigma=0.0, n_train=64, n_test=0)
    world = generate_world(spec)
    labels, x = world.train.labels, world.train.x
    same = np.all(labels == labels[0], axis=1)
    assert same.sum() > 1
    assert_allclose(x[same], np.repeat(x[:1], same.sum(), axis=0))
    assert np.abs(x).max() <= 1.0


def test_world_spec_validation():
    """Test too-narrow observations and single-valued attributes."""
    with pytest.raises(ValidationError):
        AttributeWorldSpec(values=(8, 8), ambient_dim=10)
    with pytest.raises(ValidationError):
        AttributeWorldSpec(values=(1, 4))
    with pytest.raises(ValidationError):
        AttributeWorldSpec(values=())


def test_world_default_matches_code_layout_and_fades_first_attribute():
    """Test eight attributes of eight values, with the first at half salience."""
    spec = AttributeWorldSpec()
    assert spec.values == (8,) * 8
    assert spec.saliences == (0.5,) + (1.0,) * 7
    assert AttributeWorldSpec(values=(3,), ambient_dim=4).saliences == (1.0,)


def test_world_salience_scales_mixing_rows():
    """Test each attribute's mixing rows carry its salience and nothing else changes."""
    base = AttributeWorldSpec(values=(2, 3), ambient_dim=8, salience=(1.0, 1.0), n_train=10, n_test=0, seed=3)
    faded = base.model_copy(update={"salience": (0.25, 2.0)})
    plain, scaled = generate_world(base).mixing, generate_world(faded).mixing
    assert_allclose(scaled[:2], 0.25 * plain[:2])
    assert_allclose(scaled[2:], 2.0 * plain[2:])
    assert_array_equal(generate_world(base).train.labels, generate_world(faded).train.labels)


def test_world_salience_validation():
    """Test salience length and sign checks."""
    with pytest.raises(ValidationError):
        AttributeWorldSpec(values=(2, 2), ambient_dim=4, salience=(1.0,))
    with pytest.raises(ValidationError):
        AttributeWorldSpec(values=(2, 2), ambient_dim=4, salience=(1.0, 0.0))


def test_one_hot_attributes():
    """Test the concatenated one-hot encoding."""
    encoded = one_hot_attributes(np.array([[0, 2], [1, 0]]), (2, 3))
    assert_array_equal(encoded, [[1, 0, 0, 0, 1], [0, 1, 1, 0, 0]])


# Augmentation

def test_identity_policy_copies_input():
    """Test zero magnitudes return an equal, independent copy."""
    x = np.arange(6.0).reshape(2, 3)
    view = augment(x, AugmentPolicy.identity(), seed=0)
    assert_array_equal(view, x)
    view[0, 0] = 99.0
    assert x[0, 0] == 0.0


def test_augment_deterministic_per_seed():
    """Test same seed same view, different seed different view."""
    x = np.random.default_rng(0).normal(size=(10, 5))
    policy = AugmentPolicy()
    assert_array_equal(augment(x, policy, 3), augment(x, policy, 3))
    assert not np.array_equal(augment(x, policy, 3), augment(x, policy, 4))


def test_augment_dropout_fraction():
    """Test roughly the requested share of coordinates is zeroed."""
    x = np.ones((200, 50))
    view = augment(x, AugmentPolicy(sigma=0.0, dropout=0.3, scale=0.0), seed=1)
    assert abs((view == 0).mean() - 0.3) < 0.03


def test_augment_scale_is_per_sample():
    """Test each row is multiplied by one factor in [1 - s, 1 + s]."""
    x = np.ones((20, 4))
    view = augment(x, AugmentPolicy(sigma=0.0, dropout=0.0, scale=0.2), seed=2)
    assert_allclose(view, np.repeat(view[:, :1], 4, axis=1))
    assert view.min() >= 0.8 and view.max() <= 1.2


def test_augment_rejects_out_of_range_policy():
    """Test negative noise and fractions outside [0, 1)."""
    x = np.ones((2, 2))
    for policy in (AugmentPolicy(sigma=-1.0), AugmentPolicy(dropout=1.0), AugmentPolicy(scale=1.5)):
        with pytest.raises(ContractError):
            augment(x, policy, 0)


# IDX files

def test_idx_images_and_labels(tmp_path):
    """Test two 2x2 images load as flat rows in [0, 1] with their labels."""
    images = write_idx_images(tmp_path / "images.idx", TWO_IMAGES)
    labels = write_idx_labels(tmp_path / "labels.idx", np.array([7, 3]))
    dataset = load_idx(images, labels)
    assert dataset.x.shape == (2, 4)
    assert_allclose(dataset.x[0], [0.0, 1.0, 128 / 255, 64 / 255])
    assert_array_equal(dataset.attribute(0), [7, 3])
    assert dataset.meta == {"source": "idx", "rows": "2", "cols": "2"}


def test_idx_gzip(tmp_path):
    """Test gzipped files are read transparently."""
    raw = write_idx_images(tmp_path / "images.idx", TWO_IMAGES).read_bytes()
    packed = tmp_path / "images.idx.gz"
    packed.write_bytes(gzip.compress(raw))
    pixels, shape = read_idx_images(packed)
    assert shape == (2, 2)
    assert pixels.shape == (2, 4)


def test_idx_bad_magic(tmp_path):
    """Test label magic on an image file and vice versa."""
    images = write_idx_images(tmp_path / "images.idx", TWO_IMAGES, magic=0x00000801)
    with pytest.raises(FormatError, match="bad magic"):
        read_idx_images(images)
    labels = write_idx_labels(tmp_path / "labels.idx", np.array([1, 2]), magic=0x00000803)
    with pytest.raises(FormatError, match="bad magic"):
        read_idx_labels(labels)


def test_idx_truncated(tmp_path):
    """Test missing pixel and label bytes."""
    images = write_idx_images(tmp_path / "images.idx", TWO_IMAGES, truncate=3)
    with pytest.raises(FormatError, match="truncated"):
        read_idx_images(images)
    labels = write_idx_labels(tmp_path / "labels.idx", np.array([1, 2]), count=5)
    with pytest.raises(FormatError, match="truncated"):
        read_idx_labels(labels)


def test_idx_count_mismatch(tmp_path):
    """Test image and label files that disagree on the sample count."""
    images = write_idx_images(tmp_path / "images.idx", TWO_IMAGES)
    labels = write_idx_labels(tmp_path / "labels.idx", np.array([1, 2, 3]))
    with pytest.raises(FormatError):
        load_idx(images, labels)


def test_idx_missing_file(tmp_path):
    """Test a path that does not exist."""
    with pytest.raises(FormatError):
        read_idx_images(tmp_path / "nope.idx")


# CSV files

def test_csv_round_trip(tmp_path):
    """Test labels and features survive a save and load."""
    dataset = toy_dataset(n=12, dim=3)
    path = save_dataset_csv(dataset, tmp_path / "data.csv")
    assert path.read_text().splitlines()[0] == "label_0,label_1,x_0,x_1,x_2"
    loaded = load_dataset_csv(path)
    assert_array_equal(loaded.labels, dataset.labels)
    assert_array_equal(loaded.x, dataset.x)


def test_csv_label_columns_anywhere(tmp_path):
    """Test label columns are recognized by name, not position."""
    path = tmp_path / "data.csv"
    path.write_text("a,label,b\n1.5,2,3.5\n0.5,1,-1\n")
    dataset = load_dataset_csv(path)
    assert_array_equal(dataset.attribute(0), [2, 1])
    assert_allclose(dataset.x, [[1.5, 3.5], [0.5, -1.0]])


@pytest.mark.parametrize("content", ["", "x_0,x_1\n1,2\n", "label,x\n1,2,3\n", "label,x\n1,abc\n"])
def test_csv_malformed(tmp_path, content):
    """Test empty files, missing label columns, ragged rows and bad values."""
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(FormatError):
        load_dataset_csv(path)


# Dataset and batching

def test_dataset_validation_and_split():
    """Test shape checks and the deterministic tail holdout."""
    with pytest.raises(DimensionError):
        Dataset(x=np.ones((3, 2)), labels=np.ones(4))
    dataset = toy_dataset(n=10)
    first, second = dataset.split(0.2)
    assert (first.n, second.n) == (8, 2)
    assert_array_equal(second.x, dataset.x[8:])
    with pytest.raises(ContractError):
        dataset.split(1.0)
    with pytest.raises(ContractError):
        dataset.attribute(2)


def test_batches_drop_partial_tail():
    """Test floor(n / N) full batches per epoch."""
    assert batches_per_epoch(10, 3) == 3
    batches = list(batch_iter(toy_dataset(n=10), 3, shuffle_seed=0))
    assert len(batches) == 3
    assert all(batch.size == 3 for batch in batches)
    assert len(set(np.concatenate([b.indices for b in batches]))) == 9


def test_batches_views_aligned_and_distinct():
    """Test both views come from the same samples but differ."""
    dataset = toy_dataset(n=16)
    batch = next(batch_iter(dataset, 8, shuffle_seed=1))
    assert_array_equal(batch.labels, dataset.labels[batch.indices])
    assert not np.array_equal(batch.x1, batch.x2)
    clean = next(batch_iter(dataset, 8, shuffle_seed=1, policy=AugmentPolicy.identity()))
    assert_array_equal(clean.x1, dataset.x[clean.indices])
    assert_array_equal(clean.x1, clean.x2)


def test_batches_deterministic_per_seed_and_epoch():
    """Test replaying an epoch gives identical batches; other epochs reshuffle."""
    dataset = toy_dataset(n=20)
    first = list(batch_iter(dataset, 5, shuffle_seed=4, epoch=2))
    second = list(batch_iter(dataset, 5, shuffle_seed=4, epoch=2))
    for a, b in zip(first, second):
        assert_array_equal(a.x1, b.x1)
        assert_array_equal(a.x2, b.x2)
    assert not np.array_equal(epoch_permutation(20, 4, 2), epoch_permutation(20, 4, 3))


def test_batches_reject_bad_sizes():
    """Test N = 0 and N larger than the dataset."""
    with pytest.raises(ContractError):
        list(batch_iter(toy_dataset(n=4), 0, shuffle_seed=0))
    with pytest.raises(ContractError):
        list(batch_iter(toy_dataset(n=4), 5, shuffle_seed=0))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
