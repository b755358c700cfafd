"""Tests for one-field sweeps."""
import csv
import json

import pytest

from core.exceptions import ConfigError
from training.config import TrainConfig
from training.sweep import SWEEP_CSV, SWEEP_JSON, print_sweep_table, run_sweep, split_sweep_values, sweep_configs
from tests.fixtures.builders import toy_dataset


def tiny_config(**overrides) -> TrainConfig:
    values = dict(
        epochs=2, warmup_epochs=0, batch_size=16, base_lr=1e-2, final_lr=1e-4,
        variables=2, units=3, encoder_hidden=(8,), representation_dim=4, projector_hidden=(),
        monitor_size=16,
    )
    values.update(overrides)
    return TrainConfig(**values)


def test_split_sweep_values():
    """Test comma lists, semicolon lists for width fields, and empty input."""
    assert split_sweep_values("0.25, 0.5,1") == ["0.25", "0.5", "1"]
    assert split_sweep_values("64,64;128") == ["64,64", "128"]
    with pytest.raises(ConfigError):
        split_sweep_values(" , ")


def test_sweep_configs_vary_one_field():
    """Test each config differs from the base only in the swept field."""
    base = tiny_config()
    configs = sweep_configs(base, "lambda", ["0.5", "2"])
    assert [c.lambda_ for c in configs] == [0.5, 2.0]
    for config in configs:
        assert config.updated(lambda_=base.lambda_) == base
    widths = sweep_configs(base, "encoder_hidden", ["8,8", "4"])
    assert [c.encoder_hidden for c in widths] == [(8, 8), (4,)]


def test_sweep_configs_reject_bad_input():
    """Test unknown fields and values that fail validation."""
    with pytest.raises(ConfigError):
        sweep_configs(tiny_config(), "learning_rate", ["0.1"])
    with pytest.raises(ConfigError):
        sweep_configs(tiny_config(), "units", ["1"])


def test_run_sweep_writes_table(tmp_path, capsys):
    """Test one trained run per value and the JSON and CSV tables with timings."""
    train = toy_dataset(n=48, dim=6, seed=0)
    test = toy_dataset(n=16, dim=6, seed=1)
    rows = run_sweep(tiny_config(), "units", ["2", "3"], train, test, out_dir=tmp_path, k=3)

    assert [row.value for row in rows] == ["2", "3"]
    for row in rows:
        assert 0.0 <= row.knn_learned <= 1.0 and 0.0 <= row.knn_raw <= 1.0
        assert row.train_seconds >= row.mean_epoch_seconds > 0.0
        assert row.eval_seconds > 0.0
        assert row.final_loss is not None
    assert rows[0].knn_raw == rows[1].knn_raw
    assert (tmp_path / "units=2" / "checkpoint").is_dir()
    assert len((tmp_path / "units=3" / "metrics.jsonl").read_text().splitlines()) == 2

    saved = json.loads((tmp_path / SWEEP_JSON).read_text())
    assert [entry["value"] for entry in saved] == ["2", "3"]
    with open(tmp_path / SWEEP_CSV, newline="") as f:
        table = list(csv.DictReader(f))
    assert [entry["field"] for entry in table] == ["units", "units"]
    assert "train_seconds" in table[0] and "linear_probe" in table[0]

    print_sweep_table(rows)
    assert "SWEEP OVER units" in capsys.readouterr().out


def test_run_sweep_without_output_directory():
    """Test nothing is written and rows still come back."""
    train = toy_dataset(n=32, dim=6, seed=0)
    rows = run_sweep(tiny_config(epochs=1), "lambda", ["0.5"], train, train, k=1)
    assert len(rows) == 1 and rows[0].run_dir is None


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
