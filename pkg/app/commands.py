"""Subcommand handlers; each returns a process exit code and writes a run manifest."""
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from app.config import Settings
from app.config_file import resolve_config
from app.schemas import CommandSpec, RunManifest, Subcommand
from core.constants import DEFAULT_KNN_K, EXIT_FAILURE, EXIT_OK
from core.error_handler import safe_execute
from core.exceptions import ConfigError, IMSVDError
from dataio.augment import AugmentPolicy, augment
from dataio.batching import MultiviewBatch
from dataio.csv_io import load_dataset_csv, save_dataset_csv
from dataio.dataset import Dataset
from dataio.idx import load_idx
from dataio.world import AttributeWorldSpec, generate_world
from engine.gradcheck import DEFAULT_ATOL
from eval.export import export_embeddings, export_joint, export_neighbors
from eval.metrics import ProbeConfig, knn_eval, linear_probe
from eval.theorem import theorem_verify
from imsvd.checkpoint import Checkpoint, load_checkpoint
from imsvd.model import encode_batched, init_params
from training.config import TrainConfig
from training.sweep import print_sweep_table, run_sweep, split_sweep_values
from training.trainer import check_step_gradients, fit

logger = logging.getLogger(__name__)

HOLDOUT_SHARE = 0.2
GRADCHECK_TOLERANCE = 1e-5
# Small network for finite-difference checks; every entry costs two forward passes.
GRADCHECK_INPUT_DIM = 4
GRADCHECK_ARCHITECTURE = {"encoder_hidden": (6,), "representation_dim": 5, "projector_hidden": ()}


def world_spec(options: Dict[str, Any], seed: int) -> AttributeWorldSpec:
    """Synthetic world from ``--world-*`` flags; unset flags keep the defaults."""
    values: Dict[str, Any] = {"seed": seed}
    mapping = {
        "world_train": "n_train",
        "world_test": "n_test",
        "world_dim": "ambient_dim",
        "world_noise": "noise_sigma",
    }
    for option, field_name in mapping.items():
        if options.get(option) is not None:
            values[field_name] = options[option]
    try:
        if options.get("world_values"):
            values["values"] = tuple(int(k) for k in str(options["world_values"]).split(","))
        if options.get("world_salience"):
            values["salience"] = tuple(float(s) for s in str(options["world_salience"]).split(","))
        return AttributeWorldSpec(**values)
    except ValueError as e:
        raise ConfigError(f"invalid synthetic world: {e}") from e


def load_splits(source: str, seed_data: int, options: Optional[Dict[str, Any]] = None) -> Tuple[Dataset, Dataset]:
    """
    Resolve a ``--dataset`` value into (train, test).

    ``synthetic`` regenerates the world from ``seed_data``.
    ``idx:<images>,<labels>[,<test images>,<test labels>]`` and
    ``csv:<path>[,<test path>]`` read files; without a test part the last
    20% of rows are held out.
    """
    kind, _, argument = source.partition(":")
    paths = [p for p in argument.split(",") if p]
    if kind == "synthetic":
        world = generate_world(world_spec(options or {}, seed_data))
        return world.train, world.test
    if kind == "idx" and len(paths) in (2, 4):
        train = load_idx(paths[0], paths[1])
        return (train, load_idx(paths[2], paths[3])) if len(paths) == 4 else train.split(HOLDOUT_SHARE)
    if kind == "csv" and len(paths) in (1, 2):
        train = load_dataset_csv(paths[0])
        return (train, load_dataset_csv(paths[1])) if len(paths) == 2 else train.split(HOLDOUT_SHARE)
    raise ConfigError(
        f"cannot interpret --dataset {source!r}; expected synthetic, "
        "idx:<images>,<labels>[,<test images>,<test labels>] or csv:<path>[,<test path>]"
    )


def config_from_manifest(manifest: Dict[str, str]) -> TrainConfig:
    """TrainConfig recorded in a checkpoint manifest."""
    known = set(TrainConfig.model_fields) | {"lambda"}
    return TrainConfig.build({k: v for k, v in manifest.items() if k in known})


def _checkpoint(spec: CommandSpec) -> Tuple[Checkpoint, TrainConfig]:
    if spec.checkpoint is None:
        raise ConfigError(f"{spec.subcommand.value} needs --checkpoint")
    checkpoint = load_checkpoint(spec.checkpoint)
    return checkpoint, config_from_manifest(checkpoint.manifest)


def _seed_data(spec: CommandSpec, config: TrainConfig) -> int:
    override = spec.overrides.get("seed_data")
    return int(override) if override is not None else config.seed_data


def _write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _manifest(spec: CommandSpec, config: Optional[TrainConfig] = None) -> None:
    RunManifest(
        subcommand=spec.subcommand,
        dataset=spec.dataset,
        config=config.to_manifest() if config is not None else {},
        options={**spec.options, "checkpoint": str(spec.checkpoint) if spec.checkpoint else None},
    ).write(spec.out_dir)


def cmd_gen_data(spec: CommandSpec, settings: Settings) -> int:
    """Generate the synthetic world and store both splits as CSV."""
    config = resolve_config(spec.config_path, spec.overrides)
    world = generate_world(world_spec(spec.options, config.seed_data))
    train_path = save_dataset_csv(world.train, spec.out_dir / "train.csv")
    test_path = save_dataset_csv(world.test, spec.out_dir / "test.csv")
    _manifest(spec, config)
    print(json.dumps({"train": str(train_path), "test": str(test_path),
                      "train_samples": world.train.n, "test_samples": world.test.n}, sort_keys=True))
    return EXIT_OK


def cmd_train(spec: CommandSpec, settings: Settings) -> int:
    config = resolve_config(spec.config_path, spec.overrides)
    train, _ = load_splits(spec.dataset, config.seed_data, spec.options)
    result = fit(
        config,
        train,
        out_dir=spec.out_dir,
        resume_from=spec.checkpoint,
        show_progress=bool(spec.options.get("progress")),
    )
    _manifest(spec, config)
    summary = result.log[-1] if result.log else {"epoch": 0}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _embeddings(spec: CommandSpec, settings: Settings):
    checkpoint, config = _checkpoint(spec)
    train, test = load_splits(spec.dataset, _seed_data(spec, config), spec.options)
    attribute = int(spec.options.get("attribute") or 0)
    h_train, _ = encode_batched(checkpoint.params, train.x, settings.eval_batch_size, settings.threads)
    h_test, _ = encode_batched(checkpoint.params, test.x, settings.eval_batch_size, settings.threads)
    return config, train, test, attribute, h_train, h_test


def cmd_eval_knn(spec: CommandSpec, settings: Settings) -> int:
    """kNN accuracy of raw inputs and of encoder outputs on one attribute."""
    config, train, test, attribute, h_train, h_test = _embeddings(spec, settings)
    k = int(spec.options.get("k") or DEFAULT_KNN_K)
    y_train, y_test = train.attribute(attribute), test.attribute(attribute)
    payload = {
        "k": k,
        "attribute": attribute,
        "knn_raw": knn_eval(train.x, y_train, test.x, y_test, k),
        "knn_learned": knn_eval(h_train, y_train, h_test, y_test, k),
    }
    _write_json(spec.out_dir / "knn.json", payload)
    _manifest(spec, config)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_eval_probe(spec: CommandSpec, settings: Settings) -> int:
    config, train, test, attribute, h_train, h_test = _embeddings(spec, settings)
    accuracy = linear_probe(h_train, train.attribute(attribute), h_test, test.attribute(attribute), ProbeConfig())
    payload = {"attribute": attribute, "linear_probe": accuracy}
    _write_json(spec.out_dir / "probe.json", payload)
    _manifest(spec, config)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_verify(spec: CommandSpec, settings: Settings) -> int:
    """Verifier report over the test split, printed as JSON."""
    checkpoint, config = _checkpoint(spec)
    _, test = load_splits(spec.dataset, _seed_data(spec, config), spec.options)
    report = theorem_verify(
        checkpoint.params,
        test,
        batch_size=settings.eval_batch_size,
        policy=config.augment_policy,
        seed=config.seed_shuffle,
        threads=settings.threads,
    )
    _write_json(spec.out_dir / "verify_report.json", report.model_dump())
    _manifest(spec, config)
    print(report.model_dump_json(indent=2))
    return EXIT_OK


def cmd_export_joint(spec: CommandSpec, settings: Settings) -> int:
    """Cross-joint matrix and marginals; embeddings and neighbour lists best-effort."""
    checkpoint, config = _checkpoint(spec)
    train, test = load_splits(spec.dataset, _seed_data(spec, config), spec.options)
    batch, threads = settings.eval_batch_size, settings.threads
    joint, marginals = export_joint(checkpoint.params, test, spec.out_dir / "cross_joint.csv", batch, threads)
    outputs = {"cross_joint": str(joint), "marginals": str(marginals)}
    embeddings = safe_execute(
        export_embeddings, checkpoint.params, test, spec.out_dir / "embeddings.csv", batch, threads,
        default_return=None, exception_type=IMSVDError,
    )
    k = min(int(spec.options.get("k") or DEFAULT_KNN_K), train.n)
    neighbors = safe_execute(
        export_neighbors, checkpoint.params, train, test, spec.out_dir / "neighbors.csv", k, batch, threads,
        default_return=None, exception_type=IMSVDError,
    )
    outputs.update({"embeddings": str(embeddings) if embeddings else None,
                    "neighbors": str(neighbors) if neighbors else None})
    _manifest(spec, config)
    print(json.dumps(outputs, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(spec: CommandSpec, settings: Settings) -> int:
    """Finite-difference check of the training loss on a small random network."""
    seed = int(spec.options.get("seed") or 0)
    overrides = dict(spec.overrides)
    overrides.update(GRADCHECK_ARCHITECTURE)
    if spec.options.get("n") is not None:
        overrides["batch_size"] = spec.options["n"]
    config = resolve_config(spec.config_path, overrides)

    params = init_params(config.architecture(GRADCHECK_INPUT_DIM), seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(config.batch_size, GRADCHECK_INPUT_DIM))
    policy = AugmentPolicy(sigma=config.aug_sigma, dropout=0.0, scale=config.aug_scale)
    views = np.random.SeedSequence(seed).spawn(2)
    batch = MultiviewBatch(
        x1=augment(x, policy, views[0]),
        x2=augment(x, policy, views[1]),
        labels=np.zeros((config.batch_size, 1), dtype=np.int64),
        indices=np.arange(config.batch_size),
    )
    report = check_step_gradients(params, batch, config)
    _manifest(spec, config)
    print(
        f"max relative error: {report.max_relative_error:.3e} "
        f"(raw {report.max_raw_relative_error:.3e}, gaps <= {DEFAULT_ATOL:g} count as 0) "
        f"at {report.worst_parameter}{list(report.worst_index)} "
        f"over {report.entries_checked} entries (variant {config.variant.value}, "
        f"M={config.variables}, D_M={config.units}, N={config.batch_size})"
    )
    return EXIT_OK if report.max_relative_error < GRADCHECK_TOLERANCE else EXIT_FAILURE


def cmd_sweep(spec: CommandSpec, settings: Settings) -> int:
    """Train and evaluate once per value of ``--sweep-field``; the table goes to sweep.json and sweep.csv."""
    field_name, text = spec.options.get("sweep_field"), spec.options.get("sweep_values")
    if not field_name or not text:
        raise ConfigError("sweep needs --sweep-field and --sweep-values")
    config = resolve_config(spec.config_path, spec.overrides)
    train, test = load_splits(spec.dataset, config.seed_data, spec.options)
    rows = run_sweep(
        config,
        field_name,
        split_sweep_values(str(text)),
        train,
        test,
        out_dir=spec.out_dir,
        k=int(spec.options.get("k") or DEFAULT_KNN_K),
        attribute=int(spec.options.get("attribute") or 0),
        batch_size=settings.eval_batch_size,
        threads=settings.threads,
    )
    _manifest(spec, config)
    print_sweep_table(rows)
    for row in rows:
        print(row.model_dump_json())
    return EXIT_OK


COMMANDS: Dict[Subcommand, Callable[[CommandSpec, Settings], int]] = {
    Subcommand.GEN_DATA: cmd_gen_data,
    Subcommand.TRAIN: cmd_train,
    Subcommand.EVAL_KNN: cmd_eval_knn,
    Subcommand.EVAL_PROBE: cmd_eval_probe,
    Subcommand.VERIFY: cmd_verify,
    Subcommand.EXPORT_JOINT: cmd_export_joint,
    Subcommand.GRADCHECK: cmd_gradcheck,
    Subcommand.SWEEP: cmd_sweep,
}
