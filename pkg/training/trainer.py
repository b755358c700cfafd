"""Epoch loop: twin forward, loss, backward, optimizer update, metrics and checkpoints."""
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from core.constants import METRICS_FILENAME, ONEHOT_THRESHOLDS
from core.exceptions import CheckpointError, ConfigError, ContractError, FormatError, NumericError
from dataio.augment import augment
from dataio.batching import MultiviewBatch, batch_iter, batches_per_epoch
from dataio.dataset import Dataset
from engine.autodiff import Tape, Var
from engine.gradcheck import GradCheckReport, LossFn, grad_check_report
from eval.theorem import block_inner_products, onehot_fraction
from imsvd.checkpoint import load_checkpoint, save_checkpoint
from imsvd.infotheory import summarize
from imsvd.loss import LossBreakdown, imsvd_loss
from imsvd.model import (
    Architecture,
    BoundParams,
    ModelParams,
    encode_batched,
    gradient_norm,
    init_params,
    twin_forward,
)
from training.config import TrainConfig
from training.optimizers import Optimizer, build_optimizer
from training.schedule import lr_at

logger = logging.getLogger(__name__)

CHECKPOINT_DIRNAME = "checkpoint"
# Seed stream of the monitoring views; batch indices never reach it.
MONITOR_STREAM = 2 ** 32 - 1


@dataclass
class FitResult:
    params: ModelParams
    log: List[Dict[str, float]] = field(default_factory=list)
    optimizer: Optional[Optimizer] = None
    checkpoint_dir: Optional[Path] = None
    # Wall-clock seconds per epoch run in this call; kept out of metrics.jsonl
    epoch_seconds: List[float] = field(default_factory=list)


def _batch_diagnostics(batch: MultiviewBatch, params: ModelParams) -> str:
    parts = []
    for name, view in (("x1", batch.x1), ("x2", batch.x2)):
        finite = np.isfinite(view)
        parts.append(
            f"{name}: non-finite={int((~finite).sum())}, "
            f"min={np.nanmin(view):.4g}, max={np.nanmax(view):.4g}, mean={np.nanmean(view):.4g}"
        )
    norms = ", ".join(f"{n}={np.linalg.norm(a):.4g}" for n, a in params.named_arrays().items())
    parts.append(f"param norms: {norms}")
    parts.append(f"first indices: {batch.indices[:8].tolist()}")
    return "; ".join(parts)


def train_step(
    params: ModelParams,
    batch: MultiviewBatch,
    config: TrainConfig,
    optimizer: Optimizer,
    lr: float,
) -> Tuple[ModelParams, LossBreakdown, float]:
    """
    One optimization step on a multiview batch.

    Args:
        params: Current parameters
        batch: Two aligned views
        config: Supplies the loss variant and weights
        optimizer: Update rule; its state advances
        lr: Learning rate of this step (see :func:`training.schedule.lr_at`)

    Returns:
        (new params, loss breakdown, gradient norm)

    Raises:
        NumericError: If the forward pass or the loss is not finite; the
            message carries statistics of the offending batch
    """
    tape = Tape()
    bound = BoundParams.bind(tape, params)
    try:
        twin = twin_forward(bound, tape.constant(batch.x1), tape.constant(batch.x2))
        breakdown = imsvd_loss(twin.q1, twin.q2, params.layout, config.weights, config.variant)
    except NumericError as e:
        raise NumericError(f"{e}; {_batch_diagnostics(batch, params)}") from e
    if not np.isfinite(breakdown.total):
        raise NumericError(f"non-finite loss {breakdown.total}; {_batch_diagnostics(batch, params)}")

    tape.backward(breakdown.loss)
    grads = bound.gradients()
    norm = gradient_norm(grads)
    if not np.isfinite(norm):
        raise NumericError(f"non-finite gradient; {_batch_diagnostics(batch, params)}")
    return optimizer.step(params, grads, lr), breakdown, norm


def _monitor(params: ModelParams, monitor: Dataset, config: TrainConfig, epoch: int) -> Dict[str, float]:
    """Information and code statistics on a fixed clean subset, plus ti on a paired view."""
    _, q = encode_batched(params, monitor.x, max(monitor.n, 1))
    stats: Dict[str, float] = dict(summarize(q).as_dict())
    low, high = ONEHOT_THRESHOLDS
    stats["onehot_frac_090"] = onehot_fraction(q, low)
    stats["onehot_frac_099"] = onehot_fraction(q, high)
    policy = config.augment_policy
    views = []
    for view in (0, 1):
        seed = np.random.SeedSequence([config.seed_shuffle, epoch, MONITOR_STREAM, view])
        views.append(encode_batched(params, augment(monitor.x, policy, seed), max(monitor.n, 1))[1])
    stats["ti_mean"] = float(block_inner_products(views[0], views[1]).mean())
    return stats


def _read_metrics(path: Path, up_to_epoch: int) -> List[Dict[str, float]]:
    if not path.exists():
        return []
    records = []
    try:
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                record = json.loads(line)
                if record["epoch"] <= up_to_epoch:
                    records.append(record)
    except (OSError, ValueError, KeyError) as e:
        raise FormatError(f"cannot read metrics: {e}", path) from e
    return records


def _write_metrics(path: Path, records: List[Dict[str, float]]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True) + "\n")
    except OSError as e:
        raise FormatError(f"cannot write metrics: {e}", path) from e


def _append_metrics(path: Path, record: Dict[str, float]) -> None:
    try:
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    except OSError as e:
        raise FormatError(f"cannot write metrics: {e}", path) from e


def _save(directory: Path, params: ModelParams, optimizer: Optimizer, config: TrainConfig, epoch: int, step: int) -> None:
    extra: Dict[str, object] = dict(config.to_manifest())
    extra.update({"epoch": epoch, "step": step})
    save_checkpoint(directory, params, extra=extra, optimizer_state=optimizer.state_dict(params))


def fit(
    config: TrainConfig,
    dataset: Dataset,
    out_dir: Optional[Union[str, Path]] = None,
    resume_from: Optional[Union[str, Path]] = None,
    show_progress: bool = False,
    stop_after: Optional[int] = None,
) -> FitResult:
    """
    Train from scratch or resume from a checkpoint.

    Per epoch, one JSON line goes to ``<out_dir>/metrics.jsonl`` with the mean
    loss terms, the last learning rate, the information summary of the monitor
    subset, the one-hot fractions and the mean TI inner product. A checkpoint
    is written to ``<out_dir>/checkpoint`` every ``checkpoint_every`` epochs
    and after the last epoch.

    Args:
        config: Run hyperparameters
        dataset: Training samples
        out_dir: Output directory; nothing is written when None
        resume_from: Checkpoint directory to continue from
        show_progress: Show a progress bar over epochs
        stop_after: Stop (with a checkpoint) once this many epochs are done;
            the schedule still spans config.epochs

    Returns:
        FitResult with final params and the full metrics log

    Raises:
        ContractError: If the batch size exceeds the dataset
        ConfigError: If the checkpoint was written for another architecture
        FormatError: On I/O failures, with the offending path
    """
    architecture = config.architecture(dataset.dim)
    params = init_params(architecture, config.seed_model)
    optimizer = build_optimizer(config)
    out_path = Path(out_dir) if out_dir is not None else None
    checkpoint_dir = out_path / CHECKPOINT_DIRNAME if out_path is not None else None
    metrics_path = out_path / METRICS_FILENAME if out_path is not None else None

    if config.epochs == 0:
        logger.info("epochs=0, returning initial parameters")
        if checkpoint_dir is not None:
            _write_metrics(metrics_path, [])
            _save(checkpoint_dir, params, optimizer, config, 0, 0)
        return FitResult(params=params, log=[], optimizer=optimizer, checkpoint_dir=checkpoint_dir)

    if config.batch_size > dataset.n:
        raise ContractError(f"batch size {config.batch_size} exceeds dataset size {dataset.n}")
    steps_per_epoch = batches_per_epoch(dataset.n, config.batch_size)
    total_steps = config.epochs * steps_per_epoch

    start_epoch, step = 0, 0
    log: List[Dict[str, float]] = []
    if resume_from is not None:
        checkpoint = load_checkpoint(resume_from)
        if checkpoint.params.architecture != architecture:
            raise ConfigError(
                f"checkpoint {resume_from} was written for {checkpoint.params.architecture}, "
                f"config describes {architecture}"
            )
        params = checkpoint.params
        if checkpoint.optimizer_state is None:
            raise CheckpointError("no optimizer state to resume from", resume_from)
        optimizer.load_state(params, checkpoint.optimizer_state)
        start_epoch, step = checkpoint.epoch, checkpoint.step
        if step != start_epoch * steps_per_epoch:
            raise CheckpointError(
                f"step {step} does not match epoch {start_epoch} at {steps_per_epoch} steps per epoch",
                resume_from,
            )
        logger.info("Resuming from %s at epoch %d, step %d", resume_from, start_epoch, step)
    if metrics_path is not None:
        log = _read_metrics(metrics_path, start_epoch) if start_epoch > 0 else []
        _write_metrics(metrics_path, log)

    monitor = dataset.head(config.monitor_size)
    policy = config.augment_policy
    logger.info(
        "Training %d epochs x %d steps, N=%d, M=%d, D_M=%d, variant=%s",
        config.epochs, steps_per_epoch, config.batch_size, config.variables, config.units,
        config.variant.value,
    )

    epoch_seconds: List[float] = []
    last_epoch = config.epochs if stop_after is None else min(config.epochs, stop_after)
    epochs = tqdm(range(start_epoch, last_epoch), desc="train", unit="epoch", disable=not show_progress)
    for epoch in epochs:
        started = time.perf_counter()
        totals = {"loss": 0.0, "ti": 0.0, "de": 0.0, "oe": 0.0, "tic": 0.0}
        grad_total = 0.0
        lr = 0.0
        for batch in batch_iter(dataset, config.batch_size, config.seed_shuffle, policy, epoch):
            lr = lr_at(step, total_steps, config)
            params, breakdown, norm = train_step(params, batch, config, optimizer, lr)
            for key, value in breakdown.as_dict().items():
                totals[key] += value
            grad_total += norm
            step += 1

        record: Dict[str, float] = {key: value / steps_per_epoch for key, value in totals.items()}
        record.update(_monitor(params, monitor, config, epoch))
        record.update({"epoch": epoch + 1, "step": step, "lr": lr, "grad_norm": grad_total / steps_per_epoch})
        log.append(record)
        epoch_seconds.append(time.perf_counter() - started)
        if metrics_path is not None:
            _append_metrics(metrics_path, record)
        epochs.set_postfix(loss=f"{record['loss']:.4f}", onehot=f"{record['onehot_frac_090']:.3f}")
        logger.info(
            "epoch %d/%d loss=%.5f ti=%.5f de=%.5f oe=%.5f S1=%.4f maxMI=%.4g onehot=%.3f lr=%.3g (%.2fs)",
            epoch + 1, config.epochs, record["loss"], record["ti"], record["de"], record["oe"],
            record["mean_entropy"], record["max_pairwise_mi"], record["onehot_frac_090"], lr, epoch_seconds[-1],
        )

        done = epoch + 1
        if checkpoint_dir is not None and (done % config.checkpoint_every == 0 or done == last_epoch):
            _save(checkpoint_dir, params, optimizer, config, done, step)

    return FitResult(
        params=params, log=log, optimizer=optimizer, checkpoint_dir=checkpoint_dir, epoch_seconds=epoch_seconds
    )


def step_loss_fn(architecture: Architecture, x1: np.ndarray, x2: np.ndarray, config: TrainConfig) -> LossFn:
    """The loss :func:`train_step` differentiates, as a function of named parameter leaves."""
    def loss_fn(tape: Tape, leaves: Dict[str, Var]) -> Var:
        bound = BoundParams(architecture, dict(leaves))
        twin = twin_forward(bound, tape.constant(x1), tape.constant(x2))
        return imsvd_loss(twin.q1, twin.q2, architecture.layout, config.weights, config.variant).loss
    return loss_fn


def check_step_gradients(
    params: ModelParams,
    batch: MultiviewBatch,
    config: TrainConfig,
    h: float = 1e-5,
) -> GradCheckReport:
    """Finite-difference check of every parameter gradient of the training loss."""
    loss_fn = step_loss_fn(params.architecture, batch.x1, batch.x2, config)
    return grad_check_report(loss_fn, params.named_arrays(), h)
