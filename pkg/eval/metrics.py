"""Downstream metrics on frozen embeddings: kNN classification and a linear probe."""
import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.constants import PROBE_ITERATIONS, PROBE_LR
from core.exceptions import ContractError, DimensionError

logger = logging.getLogger(__name__)

_QUERY_CHUNK = 256


class ProbeConfig(BaseModel):
    """Fixed protocol of the linear probe."""
    iterations: int = Field(default=PROBE_ITERATIONS, ge=1)
    lr: float = Field(default=PROBE_LR, gt=0.0)
    standardize: bool = Field(default=True, description="Scale features by train mean and std first")


def _check_pair(embeddings: np.ndarray, labels: np.ndarray, name: str) -> Tuple[np.ndarray, np.ndarray]:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if embeddings.ndim != 2:
        raise DimensionError(f"{name} embeddings must be 2-D, got shape {embeddings.shape}")
    if embeddings.shape[0] != labels.shape[0]:
        raise DimensionError(f"{name}: {embeddings.shape[0]} embeddings but {labels.shape[0]} labels")
    if embeddings.shape[0] == 0:
        raise ContractError(f"{name} split is empty")
    return embeddings, labels


def nearest_neighbors(
    train: np.ndarray,
    queries: np.ndarray,
    k: int,
    labels: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Indices and Euclidean distances of the k nearest training points per query.

    Equal distances are ordered by ``labels`` when given, then by training
    order. With labels, the selected (distance, label) pairs do not depend on
    how the training set is ordered.

    Returns:
        (Q, k) indices and (Q, k) distances, nearest first
    """
    if not 1 <= k <= train.shape[0]:
        raise ContractError(f"k={k} must lie in [1, {train.shape[0]}]")
    if train.shape[1] != queries.shape[1]:
        raise DimensionError(f"embedding widths differ: {train.shape[1]} vs {queries.shape[1]}")
    train_sq = (train ** 2).sum(axis=1)
    position = np.arange(train.shape[0])
    secondary = position if labels is None else np.asarray(labels).reshape(-1)
    indices = np.zeros((queries.shape[0], k), dtype=np.int64)
    distances = np.zeros((queries.shape[0], k))
    for start in range(0, queries.shape[0], _QUERY_CHUNK):
        chunk = queries[start:start + _QUERY_CHUNK]
        sq = (chunk ** 2).sum(axis=1)[:, None] + train_sq[None, :] - 2.0 * chunk @ train.T
        dist = np.sqrt(np.maximum(sq, 0.0))
        order = np.lexsort(
            (np.broadcast_to(position, dist.shape), np.broadcast_to(secondary, dist.shape), dist), axis=1
        )[:, :k]
        indices[start:start + chunk.shape[0]] = order
        distances[start:start + chunk.shape[0]] = np.take_along_axis(dist, order, axis=1)
    return indices, distances


def _vote(labels: np.ndarray, distances: np.ndarray) -> int:
    best = None
    for label in np.unique(labels):
        chosen = labels == label
        key = (-int(chosen.sum()), float(distances[chosen].sum()), int(label))
        if best is None or key < best:
            best = key
    return best[2]


def knn_eval(
    train_embeddings: np.ndarray,
    train_labels: np.ndarray,
    test_embeddings: np.ndarray,
    test_labels: np.ndarray,
    k: int,
) -> float:
    """
    Top-1 accuracy of a k-nearest-neighbour majority vote.

    Neighbours tied at the k-th distance are taken lowest label first, so the
    result does not depend on training order. Ties between labels in the vote
    go to the smaller summed distance, then the lower label.

    Args:
        train_embeddings: (N_train, H) encoder outputs
        train_labels: (N_train,) integer labels
        test_embeddings: (N_test, H) encoder outputs
        test_labels: (N_test,) integer labels
        k: Number of neighbours

    Returns:
        Accuracy in [0, 1]

    Raises:
        ContractError: If k < 1 or k exceeds the training set
    """
    train, y_train = _check_pair(train_embeddings, train_labels, "train")
    test, y_test = _check_pair(test_embeddings, test_labels, "test")
    indices, distances = nearest_neighbors(train, test, k, labels=y_train)
    predictions = np.array([_vote(y_train[idx], dist) for idx, dist in zip(indices, distances)])
    accuracy = float((predictions == y_test).mean())
    logger.debug("kNN k=%d on %d queries: %.4f", k, test.shape[0], accuracy)
    return accuracy


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def linear_probe(
    train_embeddings: np.ndarray,
    train_labels: np.ndarray,
    test_embeddings: np.ndarray,
    test_labels: np.ndarray,
    config: ProbeConfig = ProbeConfig(),
) -> float:
    """
    Multinomial logistic regression by full-batch gradient descent on frozen embeddings.

    Weights start at zero and there is no regularization, so the result is
    deterministic. Test labels never seen in training count as errors.

    Raises:
        ContractError: If the training labels hold a single class
    """
    train, y_train = _check_pair(train_embeddings, train_labels, "train")
    test, y_test = _check_pair(test_embeddings, test_labels, "test")
    if train.shape[1] != test.shape[1]:
        raise DimensionError(f"embedding widths differ: {train.shape[1]} vs {test.shape[1]}")
    classes = np.unique(y_train)
    if classes.shape[0] < 2:
        raise ContractError(f"linear probe needs at least two classes, got {classes.tolist()}")

    if config.standardize:
        mu = train.mean(axis=0)
        sigma = np.maximum(train.std(axis=0), 1e-12)
        train = (train - mu) / sigma
        test = (test - mu) / sigma

    targets = (y_train[:, None] == classes[None, :]).astype(np.float64)
    weights = np.zeros((train.shape[1], classes.shape[0]))
    bias = np.zeros((1, classes.shape[0]))
    n = train.shape[0]
    for _ in range(config.iterations):
        residual = (_softmax_rows(train @ weights + bias) - targets) / n
        weights -= config.lr * (train.T @ residual)
        bias -= config.lr * residual.sum(axis=0, keepdims=True)

    predictions = classes[np.argmax(test @ weights + bias, axis=1)]
    accuracy = float((predictions == y_test).mean())
    logger.debug("Linear probe over %d classes: %.4f", classes.shape[0], accuracy)
    return accuracy
