"""Adam and SGD with momentum, both with decoupled weight decay."""
from abc import ABC, abstractmethod
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from core.exceptions import CheckpointError, ContractError
from imsvd.model import ModelParams
from training.config import OptimizerKind, TrainConfig


class Optimizer(ABC):
    """Stateful update rule over named parameter arrays."""

    def __init__(self, weight_decay: float = 0.0):
        self.weight_decay = weight_decay
        self.steps = 0

    def step(self, params: ModelParams, grads: Mapping[str, Optional[np.ndarray]], lr: float) -> ModelParams:
        """
        Apply one update and return new parameters; the input is not modified.

        Weight decay is applied first as p <- p - lr * wd * p.
        """
        named = params.named_arrays()
        missing = [name for name in named if grads.get(name) is None]
        if missing:
            raise ContractError(f"optimizer: no gradient for {', '.join(missing)}")
        self.steps += 1
        updated: Dict[str, np.ndarray] = {}
        for name, value in named.items():
            decayed = value - lr * self.weight_decay * value
            updated[name] = decayed - lr * self._direction(name, grads[name])
        return params.with_arrays(updated)

    @abstractmethod
    def _direction(self, name: str, grad: np.ndarray) -> np.ndarray:
        """Update direction for one parameter; advances that parameter's state."""

    @abstractmethod
    def _slots(self) -> List[Dict[str, np.ndarray]]:
        """Per-parameter state dictionaries in storage order."""

    def state_dict(self, params: ModelParams) -> List[np.ndarray]:
        """
        Optimizer state as a flat matrix list: a 1x1 step counter, then every
        slot's matrices in parameter order. Unset slots are stored as zeros.
        """
        matrices = [np.array([[float(self.steps)]])]
        for slot in self._slots():
            for name, value in params.named_arrays().items():
                matrices.append(slot.get(name, np.zeros_like(value)))
        return matrices

    def load_state(self, params: ModelParams, matrices: Sequence[np.ndarray]) -> None:
        named = params.named_arrays()
        slots = self._slots()
        expected = 1 + len(slots) * len(named)
        if len(matrices) != expected:
            raise CheckpointError(f"optimizer state has {len(matrices)} matrices, expected {expected}")
        self.steps = int(matrices[0][0, 0])
        position = 1
        for slot in slots:
            slot.clear()
            for name, value in named.items():
                if matrices[position].shape != value.shape:
                    raise CheckpointError(
                        f"optimizer state for {name} has shape {matrices[position].shape}, expected {value.shape}"
                    )
                slot[name] = np.array(matrices[position], dtype=np.float64)
                position += 1


class Adam(Optimizer):
    def __init__(self, beta1: float, beta2: float, eps: float, weight_decay: float = 0.0):
        super().__init__(weight_decay)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.first: Dict[str, np.ndarray] = {}
        self.second: Dict[str, np.ndarray] = {}

    def _direction(self, name: str, grad: np.ndarray) -> np.ndarray:
        m = self.first.get(name, np.zeros_like(grad))
        v = self.second.get(name, np.zeros_like(grad))
        m = self.beta1 * m + (1.0 - self.beta1) * grad
        v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
        self.first[name] = m
        self.second[name] = v
        m_hat = m / (1.0 - self.beta1 ** self.steps)
        v_hat = v / (1.0 - self.beta2 ** self.steps)
        return m_hat / (np.sqrt(v_hat) + self.eps)

    def _slots(self) -> List[Dict[str, np.ndarray]]:
        return [self.first, self.second]


class SGDMomentum(Optimizer):
    def __init__(self, momentum: float, weight_decay: float = 0.0):
        super().__init__(weight_decay)
        self.momentum = momentum
        self.velocity: Dict[str, np.ndarray] = {}

    def _direction(self, name: str, grad: np.ndarray) -> np.ndarray:
        velocity = self.momentum * self.velocity.get(name, np.zeros_like(grad)) + grad
        self.velocity[name] = velocity
        return velocity

    def _slots(self) -> List[Dict[str, np.ndarray]]:
        return [self.velocity]


def build_optimizer(config: TrainConfig) -> Optimizer:
    if config.optimizer is OptimizerKind.SGD_MOMENTUM:
        return SGDMomentum(momentum=config.momentum, weight_decay=config.weight_decay)
    return Adam(
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )
