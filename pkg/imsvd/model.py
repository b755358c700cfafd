"""Fully connected encoder and projector with a weight-sharing twin forward pass."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from core.constants import (
    DEFAULT_ENCODER_HIDDEN,
    DEFAULT_PROJECTOR_HIDDEN,
    DEFAULT_REPRESENTATION_DIM,
)
from core.exceptions import ContractError, DimensionError, NumericError
from engine.autodiff import Tape, Var, add, matmul, relu
from imsvd.discretize import BlockLayout, DiscretizedBatch, discretize_var


@dataclass(frozen=True)
class Architecture:
    """Layer widths of the encoder f and the projector g."""
    input_dim: int
    layout: BlockLayout
    encoder_hidden: Tuple[int, ...] = DEFAULT_ENCODER_HIDDEN
    representation_dim: int = DEFAULT_REPRESENTATION_DIM
    projector_hidden: Tuple[int, ...] = DEFAULT_PROJECTOR_HIDDEN

    def __post_init__(self):
        object.__setattr__(self, "encoder_hidden", tuple(int(w) for w in self.encoder_hidden))
        object.__setattr__(self, "projector_hidden", tuple(int(w) for w in self.projector_hidden))
        for width in self.encoder_sizes + self.projector_sizes:
            if width < 1:
                raise ContractError(f"layer widths must be at least 1, got {width}")

    @property
    def encoder_sizes(self) -> Tuple[int, ...]:
        return (self.input_dim, *self.encoder_hidden, self.representation_dim)

    @property
    def projector_sizes(self) -> Tuple[int, ...]:
        return (self.representation_dim, *self.projector_hidden, self.layout.dim)

    @property
    def num_encoder_layers(self) -> int:
        return len(self.encoder_sizes) - 1

    def layer_shapes(self) -> List[Tuple[int, int]]:
        """(fan_in, fan_out) of every linear layer, encoder first."""
        shapes = []
        for sizes in (self.encoder_sizes, self.projector_sizes):
            shapes.extend(zip(sizes[:-1], sizes[1:]))
        return shapes

    def to_manifest(self) -> Dict[str, object]:
        return {
            "input_dim": self.input_dim,
            "variables": self.layout.variables,
            "units": self.layout.units,
            "encoder_hidden": list(self.encoder_hidden),
            "representation_dim": self.representation_dim,
            "projector_hidden": list(self.projector_hidden),
        }

    @classmethod
    def from_manifest(cls, values: Mapping[str, str]) -> "Architecture":
        def widths(key: str) -> Tuple[int, ...]:
            raw = values.get(key, "")
            return tuple(int(w) for w in raw.split(",") if w.strip())

        return cls(
            input_dim=int(values["input_dim"]),
            layout=BlockLayout(int(values["variables"]), int(values["units"])),
            encoder_hidden=widths("encoder_hidden"),
            representation_dim=int(values["representation_dim"]),
            projector_hidden=widths("projector_hidden"),
        )


@dataclass
class ModelParams:
    """Weights (fan_in, fan_out) and biases (1, fan_out); encoder layers first."""
    architecture: Architecture
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        shapes = self.architecture.layer_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise DimensionError(
                f"expected {len(shapes)} layers, got {len(self.weights)} weights and {len(self.biases)} biases"
            )
        for i, ((fan_in, fan_out), w, b) in enumerate(zip(shapes, self.weights, self.biases)):
            if w.shape != (fan_in, fan_out) or b.shape != (1, fan_out):
                raise DimensionError(
                    f"layer {i}: expected weight {(fan_in, fan_out)} and bias {(1, fan_out)}, "
                    f"got {w.shape} and {b.shape}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NumericError(f"layer {i}: non-finite parameters")

    @property
    def layout(self) -> BlockLayout:
        return self.architecture.layout

    def layer_names(self) -> List[str]:
        names = []
        for i in range(len(self.weights)):
            part = "encoder" if i < self.architecture.num_encoder_layers else "projector"
            index = i if part == "encoder" else i - self.architecture.num_encoder_layers
            names.append(f"{part}.{index}")
        return names

    def named_arrays(self) -> Dict[str, np.ndarray]:
        """Parameters keyed ``<part>.<layer>.weight`` / ``.bias`` in layer order."""
        named: Dict[str, np.ndarray] = {}
        for name, w, b in zip(self.layer_names(), self.weights, self.biases):
            named[f"{name}.weight"] = w
            named[f"{name}.bias"] = b
        return named

    def with_arrays(self, named: Mapping[str, np.ndarray]) -> "ModelParams":
        names = self.layer_names()
        return ModelParams(
            architecture=self.architecture,
            weights=[np.array(named[f"{n}.weight"], dtype=np.float64) for n in names],
            biases=[np.array(named[f"{n}.bias"], dtype=np.float64) for n in names],
        )

    def copy(self) -> "ModelParams":
        return self.with_arrays(self.named_arrays())

    def matrices(self) -> List[np.ndarray]:
        """Flat list (w0, b0, w1, b1, ...) as stored in checkpoints."""
        return list(self.named_arrays().values())

    @classmethod
    def from_matrices(cls, architecture: Architecture, matrices: List[np.ndarray]) -> "ModelParams":
        return cls(architecture, weights=list(matrices[0::2]), biases=list(matrices[1::2]))


def init_params(architecture: Architecture, seed: int) -> ModelParams:
    """
    Uniform Glorot initialization with bound sqrt(6 / (fan_in + fan_out)); zero biases.

    Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in architecture.layer_shapes():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros((1, fan_out)))
    return ModelParams(architecture, weights, biases)


@dataclass
class BoundParams:
    """Parameters registered as leaves of one tape."""
    architecture: Architecture
    named: Dict[str, Var]

    @classmethod
    def bind(cls, tape: Tape, params: ModelParams, requires_grad: bool = True) -> "BoundParams":
        named = {
            name: tape.leaf(array, name=name, requires_grad=requires_grad)
            for name, array in params.named_arrays().items()
        }
        return cls(params.architecture, named)

    def layers(self, part: str) -> List[Tuple[Var, Var]]:
        count = (
            self.architecture.num_encoder_layers
            if part == "encoder"
            else len(self.architecture.projector_sizes) - 1
        )
        return [(self.named[f"{part}.{i}.weight"], self.named[f"{part}.{i}.bias"]) for i in range(count)]

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: var.grad for name, var in self.named.items()}


def _linear(x: Var, weight: Var, bias: Var) -> Var:
    ones = x.tape.constant(np.ones((x.shape[0], 1)))
    return add(matmul(x, weight), matmul(ones, bias))


def _mlp(x: Var, layers: List[Tuple[Var, Var]]) -> Var:
    out = x
    for i, (weight, bias) in enumerate(layers):
        out = _linear(out, weight, bias)
        if i < len(layers) - 1:
            out = relu(out)
    return out


def forward(bound: BoundParams, x: Var) -> Tuple[Var, Var]:
    """
    Encoder then projector, relu between layers of each.

    Args:
        bound: Parameters on the same tape as x
        x: (N, input_dim) inputs

    Returns:
        (h, z): (N, H) representations and (N, D) projector outputs
    """
    if x.shape[1] != bound.architecture.input_dim:
        raise DimensionError(
            f"forward: input width {x.shape[1]} does not match input_dim={bound.architecture.input_dim}"
        )
    h = _mlp(x, bound.layers("encoder"))
    z = _mlp(h, bound.layers("projector"))
    return h, z


@dataclass
class TwinOutput:
    """Both branches of the twin forward pass."""
    q1: Var
    q2: Var
    h1: Var = field(repr=False)
    h2: Var = field(repr=False)


def twin_forward(bound: BoundParams, x1: Var, x2: Var) -> TwinOutput:
    """
    Run both augmented views through the same parameters and discretize them.

    Gradients from both branches accumulate into the shared leaves.
    """
    if x1.shape != x2.shape:
        raise DimensionError(f"twin_forward: view shapes differ, {x1.shape} vs {x2.shape}")
    layout = bound.architecture.layout
    h1, z1 = forward(bound, x1)
    h2, z2 = forward(bound, x2)
    return TwinOutput(q1=discretize_var(z1, layout), q2=discretize_var(z2, layout), h1=h1, h2=h2)


def encode(params: ModelParams, x: np.ndarray) -> Tuple[np.ndarray, DiscretizedBatch]:
    """Forward-only pass returning representations h and discretized codes q."""
    tape = Tape()
    bound = BoundParams.bind(tape, params, requires_grad=False)
    h, z = forward(bound, tape.constant(x))
    q = discretize_var(z, params.layout)
    return h.value, DiscretizedBatch(q=q.value, layout=params.layout)


def encode_batched(
    params: ModelParams,
    x: np.ndarray,
    batch_size: int,
    threads: int = 1,
) -> Tuple[np.ndarray, DiscretizedBatch]:
    """
    :func:`encode` over fixed-size chunks, concatenated in input order.

    With ``threads > 1`` the chunks are encoded concurrently; results are
    still joined in chunk order.
    """
    if batch_size < 1:
        raise ContractError(f"encode_batched: batch size must be positive, got {batch_size}")
    starts = list(range(0, x.shape[0], batch_size))
    chunks = [x[s:s + batch_size] for s in starts]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda chunk: encode(params, chunk), chunks))
    else:
        results = [encode(params, chunk) for chunk in chunks]
    h = np.concatenate([r[0] for r in results], axis=0)
    q = np.concatenate([r[1].q for r in results], axis=0)
    return h, DiscretizedBatch(q=q, layout=params.layout)


def gradient_norm(grads: Mapping[str, Optional[np.ndarray]]) -> float:
    return float(np.sqrt(sum(float((g ** 2).sum()) for g in grads.values() if g is not None)))
