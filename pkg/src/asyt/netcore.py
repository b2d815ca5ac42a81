"""Fixed-graph MLP engine shared by the digital parallel model and the emulated hardware.

Batches are row-major: an input batch has shape ``(batch, layer_sizes[0])`` and
weight matrices have shape ``(out, in)`` so that ``z = a @ W.T + b``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ACTIVATIONS = ("identity", "relu", "sigmoid_like", "tanh_saturating", "softmax")
LOSS_KINDS = ("cross_entropy", "squared")
LOG_EPS = 1e-12


class DimensionError(ValueError):
    """Array shapes disagree with the network description."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during propagation."""


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "softmax"
    clip_to_fan_in: bool = True

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        for kind in (self.hidden_activation, self.output_activation):
            if kind not in ACTIVATIONS:
                raise ValueError(f"unknown activation {kind!r}")
        if self.hidden_activation == "softmax":
            raise ValueError("softmax is only allowed at the output layer")

    @property
    def n_layers(self) -> int:
        """Number of weight layers (connections)."""
        return len(self.layer_sizes) - 1

    @property
    def n_hidden(self) -> int:
        return len(self.layer_sizes) - 2

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_neurons(self) -> int:
        """Neurons excluding the input layer."""
        return sum(self.layer_sizes[1:])

    def fan_in(self, layer: int) -> int:
        return self.layer_sizes[layer]

    def activation(self, layer: int) -> str:
        return self.output_activation if layer == self.n_layers - 1 else self.hidden_activation

    def shapes(self) -> list[tuple[int, int]]:
        return [(self.layer_sizes[l + 1], self.layer_sizes[l]) for l in range(self.n_layers)]

    def digest(self) -> str:
        text = json.dumps(
            {
                "layer_sizes": list(self.layer_sizes),
                "hidden": self.hidden_activation,
                "output": self.output_activation,
                "clip": self.clip_to_fan_in,
            },
            sort_keys=True,
        )
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class ParamSet:
    """Per-layer weights ``W[l]`` (out x in) and biases ``b[l]`` (out,).

    Also used for gradients and updates, which share the layout.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise DimensionError("weights and biases must have the same layer count")

    def __len__(self) -> int:
        return len(self.weights)

    def copy(self) -> "ParamSet":
        return ParamSet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flatten(self) -> np.ndarray:
        return np.concatenate([x.ravel() for x in self.arrays()])

    def map(self, fn) -> "ParamSet":
        return ParamSet([fn(w) for w in self.weights], [fn(b) for b in self.biases])

    def zip_map(self, other: "ParamSet", fn) -> "ParamSet":
        check_same_layout(self, other)
        return ParamSet(
            [fn(x, y) for x, y in zip(self.weights, other.weights)],
            [fn(x, y) for x, y in zip(self.biases, other.biases)],
        )

    def __add__(self, other: "ParamSet") -> "ParamSet":
        return self.zip_map(other, np.add)

    def __sub__(self, other: "ParamSet") -> "ParamSet":
        return self.zip_map(other, np.subtract)

    def scaled(self, c: float) -> "ParamSet":
        return self.map(lambda x: c * x)

    def equals(self, other: "ParamSet") -> bool:
        """Bitwise equality."""
        if len(self) != len(other):
            return False
        return all(np.array_equal(x, y) for x, y in zip(self.arrays(), other.arrays()))

    def is_zero(self) -> bool:
        return all(not np.any(x) for x in self.arrays())

    def digest(self) -> str:
        h = hashlib.sha256()
        for x in self.arrays():
            h.update(np.ascontiguousarray(x, dtype="<f8").tobytes())
        return h.hexdigest()


GradSet = ParamSet


def check_same_layout(a: ParamSet, b: ParamSet):
    if len(a) != len(b):
        raise DimensionError(f"layer count mismatch: {len(a)} vs {len(b)}")
    for x, y in zip(a.arrays(), b.arrays()):
        if x.shape != y.shape:
            raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")


def check_params(spec: NetworkSpec, params: ParamSet):
    if len(params) != spec.n_layers:
        raise DimensionError(f"expected {spec.n_layers} layers, got {len(params)}")
    for l, (out, inp) in enumerate(spec.shapes()):
        if params.weights[l].shape != (out, inp):
            raise DimensionError(f"W[{l}] has shape {params.weights[l].shape}, expected {(out, inp)}")
        if params.biases[l].shape != (out,):
            raise DimensionError(f"b[{l}] has shape {params.biases[l].shape}, expected {(out,)}")


def init_params(spec: NetworkSpec, rng: np.random.Generator, bias: float = 0.0) -> ParamSet:
    """Uniform fan-in scaled initialisation, ``W ~ U(-k, k)`` with ``k = sqrt(3 / fan_in)``."""
    weights, biases = [], []
    for out, inp in spec.shapes():
        k = np.sqrt(3.0 / inp)
        weights.append(rng.uniform(-k, k, size=(out, inp)))
        biases.append(np.full(out, float(bias)))
    return ParamSet(weights, biases)


def zeros_like(params: ParamSet) -> ParamSet:
    return params.map(np.zeros_like)


def clip_net_output(z: np.ndarray, fan_in: int) -> np.ndarray:
    """Clamp net outputs to the range ``[0, fan_in]`` a fully connected optical layer can represent."""
    return np.clip(z, 0.0, float(fan_in))


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sigmoid_like_consts(fan_in: int):
    k = 8.0 / fan_in
    lo = _logistic(-0.5 * k * fan_in)
    hi = _logistic(0.5 * k * fan_in)
    return k, lo, hi - lo


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def activate(kind: str, z: np.ndarray, fan_in: int) -> np.ndarray:
    if kind == "identity":
        return z.copy()
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid_like":
        # logistic centred on half the fan-in, rescaled so [0, A] maps onto [0, 1]
        k, lo, span = _sigmoid_like_consts(fan_in)
        return (_logistic(k * (z - 0.5 * fan_in)) - lo) / span
    if kind == "tanh_saturating":
        return fan_in * np.tanh(z / fan_in)
    if kind == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {kind!r}")


def activation_derivative(kind: str, z: np.ndarray, fan_in: int) -> np.ndarray:
    """Elementwise derivative; softmax is handled through the output delta instead."""
    if kind == "identity":
        return np.ones_like(z)
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "sigmoid_like":
        k, _, span = _sigmoid_like_consts(fan_in)
        s = _logistic(k * (z - 0.5 * fan_in))
        return k * s * (1.0 - s) / span
    if kind == "tanh_saturating":
        return 1.0 - np.tanh(z / fan_in) ** 2
    raise ValueError(f"no elementwise derivative for {kind!r}")


@dataclass
class ForwardRecord:
    """Pre-activations ``z[l]`` and activations ``a[l]``; ``a[0]`` is the input batch."""

    z: list[np.ndarray] = field(default_factory=list)
    a: list[np.ndarray] = field(default_factory=list)

    @property
    def prediction(self) -> np.ndarray:
        return self.a[-1]


def layer_activation(spec: NetworkSpec, layer: int, z: np.ndarray) -> np.ndarray:
    fan_in = spec.fan_in(layer)
    if spec.clip_to_fan_in:
        z = clip_net_output(z, fan_in)
    return activate(spec.activation(layer), z, fan_in)


def _as_batch(x, width: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise DimensionError(f"input batch must have {width} columns, got shape {x.shape}")
    return x


def forward(spec: NetworkSpec, params: ParamSet, x) -> ForwardRecord:
    check_params(spec, params)
    a = _as_batch(x, spec.layer_sizes[0])
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite input")
    rec = ForwardRecord(a=[a])
    for l in range(spec.n_layers):
        z = a @ params.weights[l].T + params.biases[l]
        a = layer_activation(spec, l, z)
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(a))):
            raise NumericError(f"non-finite value in layer {l}")
        rec.z.append(z)
        rec.a.append(a)
    return rec


def _check_pair(prediction, target):
    prediction = np.atleast_2d(np.asarray(prediction, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if prediction.shape != target.shape:
        raise DimensionError(f"prediction {prediction.shape} vs target {target.shape}")
    return prediction, target


def loss(prediction, target_onehot, kind: str = "cross_entropy") -> float:
    """Batch-mean loss. ``squared`` is ``0.5 * sum((p - y)^2)`` per sample."""
    p, y = _check_pair(prediction, target_onehot)
    if kind == "cross_entropy":
        return float(np.mean(-np.sum(y * np.log(p + LOG_EPS), axis=1)))
    if kind == "squared":
        return float(np.mean(0.5 * np.sum((p - y) ** 2, axis=1)))
    raise ValueError(f"unknown loss {kind!r}")


def output_delta(prediction, target_onehot) -> np.ndarray:
    """Per-sample error at the output layer, ``p - y``.

    This is dL/dz_out for softmax with cross-entropy, and dL/da_out for the
    squared loss. ``backprop`` applies the batch mean.
    """
    p, y = _check_pair(prediction, target_onehot)
    return p - y


def backprop(
    spec: NetworkSpec,
    params: ParamSet,
    record: ForwardRecord,
    delta_out,
    loss_kind: str = "cross_entropy",
) -> GradSet:
    """Batch-averaged gradients from an output delta through a forward record.

    ``record`` must come from ``forward`` with the same ``params``; the pseudo
    update relies on feeding a physical-system delta through the digital record.
    """
    check_params(spec, params)
    delta = np.atleast_2d(np.asarray(delta_out, dtype=np.float64))
    n = spec.n_layers
    if len(record.z) != n or len(record.a) != n + 1:
        raise DimensionError("forward record does not match the network depth")
    if delta.shape != record.z[-1].shape:
        raise DimensionError(f"delta shape {delta.shape} vs output {record.z[-1].shape}")

    batch = delta.shape[0]
    # dL/dz for the output layer
    last = n - 1
    if spec.output_activation == "softmax":
        if loss_kind != "cross_entropy":
            raise ValueError("softmax output is only supported with cross-entropy")
        dz = delta * _clip_mask(spec, last, record.z[last])
    else:
        dz = delta * _elementwise_grad(spec, last, record.z[last])

    grad_w = [None] * n
    grad_b = [None] * n
    for l in range(last, -1, -1):
        grad_w[l] = dz.T @ record.a[l] / batch
        grad_b[l] = dz.sum(axis=0) / batch
        if l > 0:
            dz = (dz @ params.weights[l]) * _elementwise_grad(spec, l - 1, record.z[l - 1])
    return ParamSet(grad_w, grad_b)


def _clip_mask(spec: NetworkSpec, layer: int, z: np.ndarray) -> np.ndarray:
    if not spec.clip_to_fan_in:
        return np.ones_like(z)
    return ((z > 0.0) & (z < spec.fan_in(layer))).astype(z.dtype)


def _elementwise_grad(spec: NetworkSpec, layer: int, z: np.ndarray) -> np.ndarray:
    fan_in = spec.fan_in(layer)
    zc = clip_net_output(z, fan_in) if spec.clip_to_fan_in else z
    return activation_derivative(spec.activation(layer), zc, fan_in) * _clip_mask(spec, layer, z)


def predict_labels(prediction: np.ndarray) -> np.ndarray:
    return np.argmax(prediction, axis=1)


def accuracy(prediction: np.ndarray, labels: Sequence[int]) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    return float(np.mean(predict_labels(prediction) == labels))
