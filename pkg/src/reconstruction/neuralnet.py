"""Small fully connected occupancy classifiers written directly on numpy.

A network maps a voxel center (x, y, z) through its hidden layers to one
logit; ``sigmoid(logit)`` is the probability that the voxel is occupied.
Training minimizes the mean binary cross-entropy with Adam.
"""
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Tuple

import numpy as np
from scipy.special import expit

from .config import INPUT_DIM, MAX_HIDDEN, MIN_RESOLUTION, WIDTHS, TrainConfig
from .errors import ConfigurationError, NumericOverflowError, TrainingDivergedError
from .geometry import VoxelGrid, voxel_centers

logger = logging.getLogger(__name__)

OCCUPANCY_THRESHOLD = 0.5
LOSS_EPSILON = 1e-7
INFERENCE_CHUNK = 1 << 16


class ActivationKind(IntEnum):
    RELU = 0
    ELU = 1
    SWISH = 2
    SIGMOID = 3
    TANH = 4

    @classmethod
    def from_name(cls, name):
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ConfigurationError(f"Invalid activation value: {name}")


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigurationError("activation alpha and beta must be positive")

    @property
    def name(self):
        return self.kind.name.lower()

    def __call__(self, x):
        kind = self.kind
        if kind is ActivationKind.RELU:
            return np.maximum(x, 0.0)
        if kind is ActivationKind.ELU:
            return np.where(x >= 0, x, self.alpha * np.expm1(np.minimum(x, 0.0)))
        if kind is ActivationKind.SWISH:
            return x * expit(self.beta * x)
        if kind is ActivationKind.SIGMOID:
            return expit(x)
        return np.tanh(x)

    def derivative(self, x):
        kind = self.kind
        if kind is ActivationKind.RELU:
            return (x >= 0).astype(np.float64)
        if kind is ActivationKind.ELU:
            return np.where(x >= 0, 1.0, self.alpha * np.exp(np.minimum(x, 0.0)))
        if kind is ActivationKind.SWISH:
            s = expit(self.beta * x)
            return s + self.beta * x * s * (1.0 - s)
        if kind is ActivationKind.SIGMOID:
            s = expit(x)
            return s * (1.0 - s)
        return 1.0 - np.tanh(x) ** 2

    def __str__(self):
        return self.name


RELU = Activation(ActivationKind.RELU)
ELU = Activation(ActivationKind.ELU)
SWISH = Activation(ActivationKind.SWISH)


def activate(a, x):
    return a(np.asarray(x, dtype=np.float64))


def activate_derivative(a, x):
    return a.derivative(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class Layer:
    width: int
    activation: Activation = RELU


@dataclass(frozen=True)
class ArchSpec:
    """Ordered hidden layers of a network; input is 3-D, output a single logit.

    Construction accepts any positive widths and depth so reference topologies
    outside the search space (8 x 32, 8 x 42) stay countable and trainable;
    :meth:`validate` enforces the search-space caps.
    """

    hidden: Tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if not self.hidden:
            raise ConfigurationError("architecture needs at least one hidden layer")
        if any(layer.width < 1 for layer in self.hidden):
            raise ConfigurationError("layer widths must be positive")

    @classmethod
    def uniform(cls, depth, width, activation=RELU):
        return cls(tuple(Layer(width, activation) for _ in range(depth)))

    @classmethod
    def from_string(cls, text):
        """Parse ``"32:relu,16:elu"``; ``"6x32:relu"`` repeats a layer."""
        layers = []
        for token in filter(None, (t.strip() for t in text.split(","))):
            count, _, rest = token.rpartition("x") if "x" in token.split(":")[0] else ("1", "", token)
            width, _, act = rest.partition(":")
            try:
                count, width = int(count), int(width)
            except ValueError:
                raise ConfigurationError(f"Invalid layer: {token}")
            activation = Activation(ActivationKind.from_name(act or "relu"))
            layers.extend(Layer(width, activation) for _ in range(count))
        return cls(tuple(layers))

    @property
    def depth(self):
        return len(self.hidden)

    @property
    def widths(self):
        return tuple(layer.width for layer in self.hidden)

    def in_space(self, widths=WIDTHS, max_hidden=MAX_HIDDEN, activations=None):
        if self.depth > max_hidden:
            return False
        if any(w not in widths for w in self.widths):
            return False
        if activations is not None and any(l.activation.kind not in activations for l in self.hidden):
            return False
        return True

    def validate(self, widths=WIDTHS, max_hidden=MAX_HIDDEN, activations=None):
        if not self.in_space(widths, max_hidden, activations):
            raise ConfigurationError(f"architecture {self} is outside the search space")
        return self

    def __str__(self):
        return ",".join(f"{layer.width}:{layer.activation}" for layer in self.hidden)


def parameter_count(arch):
    """Scalars in a network of this architecture, weights and biases, output head included."""
    fan_in = INPUT_DIM
    total = 0
    for width in arch.widths:
        total += fan_in * width + width
        fan_in = width
    return total + fan_in + 1


class MlpNetwork:
    """Weights ``W_i`` are (width_i x fan_in_i); the head is (1 x width_last) plus a bias of shape (1,).

    Parameter arrays may be views into a larger buffer (see
    :class:`~src.reconstruction.nas.SharedWeights`); training updates them in place.
    """

    def __init__(self, arch, weights, biases, head_weight, head_bias):
        self.arch = arch
        self.weights = list(weights)
        self.biases = list(biases)
        self.head_weight = head_weight
        self.head_bias = head_bias
        self._check_shapes()

    def _check_shapes(self):
        fan_in = INPUT_DIM
        for layer, w, b in zip(self.arch.hidden, self.weights, self.biases):
            if w.shape != (layer.width, fan_in) or b.shape != (layer.width,):
                raise ConfigurationError(f"parameter shapes do not match {self.arch}")
            fan_in = layer.width
        if len(self.weights) != self.arch.depth or self.head_weight.shape != (1, fan_in) or self.head_bias.shape != (1,):
            raise ConfigurationError(f"parameter shapes do not match {self.arch}")

    @classmethod
    def initialize(cls, arch, seed=0):
        """Uniform He-style init, limits sqrt(6 / fan_in); zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        fan_in = INPUT_DIM
        for width in arch.widths:
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(width, fan_in)))
            biases.append(np.zeros(width))
            fan_in = width
        limit = np.sqrt(6.0 / fan_in)
        head = rng.uniform(-limit, limit, size=(1, fan_in))
        return cls(arch, weights, biases, head, np.zeros(1))

    @classmethod
    def zeros(cls, arch):
        net = cls.initialize(arch)
        for p in net.parameters():
            p[...] = 0.0
        return net

    def parameters(self):
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        params.extend((self.head_weight, self.head_bias))
        return params

    @property
    def parameter_count(self):
        return sum(p.size for p in self.parameters())

    def copy(self):
        return MlpNetwork(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head_weight.copy(),
            self.head_bias.copy(),
        )

    def load_parameters(self, values):
        """Copy ``values`` (in :meth:`parameters` order) into this network's arrays."""
        params = self.parameters()
        if len(values) != len(params):
            raise ConfigurationError("parameter list length does not match architecture")
        for dst, src in zip(params, values):
            np.copyto(dst, np.asarray(src).reshape(dst.shape))

    def is_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def __repr__(self):
        return f"<MlpNetwork {self.arch} ({self.parameter_count} params)>"


@dataclass
class _ForwardCache:
    inputs: List[np.ndarray] = field(default_factory=list)
    preactivations: List[np.ndarray] = field(default_factory=list)
    last_hidden: np.ndarray = None


def _forward(net, positions):
    h = np.asarray(positions, dtype=np.float64).reshape(-1, INPUT_DIM)
    cache = _ForwardCache()
    for layer, w, b in zip(net.arch.hidden, net.weights, net.biases):
        z = h @ w.T + b
        cache.inputs.append(h)
        cache.preactivations.append(z)
        h = layer.activation(z)
    cache.last_hidden = h
    logits = (h @ net.head_weight.T + net.head_bias).ravel()
    if not np.all(np.isfinite(logits)):
        raise NumericOverflowError("numeric overflow")
    return logits, cache


def _backward(net, cache, grad_logits):
    """Parameter gradients, in :meth:`MlpNetwork.parameters` order."""
    g = grad_logits.reshape(-1, 1)
    grads_head_w = g.T @ cache.last_hidden
    grads_head_b = g.sum(axis=0)
    dh = g @ net.head_weight
    grads = []
    for i in reversed(range(net.arch.depth)):
        dz = dh * net.arch.hidden[i].activation.derivative(cache.preactivations[i])
        grads.append(dz.sum(axis=0))
        grads.append(dz.T @ cache.inputs[i])
        dh = dz @ net.weights[i]
    grads.reverse()
    grads.extend((grads_head_w, grads_head_b))
    return grads


def forward(net, positions):
    """Occupancy probabilities for a batch of 3-vectors."""
    logits, _ = _forward(net, positions)
    return expit(logits)


def loss(predictions, labels):
    """Mean binary cross-entropy, predictions clamped to [eps, 1 - eps]."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ValueError(f"predictions ({p.size}) and labels ({y.size}) differ in length")
    p = np.clip(p, LOSS_EPSILON, 1.0 - LOSS_EPSILON)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def loss_and_gradients(net, positions, labels):
    logits, cache = _forward(net, positions)
    p = expit(logits)
    y = np.asarray(labels, dtype=np.float64).ravel()
    value = loss(p, y)
    # The clamp has zero slope where it is active.
    clamped = (p < LOSS_EPSILON) | (p > 1.0 - LOSS_EPSILON)
    grad_logits = np.where(clamped, 0.0, (p - y) / len(y))
    return value, _backward(net, cache, grad_logits)


class AdamOptimizer:
    """Adam over a fixed list of arrays, updated in place."""

    def __init__(self, params, learning_rate=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    network: MlpNetwork
    losses: List[float]


def train(net, data, cfg=None):
    """Train ``net`` in place on ``data`` (anything with ``positions`` and ``labels``).

    Returns the same network object with the per-epoch mean losses. A
    non-finite loss raises :class:`TrainingDivergedError` whose checkpoint is
    the network at the start of the failing epoch.
    """
    cfg = cfg or TrainConfig()
    positions = np.asarray(data.positions, dtype=np.float64)
    labels = np.asarray(data.labels, dtype=np.float64)
    if len(positions) == 0:
        raise ValueError("training data is empty")
    if cfg.epochs == 0:
        return TrainResult(net, [])

    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamOptimizer(net.parameters(), cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
    history = []
    for epoch in range(cfg.epochs):
        checkpoint = net.copy()
        order = rng.permutation(len(positions))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            try:
                value, grads = loss_and_gradients(net, positions[batch], labels[batch])
            except NumericOverflowError:
                value = float("nan")
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"training diverged in epoch {epoch + 1}", checkpoint=checkpoint, epoch=epoch + 1
                )
            optimizer.step(grads)
            total += value * len(batch)
        history.append(total / len(order))
        logger.debug("%s epoch %d/%d loss %.6f", net.arch, epoch + 1, cfg.epochs, history[-1])
    return TrainResult(net, history)


def predict_occupancy(net, positions, chunk=INFERENCE_CHUNK):
    """Thresholded predictions, evaluated chunk by chunk; each sample is independent of the others."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, INPUT_DIM)
    out = np.empty(len(positions), dtype=bool)
    for start in range(0, len(positions), chunk):
        out[start:start + chunk] = forward(net, positions[start:start + chunk]) >= OCCUPANCY_THRESHOLD
    return out


def full_grid_accuracy(net, grid, subsample=None, seed=0):
    """Fraction of voxels whose thresholded prediction matches the grid.

    ``subsample`` scores a seeded random subset of that many voxels instead of all N^3.
    """
    total = grid.resolution ** 3
    if subsample is not None and subsample < total:
        indices = np.random.default_rng(seed).choice(total, size=subsample, replace=False)
    else:
        indices = np.arange(total)
    predicted = predict_occupancy(net, voxel_centers(grid.resolution, indices))
    return float(np.mean(predicted == grid.bits[indices]))


def reconstruct(net, resolution):
    """Occupancy grid read off the network at every voxel center; no surface extraction."""
    if resolution < MIN_RESOLUTION:
        raise ConfigurationError(f"resolution ≥ {MIN_RESOLUTION}")
    return VoxelGrid.from_bits(predict_occupancy(net, voxel_centers(resolution)), resolution)
