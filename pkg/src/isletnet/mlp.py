"""Feedforward sigmoid networks trained by per-example backpropagation,
and the architecture-escalation ladder used for the two-class islet tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Trial order for the two-class networks: single hidden layers of growing
# width, then one two-layer fallback. The first layout that learns every
# training element is kept.
DEFAULT_LADDER: tuple[tuple[int, ...], ...] = (
    (2,), (5,), (10,), (15,), (20,), (25,), (30,), (35,), (40,), (45,),
    (50,), (100,), (50, 20),
)

_SIGMOID_LO = np.nextafter(0.0, 1.0)
_SIGMOID_HI = np.nextafter(1.0, 0.0)


def sigmoid(x):
    """Logistic function, clipped into the open interval (0, 1) so that
    saturated units never report exactly 0 or 1."""
    x = np.asarray(x, dtype=np.float64)
    flat = np.atleast_1d(x)
    out = np.empty_like(flat)
    pos = flat >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-flat[pos]))
    ex = np.exp(flat[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _SIGMOID_LO, _SIGMOID_HI).reshape(x.shape)


@dataclass(frozen=True)
class Layout:
    """Layer sizes: input dimension, hidden widths (possibly none), and
    output dimension."""

    inputs: int
    hidden: tuple[int, ...]
    outputs: int

    def __post_init__(self):
        sizes = (self.inputs, *self.hidden, self.outputs)
        if any(s < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.inputs, *self.hidden, self.outputs)


class Network:
    """Weights and biases of a fully-connected sigmoid network.

    `weights[l]` has shape (fan_out, fan_in); every non-input layer applies
    the logistic sigmoid.
    """

    def __init__(self, layout: Layout, weights, biases):
        sizes = layout.sizes
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("layer count does not match layout")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l} shapes do not match layout")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("weights must be finite")
        self.layout = layout
        self.weights = list(weights)
        self.biases = list(biases)

    def copy(self) -> "Network":
        return Network(self.layout, [w.copy() for w in self.weights],
                       [b.copy() for b in self.biases])

    def to_json_dict(self) -> dict:
        return {
            "layout": {
                "inputs": self.layout.inputs,
                "hidden": list(self.layout.hidden),
                "outputs": self.layout.outputs,
            },
            "layers": [
                {"weights": w.tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Network":
        layout = Layout(
            inputs=int(data["layout"]["inputs"]),
            hidden=tuple(int(h) for h in data["layout"]["hidden"]),
            outputs=int(data["layout"]["outputs"]),
        )
        weights = [np.array(l["weights"], dtype=np.float64) for l in data["layers"]]
        biases = [np.array(l["bias"], dtype=np.float64) for l in data["layers"]]
        return cls(layout, weights, biases)


@dataclass(frozen=True)
class TrainParams:
    """Per-example gradient-descent settings.

    max_epochs is the per-architecture budget standing in for a
    convergence-speed cutoff; success means every positive scores at least
    `threshold` and every negative below it.
    """

    eta: float = 0.1
    momentum: float = 0.9
    max_epochs: int = 500
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class TrainResult:
    network: Network
    converged: bool
    epochs: int
    errors: int


@dataclass
class EscalationResult:
    network: Network
    converged: bool
    rung: int
    epochs: int
    errors: int


def init_network(layout: Layout, seed) -> Network:
    """Fresh network with weights uniform in +-1/sqrt(fan_in) and zero
    biases; deterministic in (layout, seed)."""
    rng = np.random.default_rng(seed)
    sizes = layout.sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(layout, weights, biases)


def forward(network: Network, x) -> np.ndarray:
    """Outputs for a single input vector; every value lies in (0, 1)."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (network.layout.inputs,):
        raise ValueError(
            f"input has shape {a.shape}, expected ({network.layout.inputs},)"
        )
    for w, b in zip(network.weights, network.biases):
        a = sigmoid(w @ a + b)
    return a


def batch_forward(network: Network, X) -> np.ndarray:
    """Outputs for a (n, inputs) batch, shape (n, outputs)."""
    a = np.asarray(X, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != network.layout.inputs:
        raise ValueError("batch shape does not match the network input")
    for w, b in zip(network.weights, network.biases):
        a = sigmoid(a @ w.T + b)
    return a


def loss(network: Network, X, T) -> float:
    """Summed squared error 0.5 * sum((y - t)^2) over a batch."""
    out = batch_forward(network, np.atleast_2d(X))
    return float(0.5 * np.sum((out - np.atleast_2d(T)) ** 2))


def gradients(network: Network, x, t):
    """Backpropagated gradient of the single-example squared error.

    Returns (weight_grads, bias_grads) aligned with the network layers.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    acts = [x]
    a = x
    for w, b in zip(network.weights, network.biases):
        a = sigmoid(w @ a + b)
        acts.append(a)
    delta = (acts[-1] - t) * acts[-1] * (1.0 - acts[-1])
    grads_w = [None] * len(network.weights)
    grads_b = [None] * len(network.biases)
    for l in range(len(network.weights) - 1, -1, -1):
        grads_w[l] = np.outer(delta, acts[l])
        grads_b[l] = delta
        if l > 0:
            delta = (network.weights[l].T @ delta) * acts[l] * (1.0 - acts[l])
    return grads_w, grads_b


def _count_errors(network: Network, positives, negatives, threshold: float) -> int:
    errors = 0
    if len(positives):
        errors += int(np.sum(batch_forward(network, positives)[:, 0] < threshold))
    if len(negatives):
        errors += int(np.sum(batch_forward(network, negatives)[:, 0] >= threshold))
    return errors


def _sgd_epoch(network: Network, X, T, order, eta, momentum, vel_w, vel_b):
    weights, biases = network.weights, network.biases
    n_layers = len(weights)
    for idx in order:
        x = X[idx]
        acts = [x]
        a = x
        for w, b in zip(weights, biases):
            a = sigmoid(w @ a + b)
            acts.append(a)
        delta = (acts[-1] - T[idx]) * acts[-1] * (1.0 - acts[-1])
        for l in range(n_layers - 1, -1, -1):
            back = weights[l].T @ delta if l > 0 else None
            vel_w[l] *= momentum
            vel_w[l] -= eta * np.outer(delta, acts[l])
            vel_b[l] *= momentum
            vel_b[l] -= eta * delta
            weights[l] += vel_w[l]
            biases[l] += vel_b[l]
            if l > 0:
                delta = back * acts[l] * (1.0 - acts[l])


def train(network: Network, positives, negatives,
          params: TrainParams = TrainParams()) -> TrainResult:
    """Two-class per-example backpropagation with momentum.

    Targets are 1 for positives and 0 for negatives. Success is checked
    before the first epoch and after each one; training stops at success
    or after `max_epochs`. Example order is reshuffled every epoch from
    the params seed. The network is updated in place.
    """
    positives = np.atleast_2d(np.asarray(positives, dtype=np.float64))
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if positives.size == 0 or negatives.size == 0:
        raise ValueError("need at least one positive and one negative example")
    if network.layout.outputs != 1:
        raise ValueError("two-class training expects a single output unit")

    X = np.vstack([positives, negatives])
    T = np.zeros((X.shape[0], 1))
    T[: len(positives), 0] = 1.0

    errors = _count_errors(network, positives, negatives, params.threshold)
    if errors == 0:
        return TrainResult(network, True, 0, 0)

    rng = np.random.default_rng(params.seed)
    vel_w = [np.zeros_like(w) for w in network.weights]
    vel_b = [np.zeros_like(b) for b in network.biases]
    for epoch in range(1, params.max_epochs + 1):
        order = rng.permutation(X.shape[0])
        _sgd_epoch(network, X, T, order, params.eta, params.momentum,
                   vel_w, vel_b)
        errors = _count_errors(network, positives, negatives, params.threshold)
        if errors == 0:
            return TrainResult(network, True, epoch, 0)
    return TrainResult(network, False, params.max_epochs, errors)


def train_multiclass(network: Network, features, labels,
                     params: TrainParams = TrainParams()) -> TrainResult:
    """Per-example backpropagation against one-hot targets; stops early
    once every training point is argmax-correct."""
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if labels.max() >= network.layout.outputs:
        raise ValueError("label outside the network's output range")
    T = np.zeros((X.shape[0], network.layout.outputs))
    T[np.arange(X.shape[0]), labels] = 1.0

    def n_errors() -> int:
        pred = batch_forward(network, X).argmax(axis=1)
        return int(np.sum(pred != labels))

    errors = n_errors()
    if errors == 0:
        return TrainResult(network, True, 0, 0)
    rng = np.random.default_rng(params.seed)
    vel_w = [np.zeros_like(w) for w in network.weights]
    vel_b = [np.zeros_like(b) for b in network.biases]
    for epoch in range(1, params.max_epochs + 1):
        order = rng.permutation(X.shape[0])
        _sgd_epoch(network, X, T, order, params.eta, params.momentum,
                   vel_w, vel_b)
        errors = n_errors()
        if errors == 0:
            return TrainResult(network, True, epoch, 0)
    return TrainResult(network, False, params.max_epochs, errors)


def escalate_architecture(positives, negatives,
                          ladder=DEFAULT_LADDER,
                          params: TrainParams = TrainParams()) -> EscalationResult:
    """Try layouts in ladder order, each from a fresh seed-derived
    initialization, and keep the first that learns every element.

    If nothing converges within its epoch budget, the layout with the
    fewest remaining training errors is returned, flagged non-converged.
    """
    positives = np.atleast_2d(np.asarray(positives, dtype=np.float64))
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if positives.size == 0 or negatives.size == 0:
        raise ValueError("need at least one positive and one negative example")
    dim = positives.shape[1]

    best: EscalationResult | None = None
    for rung, hidden in enumerate(ladder):
        layout = Layout(inputs=dim, hidden=tuple(hidden), outputs=1)
        net = init_network(layout, seed=[params.seed, rung])
        result = train(net, positives, negatives, params)
        if result.converged:
            return EscalationResult(result.network, True, rung,
                                    result.epochs, 0)
        if best is None or result.errors < best.errors:
            best = EscalationResult(result.network, False, rung,
                                    result.epochs, result.errors)
    assert best is not None
    return best
