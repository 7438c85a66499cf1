"""From-scratch multi-layer perceptron shared by the disaster detector and the
spectrum scorer: sigmoid hidden layers, sigmoid or identity output, plain
backpropagation gradient descent, and z-score feature standardization."""

from dataclasses import dataclass, field

import numpy as np

DISASTER_HAPPENED = 101
DISASTER_NOT_HAPPENED = 102

INIT_HALF_WIDTH = 0.5


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 200
    batch_size: int = 0  # 0 = full batch
    seed: int = 0
    loss: str = "cross-entropy"  # or "squared"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss not in ("cross-entropy", "squared"):
            raise ValueError(f"unknown loss {self.loss!r}")


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form is overflow-safe for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class Mlp:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "sigmoid"  # or "identity"
    feat_mean: np.ndarray = field(default=None)
    feat_std: np.ndarray = field(default=None)

    @classmethod
    def init(cls, layer_sizes: list[int], rng: np.random.Generator,
             output_activation: str = "sigmoid") -> "Mlp":
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ValueError("layer_sizes needs >= 2 positive entries")
        if output_activation not in ("sigmoid", "identity"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        weights = []
        biases = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.uniform(-INIT_HALF_WIDTH, INIT_HALF_WIDTH, (n_in, n_out)))
            biases.append(rng.uniform(-INIT_HALF_WIDTH, INIT_HALF_WIDTH, n_out))
        return cls(layer_sizes=list(layer_sizes), weights=weights, biases=biases,
                   output_activation=output_activation,
                   feat_mean=np.zeros(layer_sizes[0]),
                   feat_std=np.ones(layer_sizes[0]))

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if self.feat_mean is None:
            return x
        return (x - self.feat_mean) / self.feat_std

    def _forward_acts(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations per layer for a batch (rows = samples); x already standardized."""
        acts = [x]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            if i == last and self.output_activation == "identity":
                acts.append(z)
            else:
                acts.append(sigmoid(z))
        return acts

    def forward(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.layer_sizes[0]:
            raise ValueError(
                f"expected feature vector of length {self.layer_sizes[0]}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite feature value")
        return self._forward_acts(self._standardize(x)[None, :])[-1][0]

    def classify_binary(self, features) -> int:
        if self.layer_sizes[-1] != 1 or self.output_activation != "sigmoid":
            raise ValueError("binary classification needs a single sigmoid output")
        out = self.forward(features)[0]
        return DISASTER_HAPPENED if out > 0.5 else DISASTER_NOT_HAPPENED

    # -- persistence: plain text, full precision ------------------------------

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(" ".join(str(s) for s in self.layer_sizes) + "\n")
            fh.write(self.output_activation + "\n")
            fh.write(" ".join(repr(float(v)) for v in self.feat_mean) + "\n")
            fh.write(" ".join(repr(float(v)) for v in self.feat_std) + "\n")
            for w, b in zip(self.weights, self.biases):
                for row in w:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
                fh.write(" ".join(repr(float(v)) for v in b) + "\n")

    @classmethod
    def load(cls, path) -> "Mlp":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        sizes = [int(tok) for tok in lines[0].split()]
        activation = lines[1].strip()
        feat_mean = np.array([float(t) for t in lines[2].split()])
        feat_std = np.array([float(t) for t in lines[3].split()])
        idx = 4
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = np.array([[float(t) for t in lines[idx + r].split()] for r in range(n_in)])
            idx += n_in
            b = np.array([float(t) for t in lines[idx].split()])
            idx += 1
            weights.append(w.reshape(n_in, n_out))
            biases.append(b)
        return cls(layer_sizes=sizes, weights=weights, biases=biases,
                   output_activation=activation, feat_mean=feat_mean, feat_std=feat_std)


def _batch_loss(model: Mlp, out: np.ndarray, y: np.ndarray, loss: str) -> float:
    if loss == "cross-entropy":
        eps = 1e-12
        return float(np.mean(np.sum(
            -(y * np.log(out + eps) + (1 - y) * np.log(1 - out + eps)), axis=1)))
    return float(np.mean(0.5 * np.sum((out - y) ** 2, axis=1)))


def _backprop(model: Mlp, acts: list[np.ndarray], y: np.ndarray):
    n = acts[0].shape[0]
    # cross-entropy + sigmoid and 0.5*squared + identity share delta = out - y
    delta = (acts[-1] - y) / n
    grads_w = []
    grads_b = []
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w.append(acts[layer].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if layer > 0:
            a = acts[layer]
            delta = (delta @ model.weights[layer].T) * a * (1.0 - a)
    return list(reversed(grads_w)), list(reversed(grads_b))


def gradients(model: Mlp, x: np.ndarray, y: np.ndarray, loss: str):
    """Backprop gradients of the mean per-sample loss over the batch.

    x is raw (unstandardized) input, rows = samples.
    """
    xs = model._standardize(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    return _backprop(model, model._forward_acts(xs), y)


def train(model: Mlp, dataset, cfg: TrainConfig, standardize: bool = True) -> list[float]:
    """Gradient-descent training in place; returns loss per epoch."""
    if not len(dataset):
        raise ValueError("empty training dataset")
    if isinstance(dataset, tuple):
        x, y = dataset
    else:
        x = np.array([np.asarray(f, dtype=float) for f, _ in dataset])
        y = np.array([np.atleast_1d(np.asarray(t, dtype=float)) for _, t in dataset])
    if y.shape[1] != model.layer_sizes[-1]:
        raise ValueError("target dimension does not match output layer")
    if standardize:
        model.feat_mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std < 1e-9] = 1.0
        model.feat_std = std
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n = x.shape[0]
    batch = cfg.batch_size if cfg.batch_size > 0 else n
    xs = model._standardize(x)
    losses = []
    for epoch in range(cfg.epochs):
        if batch >= n:
            # fused full-batch pass: one forward serves loss and gradients
            acts = model._forward_acts(xs)
            loss = _batch_loss(model, acts[-1], y, cfg.loss)
            gw, gb = _backprop(model, acts, y)
            for w, b, dw, db in zip(model.weights, model.biases, gw, gb):
                w -= cfg.learning_rate * dw
                b -= cfg.learning_rate * db
        else:
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                gw, gb = _backprop(model, model._forward_acts(xs[idx]), y[idx])
                for w, b, dw, db in zip(model.weights, model.biases, gw, gb):
                    w -= cfg.learning_rate * dw
                    b -= cfg.learning_rate * db
            loss = _batch_loss(model, model._forward_acts(xs)[-1], y, cfg.loss)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch + 1}")
        losses.append(loss)
    return losses
