"""Deep belief networks: greedy RBM pre-training and softmax fine-tuning."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .errors import NumericalError, ValidationError
from .rbm import Rbm, RbmTrainConfig, _is_int, make_rng, prob_h_given_v, train_rbm

# Stream keys for SeedSequence-derived generators.
_INIT, _PRETRAIN, _FINETUNE = 0, 1, 2


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit seed for one component, independent of every other key."""
    state = np.random.SeedSequence([seed, *key]).generate_state(1, dtype=np.uint64)
    return int(state[0])


@dataclass
class Dbn:
    layers: list[Rbm]
    softmax_weights: np.ndarray
    softmax_bias: np.ndarray

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("a DBN needs at least one RBM layer")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if lower.n_hidden != upper.n_visible:
                raise ValidationError(
                    f"layer dimensions do not chain: {lower.n_hidden} hidden units "
                    f"feed an RBM with {upper.n_visible} visible units"
                )
        self.softmax_weights = np.asarray(self.softmax_weights, dtype=np.float64)
        self.softmax_bias = np.asarray(self.softmax_bias, dtype=np.float64)
        if self.softmax_weights.shape != (self.layers[-1].n_hidden, self.softmax_bias.shape[0]):
            raise ValidationError(
                f"softmax head shape {self.softmax_weights.shape} does not match "
                f"{self.layers[-1].n_hidden} hidden units and {self.softmax_bias.shape[0]} classes"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_visible

    @property
    def n_classes(self) -> int:
        return self.softmax_bias.shape[0]

    @property
    def hidden_sizes(self) -> list[int]:
        return [layer.n_hidden for layer in self.layers]

    def n_parameters(self) -> int:
        """Weights and hidden biases used at inference, plus the softmax head."""
        total = sum(layer.weights.size + layer.hidden_bias.size for layer in self.layers)
        return total + self.softmax_weights.size + self.softmax_bias.size

    def copy(self) -> "Dbn":
        return Dbn([layer.copy() for layer in self.layers],
                   self.softmax_weights.copy(), self.softmax_bias.copy())

    def is_finite(self) -> bool:
        return all(layer.is_finite() for layer in self.layers) and bool(
            np.isfinite(self.softmax_weights).all() and np.isfinite(self.softmax_bias).all()
        )


@dataclass
class DbnTrainConfig:
    pretrain: RbmTrainConfig = field(default_factory=RbmTrainConfig)
    finetune_learning_rate: float = 0.1
    finetune_epochs: int = 100
    # None means reuse the pre-training batch size.
    finetune_batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.pretrain.validate()
        if not 0 < self.finetune_learning_rate < np.inf:
            raise ValidationError("finetune_learning_rate must be positive and finite")
        if not (_is_int(self.finetune_epochs) and self.finetune_epochs >= 1):
            raise ValidationError("finetune_epochs must be a positive integer")
        if self.finetune_batch_size is not None and not (
            _is_int(self.finetune_batch_size) and self.finetune_batch_size >= 1
        ):
            raise ValidationError("finetune_batch_size must be a positive integer")
        if not (_is_int(self.seed) and 0 <= self.seed < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")

    @property
    def batch_size(self) -> int:
        return self.finetune_batch_size or self.pretrain.batch_size


def build_dbn(input_dim: int, hidden_sizes, n_classes: int, seed: int = 0,
              visible_kind: str = "bernoulli_real") -> Dbn:
    """Stack of RBMs with chained sizes and a softmax head, randomly initialised."""
    hidden_sizes = list(hidden_sizes)
    if not hidden_sizes:
        raise ValidationError("hidden_sizes must list at least one layer")
    sizes = [input_dim, *hidden_sizes]
    if any(not _is_int(s) or s < 1 for s in sizes) or not _is_int(n_classes) or n_classes < 1:
        raise ValidationError(
            f"layer sizes and class count must be positive integers, got {sizes} and {n_classes}"
        )
    rng = make_rng(derive_seed(seed, _INIT))
    layers = [
        Rbm.random(n_in, n_out, rng, visible_kind=visible_kind if i == 0 else "bernoulli_real")
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:]))
    ]
    head = rng.normal(0.0, 0.01, size=(hidden_sizes[-1], n_classes))
    return Dbn(layers, head, np.zeros(n_classes))


def _as_batch(dbn: Dbn, data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != dbn.input_dim:
        raise ValidationError(f"expected input vectors of length {dbn.input_dim}, got shape {x.shape}")
    return x


def pretrain(dbn: Dbn, data, cfg: DbnTrainConfig) -> tuple[Dbn, list[list[float]]]:
    """Greedy layer-wise CD training; upper layers see lower-layer probabilities.

    Returns a new DBN and the reconstruction-error trace of every layer.  The
    softmax head is copied unchanged.
    """
    cfg.validate()
    x = np.atleast_2d(_as_batch(dbn, data))
    layers, traces = [], []
    for index, layer in enumerate(dbn.layers):
        layer_cfg = replace(cfg.pretrain, seed=derive_seed(cfg.seed, _PRETRAIN, index))
        trained, trace = train_rbm(layer, x, layer_cfg)
        layers.append(trained)
        traces.append(trace)
        if index + 1 < len(dbn.layers):
            x = prob_h_given_v(trained, x)
    return Dbn(layers, dbn.softmax_weights.copy(), dbn.softmax_bias.copy()), traces


def _logits(dbn: Dbn, x: np.ndarray) -> np.ndarray:
    for layer in dbn.layers:
        x = expit(x @ layer.weights + layer.hidden_bias)
    return x @ dbn.softmax_weights + dbn.softmax_bias


def forward(dbn: Dbn, v) -> np.ndarray:
    """Class probabilities for one vector or a batch of row vectors."""
    return softmax(_logits(dbn, _as_batch(dbn, v)), axis=-1)


def predict(dbn: Dbn, v):
    """Most probable class; ``argmax`` resolves exact ties to the lowest index."""
    pred = np.argmax(_logits(dbn, _as_batch(dbn, v)), axis=-1)
    return int(pred) if np.ndim(pred) == 0 else pred


def _check_labels(dbn: Dbn, x: np.ndarray, labels) -> np.ndarray:
    y = np.asarray(labels)
    if x.shape[0] == 0:
        raise ValidationError("empty data set")
    if y.shape != (x.shape[0],):
        raise ValidationError(f"got {x.shape[0]} vectors but {y.size} labels")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValidationError("labels must be integers")
    if y.min() < 0 or y.max() >= dbn.n_classes:
        raise ValidationError(f"labels must lie in [0, {dbn.n_classes}), got range "
                              f"[{y.min()}, {y.max()}]")
    return y


def accuracy(dbn: Dbn, data, labels) -> float:
    x = np.atleast_2d(_as_batch(dbn, data))
    y = _check_labels(dbn, x, labels)
    return float(np.count_nonzero(predict(dbn, x) == y)) / y.size


def loss_and_gradients(dbn: Dbn, data, labels):
    """Mean cross-entropy and its gradient by backpropagation.

    Gradients come back as ``[(dW, db_h) per layer] + [(dW_head, db_head)]``;
    visible biases do not take part in the discriminative pass.
    """
    x = np.atleast_2d(_as_batch(dbn, data))
    y = _check_labels(dbn, x, labels)
    n = x.shape[0]
    acts = [x]
    for layer in dbn.layers:
        acts.append(expit(acts[-1] @ layer.weights + layer.hidden_bias))
    logp = log_softmax(acts[-1] @ dbn.softmax_weights + dbn.softmax_bias, axis=1)
    loss = -logp[np.arange(n), y].mean()

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [(acts[-1].T @ delta, delta.sum(axis=0))]
    back = delta @ dbn.softmax_weights.T
    for i in range(len(dbn.layers) - 1, -1, -1):
        a = acts[i + 1]
        delta = back * a * (1.0 - a)
        grads.append((acts[i].T @ delta, delta.sum(axis=0)))
        if i:
            back = delta @ dbn.layers[i].weights.T
    grads.reverse()
    return float(loss), grads


def finetune(dbn: Dbn, data, labels, cfg: DbnTrainConfig,
             on_epoch: Callable[[int, Dbn], bool] | None = None) -> tuple[Dbn, list[float]]:
    """Minimise cross-entropy over all layers with mini-batch momentum SGD.

    The momentum schedule is the one configured for pre-training.  Returns a
    new DBN and the mean training loss of every epoch.  ``on_epoch(epoch,
    dbn)`` is called after each epoch and may return True to stop early.
    """
    cfg.validate()
    x = np.atleast_2d(_as_batch(dbn, data))
    y = _check_labels(dbn, x, labels)
    model = dbn.copy()
    params = [(layer.weights, layer.hidden_bias) for layer in model.layers]
    params.append((model.softmax_weights, model.softmax_bias))
    velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    rng = make_rng(derive_seed(cfg.seed, _FINETUNE))
    trace = []
    # Overflow surfaces through the finiteness check as NumericalError.
    with np.errstate(over="ignore", invalid="ignore"):
        _finetune_epochs(model, x, y, cfg, rng, params, velocity, trace, on_epoch)
    return model, trace


def _finetune_epochs(model, x, y, cfg, rng, params, velocity, trace, on_epoch):
    n, bs = x.shape[0], cfg.batch_size
    for epoch in range(cfg.finetune_epochs):
        momentum = cfg.pretrain.momentum(epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = loss_and_gradients(model, x[idx], y[idx])
            total += loss * idx.size
            for (w, b), (vw, vb), (gw, gb) in zip(params, velocity, grads):
                vw *= momentum
                vw -= cfg.finetune_learning_rate * gw
                vb *= momentum
                vb -= cfg.finetune_learning_rate * gb
                w += vw
                b += vb
        trace.append(total / n)
        if not np.isfinite(trace[-1]) or not model.is_finite():
            raise NumericalError(f"fine-tuning diverged in epoch {epoch + 1}")
        if on_epoch is not None and on_epoch(epoch, model):
            break
