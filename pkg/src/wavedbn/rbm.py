"""Restricted Boltzmann machines trained with contrastive divergence.

Vectors may be passed one at a time (shape ``(n,)``) or as a batch of rows
(shape ``(batch, n)``); conditionals and free energies broadcast over the
leading axis.

Randomness always comes from an explicit :class:`numpy.random.Generator`
(PCG64).  Its stream is fixed across platforms for a given seed, so training
is reproducible bit for bit on one machine.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import NumericalError, ValidationError

VISIBLE_KINDS = ("bernoulli_real", "gaussian")
# Enumeration of 2**(n_visible + n_hidden) states is capped here.
EXACT_STATE_LIMIT = 20


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class Rbm:
    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    visible_kind: str = "bernoulli_real"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.visible_bias = np.asarray(self.visible_bias, dtype=np.float64)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValidationError(f"weights must be a matrix, got shape {self.weights.shape}")
        nv, nh = self.weights.shape
        if nv == 0 or nh == 0:
            raise ValidationError("an RBM needs at least one visible and one hidden unit")
        if self.visible_bias.shape != (nv,) or self.hidden_bias.shape != (nh,):
            raise ValidationError(
                f"bias shapes {self.visible_bias.shape}, {self.hidden_bias.shape} "
                f"do not match weights {self.weights.shape}"
            )
        if self.visible_kind not in VISIBLE_KINDS:
            raise ValidationError(f"visible_kind must be one of {VISIBLE_KINDS}")

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def random(cls, n_visible, n_hidden, rng, std=0.01, visible_kind="bernoulli_real"):
        """Normal(0, std) weights and zero biases."""
        if n_visible < 1 or n_hidden < 1:
            raise ValidationError(f"layer sizes must be positive, got {n_visible}x{n_hidden}")
        return cls(
            rng.normal(0.0, std, size=(n_visible, n_hidden)),
            np.zeros(n_visible),
            np.zeros(n_hidden),
            visible_kind,
        )

    def copy(self) -> "Rbm":
        return Rbm(self.weights.copy(), self.visible_bias.copy(), self.hidden_bias.copy(),
                   self.visible_kind)

    def transposed(self) -> "Rbm":
        """The same bipartite model with the roles of the two layers swapped."""
        return Rbm(self.weights.T.copy(), self.hidden_bias.copy(), self.visible_bias.copy(),
                   "bernoulli_real")

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.weights).all()
            and np.isfinite(self.visible_bias).all()
            and np.isfinite(self.hidden_bias).all()
        )


@dataclass
class RbmTrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 10
    cd_steps: int = 1
    momentum_initial: float = 0.5
    momentum_final: float = 0.9
    momentum_switch_epoch: int = 5
    weight_decay: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        checks = [
            (0 < self.learning_rate < np.inf, "learning_rate must be positive and finite"),
            (_is_int(self.epochs) and self.epochs >= 1, "epochs must be a positive integer"),
            (_is_int(self.batch_size) and self.batch_size >= 1,
             "batch_size must be a positive integer"),
            (_is_int(self.cd_steps) and self.cd_steps >= 1, "cd_steps must be a positive integer"),
            (0 <= self.momentum_initial < 1, "momentum_initial must lie in [0, 1)"),
            (0 <= self.momentum_final < 1, "momentum_final must lie in [0, 1)"),
            (_is_int(self.momentum_switch_epoch) and self.momentum_switch_epoch >= 1,
             "momentum_switch_epoch must be a positive integer"),
            (0 <= self.weight_decay < np.inf, "weight_decay must be nonnegative and finite"),
            (_is_int(self.seed) and 0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)

    def momentum(self, epoch: int) -> float:
        """Momentum for a zero-based epoch index."""
        return self.momentum_initial if epoch < self.momentum_switch_epoch else self.momentum_final


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _check_len(x: np.ndarray, n: int, what: str):
    if x.ndim not in (1, 2) or x.shape[-1] != n:
        raise ValidationError(f"{what} must have length {n}, got shape {x.shape}")


def energy(rbm: Rbm, v, h) -> float:
    """``-b_v.v - b_h.h - v.W.h`` for a single configuration."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.shape != (rbm.n_visible,) or h.shape != (rbm.n_hidden,):
        raise ValidationError(
            f"energy expects v of length {rbm.n_visible} and h of length {rbm.n_hidden}, "
            f"got {v.shape} and {h.shape}"
        )
    return float(-(rbm.visible_bias @ v) - (rbm.hidden_bias @ h) - v @ rbm.weights @ h)


def prob_h_given_v(rbm: Rbm, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    _check_len(v, rbm.n_visible, "visible vector")
    return expit(v @ rbm.weights + rbm.hidden_bias)


def prob_v_given_h(rbm: Rbm, h) -> np.ndarray:
    """Sigmoid activations, or the unit-variance Gaussian mean for ``gaussian`` units."""
    h = np.asarray(h, dtype=np.float64)
    _check_len(h, rbm.n_hidden, "hidden vector")
    pre = h @ rbm.weights.T + rbm.visible_bias
    if rbm.visible_kind == "gaussian":
        return pre
    return expit(pre)


def sample_bernoulli(probs, rng: np.random.Generator) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if not ((probs >= 0) & (probs <= 1)).all():
        raise ValidationError("Bernoulli probabilities must lie in [0, 1]")
    return (rng.random(probs.shape) < probs).astype(np.float64)


def free_energy(rbm: Rbm, v):
    """Free energy of visible vector(s); the hidden units are summed out.

    For ``gaussian`` visibles the quadratic term ``0.5*|v - b_v|^2`` replaces
    the linear bias term.
    """
    v = np.asarray(v, dtype=np.float64)
    _check_len(v, rbm.n_visible, "visible vector")
    softplus = np.logaddexp(0.0, v @ rbm.weights + rbm.hidden_bias).sum(axis=-1)
    if rbm.visible_kind == "gaussian":
        return 0.5 * ((v - rbm.visible_bias) ** 2).sum(axis=-1) - softplus
    return -(v @ rbm.visible_bias) - softplus


def _all_states(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(-1, n)


def _check_enumerable(rbm: Rbm):
    if rbm.n_visible + rbm.n_hidden > EXACT_STATE_LIMIT:
        raise ValidationError(
            f"exact enumeration is limited to {EXACT_STATE_LIMIT} units, "
            f"got {rbm.n_visible + rbm.n_hidden}"
        )
    if rbm.visible_kind != "bernoulli_real":
        raise ValidationError("exact probabilities require binary visible units")


def log_partition_exact(rbm: Rbm) -> float:
    """log Z by summing exp(-E) over every joint binary state."""
    _check_enumerable(rbm)
    vs = _all_states(rbm.n_visible)
    hs = _all_states(rbm.n_hidden)
    neg_e = (vs @ rbm.visible_bias)[:, None] + (hs @ rbm.hidden_bias)[None, :] \
        + vs @ rbm.weights @ hs.T
    return float(logsumexp(neg_e))


def joint_probability_exact(rbm: Rbm, v, h) -> float:
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    _check_enumerable(rbm)
    if not (np.isin(v, (0.0, 1.0)).all() and np.isin(h, (0.0, 1.0)).all()):
        raise ValidationError("exact probabilities are defined for binary states only")
    return float(np.exp(-energy(rbm, v, h) - log_partition_exact(rbm)))


def cd_gradient(rbm: Rbm, batch, cd_steps: int, rng: np.random.Generator):
    """CD-k estimate of the log-likelihood gradient, averaged over the batch.

    Hidden states are sampled inside the Gibbs chain; reconstructions and the
    final hidden statistics use probabilities.  Returns
    ``(dW, db_v, db_h, reconstruction)``.
    """
    v0 = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if v0.shape[0] == 0 or v0.size == 0:
        raise ValidationError("cd_gradient needs a nonempty batch")
    _check_len(v0, rbm.n_visible, "batch vectors")
    if cd_steps < 1:
        raise ValidationError("cd_steps must be at least 1")
    ph0 = prob_h_given_v(rbm, v0)
    ph = ph0
    for _ in range(cd_steps):
        h = sample_bernoulli(ph, rng)
        vk = prob_v_given_h(rbm, h)
        ph = prob_h_given_v(rbm, vk)
    n = v0.shape[0]
    dw = (v0.T @ ph0 - vk.T @ ph) / n
    dbv = (v0 - vk).mean(axis=0)
    dbh = (ph0 - ph).mean(axis=0)
    return dw, dbv, dbh, vk


def train_rbm(rbm: Rbm, data, cfg: RbmTrainConfig) -> tuple[Rbm, list[float]]:
    """Train a copy of ``rbm`` with momentum CD-k and L2 decay on the weights.

    Returns the trained RBM and the mean squared reconstruction error of each
    epoch.  The input RBM is left untouched.
    """
    cfg.validate()
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValidationError("train_rbm needs at least one training vector")
    _check_len(data, rbm.n_visible, "training vectors")

    rng = make_rng(cfg.seed)
    model = rbm.copy()
    errors = []
    # Overflow is caught by the finiteness check below and raised as NumericalError.
    with np.errstate(over="ignore", invalid="ignore"):
        _run_epochs(model, data, cfg, rng, errors)
    return model, errors


def _run_epochs(model, data, cfg, rng, errors):
    vel_w = np.zeros_like(model.weights)
    vel_bv = np.zeros_like(model.visible_bias)
    vel_bh = np.zeros_like(model.hidden_bias)
    n = data.shape[0]
    for epoch in range(cfg.epochs):
        momentum = cfg.momentum(epoch)
        order = rng.permutation(n)
        sq_err = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = data[order[start:start + cfg.batch_size]]
            dw, dbv, dbh, recon = cd_gradient(model, batch, cfg.cd_steps, rng)
            vel_w = momentum * vel_w + cfg.learning_rate * (dw - cfg.weight_decay * model.weights)
            vel_bv = momentum * vel_bv + cfg.learning_rate * dbv
            vel_bh = momentum * vel_bh + cfg.learning_rate * dbh
            model.weights += vel_w
            model.visible_bias += vel_bv
            model.hidden_bias += vel_bh
            sq_err += float(((batch - recon) ** 2).sum())
        if not model.is_finite():
            raise NumericalError(f"RBM parameters became non-finite in epoch {epoch + 1}")
        errors.append(sq_err / data.size)
