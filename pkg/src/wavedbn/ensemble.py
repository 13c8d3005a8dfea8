"""Sixteen sub-band DBNs combined by accuracy-weighted voting."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import wavelet
from .dbn import Dbn, DbnTrainConfig, accuracy, build_dbn, finetune, predict, pretrain
from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class Preprocessing:
    """How raw images become DBN inputs.

    ``input_height``/``input_width`` are the raw image dimensions, before the
    optional 2x box downsampling.
    """

    input_height: int
    input_width: int
    downsample: int = 1
    wavelet: str = "haar"

    def __post_init__(self):
        if self.downsample not in (1, 2):
            raise ValidationError(f"downsample factor must be 1 or 2, got {self.downsample}")
        wavelet.get_filter(self.wavelet)
        step = 4 * self.downsample
        if self.input_height % step or self.input_width % step or min(
            self.input_height, self.input_width
        ) < step:
            raise ValidationError(
                f"{self.input_height}x{self.input_width} images cannot be downsampled by "
                f"{self.downsample} and split into 16 sub-bands; dimensions must be "
                f"multiples of {step}"
            )

    @property
    def subband_shape(self) -> tuple[int, int]:
        k = 4 * self.downsample
        return self.input_height // k, self.input_width // k

    @property
    def feature_dim(self) -> int:
        h, w = self.subband_shape
        return h * w

    def subbands(self, images) -> np.ndarray:
        """Raw sub-band features of shape ``(n, 16, feature_dim)``."""
        x = np.asarray(images, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (self.input_height, self.input_width):
            found = "x".join(map(str, x.shape[-2:])) if x.ndim >= 2 else str(x.shape)
            raise ValidationError(
                f"image dimensions mismatch: expected {self.input_height}x{self.input_width}, "
                f"found {found}"
            )
        if self.downsample == 2:
            x = wavelet.downsample_2x(x)
        return wavelet.flatten(wavelet.decompose_full_2level(x, self.wavelet))


def fit_scalers(features: np.ndarray) -> np.ndarray:
    """Per-sub-band (min, max) over every training image and pixel."""
    return np.stack([features.min(axis=(0, 2)), features.max(axis=(0, 2))], axis=1)


def apply_scalers(features: np.ndarray, scalers: np.ndarray) -> np.ndarray:
    """Rescale each sub-band to [0, 1]; unseen values are clamped, constant bands map to 0."""
    lo = scalers[:, 0][None, :, None]
    span = (scalers[:, 1] - scalers[:, 0])[None, :, None]
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (features - lo) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


@dataclass
class VoteTally:
    t: np.ndarray
    predicted: int


@dataclass
class MemberTiming:
    pretrain_seconds: float
    finetune_seconds: float

    @property
    def total_seconds(self) -> float:
        return self.pretrain_seconds + self.finetune_seconds


@dataclass
class EnsembleModel:
    dbns: list[Dbn]
    weights: np.ndarray
    n_classes: int
    scalers: np.ndarray
    preprocessing: Preprocessing

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.scalers = np.asarray(self.scalers, dtype=np.float64)
        n = wavelet.N_SUBBANDS
        if len(self.dbns) != n or self.weights.shape != (n,) or self.scalers.shape != (n, 2):
            raise ValidationError(f"an ensemble holds exactly {n} DBNs, weights and scalers")
        if not ((self.weights >= 0) & (self.weights <= 1)).all():
            raise ValidationError("ensemble weights must lie in [0, 1]")
        arch = self.dbns[0].hidden_sizes
        for dbn in self.dbns:
            if dbn.hidden_sizes != arch or dbn.n_classes != self.n_classes:
                raise ValidationError("all member DBNs must share architecture and class count")
            if dbn.input_dim != self.preprocessing.feature_dim:
                raise ValidationError(
                    f"DBN input size {dbn.input_dim} does not match sub-band size "
                    f"{self.preprocessing.feature_dim}"
                )

    @property
    def hidden_sizes(self) -> list[int]:
        return self.dbns[0].hidden_sizes

    def features(self, images) -> np.ndarray:
        """Scaled DBN inputs, shape ``(n, 16, feature_dim)``."""
        return apply_scalers(self.preprocessing.subbands(images), self.scalers)


def compute_weight(dbn: Dbn, train_data, train_labels) -> float:
    """Voting weight: one minus the training misclassification rate."""
    return accuracy(dbn, train_data, train_labels)


def weighted_vote(predictions, weights, n_classes: int) -> VoteTally:
    """Add each member's weight to the class it predicts; highest total wins.

    Class totals are accumulated with :func:`math.fsum`, so they do not
    depend on member order.  Ties go to the lowest class index.  When every
    total is zero (all voters carry zero weight) the decision falls back to
    an unweighted plurality.
    """
    predictions = [int(p) for p in predictions]
    weights = [float(w) for w in weights]
    if len(predictions) != len(weights):
        raise ValidationError(f"{len(predictions)} predictions but {len(weights)} weights")
    for p in predictions:
        if not 0 <= p < n_classes:
            raise ValidationError(f"predicted class {p} outside [0, {n_classes})")
    t = np.array([
        math.fsum(w for p, w in zip(predictions, weights) if p == cls)
        for cls in range(n_classes)
    ])
    if t.max(initial=0.0) > 0:
        winner = int(np.argmax(t))
    else:
        winner = int(np.argmax(np.bincount(predictions, minlength=n_classes)))
    return VoteTally(t=t, predicted=winner)


def _train_member(features, labels, hidden_sizes, n_classes, cfg: DbnTrainConfig,
                  visible_kind="bernoulli_real"):
    dbn = build_dbn(features.shape[1], hidden_sizes, n_classes, seed=cfg.seed,
                    visible_kind=visible_kind)
    start = time.perf_counter()
    dbn, _ = pretrain(dbn, features, cfg)
    mid = time.perf_counter()
    dbn, _ = finetune(dbn, features, labels, cfg)
    end = time.perf_counter()
    return dbn, MemberTiming(mid - start, end - mid)


def train_ensemble(images, labels, hidden_sizes, cfg: DbnTrainConfig,
                   preprocessing: Preprocessing, n_classes: int | None = None,
                   workers: int = 1, use_processes: bool | None = None,
                   visible_kind: str = "bernoulli_real",
                   ) -> tuple[EnsembleModel, list[MemberTiming]]:
    """Decompose, scale, and train one DBN per sub-band, then weight them.

    DBN ``j`` is seeded with ``cfg.seed + j``; members share nothing, so the
    result does not depend on ``workers``.  Members train in a process pool
    of ``workers`` processes when ``use_processes`` is true (default: when
    ``workers > 1``), otherwise one after another in this process.
    """
    cfg.validate()
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError("labels must be a 1-D integer array")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if cfg.seed + wavelet.N_SUBBANDS > 2**64:
        raise ValidationError("master seed too large to derive 16 member seeds")
    raw = preprocessing.subbands(images)
    if raw.shape[0] != labels.size:
        raise ValidationError(f"{raw.shape[0]} images but {labels.size} labels")
    scalers = fit_scalers(raw)
    x = apply_scalers(raw, scalers)
    jobs = [
        (np.ascontiguousarray(x[:, j]), labels, list(hidden_sizes), n_classes,
         replace(cfg, seed=cfg.seed + j), visible_kind)
        for j in range(wavelet.N_SUBBANDS)
    ]
    if workers < 1:
        raise ValidationError("workers must be at least 1")
    if use_processes is None:
        use_processes = workers > 1
    if not use_processes:
        results = [_train_member(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_member, *zip(*jobs)))
    dbns = [dbn for dbn, _ in results]
    for j, dbn in enumerate(dbns):
        if not dbn.is_finite():
            raise NumericalError(f"DBN {j} has non-finite parameters")
    weights = [compute_weight(dbn, x[:, j], labels) for j, dbn in enumerate(dbns)]
    model = EnsembleModel(dbns, np.array(weights), n_classes, scalers, preprocessing)
    return model, [timing for _, timing in results]


def member_predictions(model: EnsembleModel, images) -> np.ndarray:
    """Per-DBN class predictions, shape ``(n, 16)``."""
    x = model.features(images)
    return np.stack([predict(dbn, x[:, j]) for j, dbn in enumerate(model.dbns)], axis=1)


def predict_ensemble(model: EnsembleModel, image) -> tuple[int, VoteTally, np.ndarray]:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValidationError(f"predict_ensemble takes one 2-D image, got shape {image.shape}")
    preds = member_predictions(model, image)[0]
    tally = weighted_vote(preds, model.weights, model.n_classes)
    return tally.predicted, tally, preds


def vote_all(model: EnsembleModel, member_preds: np.ndarray) -> np.ndarray:
    return np.array([weighted_vote(row, model.weights, model.n_classes).predicted
                     for row in member_preds], dtype=np.int64)


def predict_batch(model: EnsembleModel, images) -> np.ndarray:
    return vote_all(model, member_predictions(model, images))


@dataclass
class EnsembleMetrics:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    member_accuracy: np.ndarray
    weights: np.ndarray
    member_seconds: np.ndarray
    total_seconds: float
    predictions: np.ndarray = field(repr=False)
    member_predictions: np.ndarray = field(repr=False)

    @property
    def error_percent(self) -> float:
        return 100.0 * (1.0 - self.accuracy)


def evaluate_ensemble(model: EnsembleModel, images, labels) -> EnsembleMetrics:
    """Accuracy, confusion matrix (rows = true class) and per-member scores."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValidationError("cannot evaluate on an empty test set")
    if labels.min() < 0 or labels.max() >= model.n_classes:
        raise ValidationError(f"labels must lie in [0, {model.n_classes})")
    start = time.perf_counter()
    x = model.features(images)
    if x.shape[0] != labels.size:
        raise ValidationError(f"{x.shape[0]} images but {labels.size} labels")
    member_preds, member_seconds = [], []
    for j, dbn in enumerate(model.dbns):
        t0 = time.perf_counter()
        member_preds.append(predict(dbn, x[:, j]))
        member_seconds.append(time.perf_counter() - t0)
    member_preds = np.stack(member_preds, axis=1)
    final = vote_all(model, member_preds)
    total = time.perf_counter() - start

    c = model.n_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (labels, final), 1)
    counts = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(counts > 0, np.diag(confusion) / np.maximum(counts, 1), np.nan)
    return EnsembleMetrics(
        accuracy=float(np.trace(confusion)) / labels.size,
        per_class_accuracy=per_class,
        confusion=confusion,
        member_accuracy=(member_preds == labels[:, None]).mean(axis=0),
        weights=model.weights.copy(),
        member_seconds=np.array(member_seconds),
        total_seconds=total,
        predictions=final,
        member_predictions=member_preds,
    )
