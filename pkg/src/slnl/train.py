"""Training loop, inference and classifier-margin diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import stack
from .losses import loss_op, scalar_loss
from .model import ModelConfig, ModelParams, init_params, model_logits, parameters
from .tensor import Tape, Tensor, softmax

log = logging.getLogger(__name__)

__all__ = [
    "Adam",
    "EpochMetrics",
    "MarginStats",
    "TrainConfig",
    "TrainingDiverged",
    "evaluate",
    "margin_statistics",
    "predict",
    "predict_batch",
    "train",
]


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-3
    lr_decay: float = 0.98  # per epoch
    epochs: int = 50
    batch_size: int = 16
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    augment: bool = True  # random train crops; False uses the eval crop
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


class Adam:
    """Adam with decoupled weight decay."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            if self.weight_decay:
                p.data *= 1 - self.lr * self.weight_decay
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    train_loss: float
    train_accuracy: float
    val_loss: float = float("nan")
    val_accuracy: float = float("nan")


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochMetrics] = field(default_factory=list)


def _batch_loss(x, labels, cfg: ModelConfig, params, mode, rng):
    logits = model_logits(Tensor(x), cfg, params, mode, rng)
    probs = [softmax(z) for z in logits]
    losses = [loss_op(p, labels, cfg.loss) for p in probs]
    return losses[0] + losses[1] + losses[2], probs[2]


def train(train_set, model_cfg: ModelConfig, train_cfg: TrainConfig = TrainConfig(),
          val_set=None, params: ModelParams | None = None, callback=None,
          target_accuracy: float | None = None) -> TrainResult:
    """Minimize the summed three-classifier loss with Adam and per-epoch
    exponential learning-rate decay. Deterministic in the two configs' seeds.

    With ``target_accuracy`` training stops after the first epoch whose
    validation accuracy reaches it.
    """
    if not train_set:
        raise ValueError("training set is empty")
    if max(s.label for s in train_set) >= model_cfg.n_classes:
        raise ValueError("a label exceeds the configured class count")
    params = params if params is not None else init_params(model_cfg)
    opt = Adam(parameters(params), train_cfg.lr, (train_cfg.beta1, train_cfg.beta2),
               train_cfg.eps, train_cfg.weight_decay)
    rng = np.random.default_rng(train_cfg.seed)
    result = TrainResult(params)
    crop_mode = "train" if train_cfg.augment else "eval"

    for epoch in range(train_cfg.epochs):
        opt.lr = train_cfg.lr * train_cfg.lr_decay ** epoch
        order = rng.permutation(len(train_set))
        total, correct, seen = 0.0, 0, 0
        for start in range(0, len(order), train_cfg.batch_size):
            batch = [train_set[i] for i in order[start:start + train_cfg.batch_size]]
            x, y = stack(batch, crop_mode, rng, model_cfg.t_frames)
            with Tape() as tape:
                loss, p_cat = _batch_loss(x, y, model_cfg, params, "train", rng)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(f"loss became {value} at epoch {epoch + 1}, "
                                       f"batch starting at sample {start}")
            tape.backward(loss)
            opt.step()
            total += value * len(batch)
            correct += int((p_cat.data.argmax(axis=1) == y).sum())
            seen += len(batch)
        metrics = EpochMetrics(epoch + 1, opt.lr, total / seen, correct / seen)
        if val_set:
            metrics.val_loss, metrics.val_accuracy = _evaluate_loss(params, model_cfg, val_set)
        result.history.append(metrics)
        log.info("epoch %d lr %.2e loss %.4f acc %.3f val_loss %.4f val_acc %.3f",
                 metrics.epoch, metrics.lr, metrics.train_loss, metrics.train_accuracy,
                 metrics.val_loss, metrics.val_accuracy)
        if callback is not None:
            callback(metrics)
        if target_accuracy is not None and metrics.val_accuracy >= target_accuracy:
            break
    return result


def _logits(params, cfg: ModelConfig, dataset, batch_size: int = 64):
    zs, ys = [[], [], []], []
    for start in range(0, len(dataset), batch_size):
        x, y = stack(dataset[start:start + batch_size], "eval", t_frames=cfg.t_frames)
        for acc, z in zip(zs, model_logits(Tensor(x), cfg, params, "eval")):
            acc.append(z.data)
        ys.append(y)
    return [np.concatenate(z) for z in zs], np.concatenate(ys)


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _evaluate_loss(params, cfg, dataset):
    zs, y = _logits(params, cfg, dataset)
    rows = np.arange(y.size)
    loss = sum(float(scalar_loss(_softmax(z)[rows, y], cfg.loss).mean()) for z in zs)
    return loss, float((zs[2].argmax(axis=1) == y).mean())


def predict_batch(params: ModelParams, cfg: ModelConfig, x) -> np.ndarray:
    """Class indices from the concatenated-feature classifier; ties go to the
    lowest index."""
    z = model_logits(Tensor(x), cfg, params, "eval")[2].data
    return np.argmax(softmax(Tensor(z)).data, axis=1)


def predict(params: ModelParams, cfg: ModelConfig, x) -> int:
    """Class of one preprocessed (d, T, N) sample."""
    return int(predict_batch(params, cfg, np.asarray(x)[None])[0])


def evaluate(params: ModelParams, cfg: ModelConfig, dataset) -> tuple[float, np.ndarray]:
    """Accuracy and confusion matrix (rows: true class, columns: predicted)."""
    zs, y = _logits(params, cfg, dataset)
    pred = zs[2].argmax(axis=1)
    confusion = np.zeros((cfg.n_classes, cfg.n_classes), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    return float((pred == y).mean()), confusion


@dataclass
class MarginStats:
    margin: float
    fraction: float
    gaps: np.ndarray  # z_t - max_{c != t} z_c per sample


def score_gaps(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    rows = np.arange(y.size)
    others = z.copy()
    others[rows, y] = -np.inf
    return z[rows, y] - others.max(axis=1)


def margin_statistics(params: ModelParams, cfg: ModelConfig, dataset, m: float) -> MarginStats:
    """Fraction of samples whose true-class score beats every other score of
    the concatenated classifier by at least ``m``."""
    zs, y = _logits(params, cfg, dataset)
    gaps = score_gaps(zs[2], y)
    return MarginStats(m, float((gaps >= m).mean()), gaps)
