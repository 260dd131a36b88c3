"""Training loop, optimizers, gradient verification, and prediction logging.

Runs are bit-reproducible: the config seed determines batch order, and the
whole pass is single-threaded float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteLoss, UnknownSubject
from ..prediction_log import LogEntry, PredictionLog
from ..signals import WindowedDataset, normalize
from .layers import cross_entropy
from .model import PERSONAL, ResTcnModel

TASK_EMOTION = "emotion"
TASK_IDENTIFY = "identify"


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    task: str = TASK_EMOTION

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.task not in (TASK_EMOTION, TASK_IDENTIFY):
            raise ValueError(f"unknown task {self.task!r}")

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params):
        for _, value, grad in params:
            value -= self.lr * grad


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, value, grad in params:
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            value -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return Sgd(cfg.learning_rate)
    return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)


def _targets_for(model: ResTcnModel, ds: WindowedDataset, task: str) -> np.ndarray:
    """Integer targets in the model's output order."""
    index = {label: i for i, label in enumerate(model.config.targets)}
    if task == TASK_IDENTIFY:
        keys = [w.subject_id for w in ds.windows]
    else:
        keys = [w.label.label for w in ds.windows]
    try:
        return np.array([index[k] for k in keys], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"dataset label {exc} not among model targets") from None


def _prepare(model: ResTcnModel, ds: WindowedDataset) -> WindowedDataset:
    """Resolve normalization for a training set.

    Already-normalized datasets pass through (their stats move onto the
    model); otherwise the dataset's preferred scheme is applied with stats
    from this (training) data only.
    """
    if ds.normalization is not None:
        model.norm = ds.normalization
        return ds
    if ds.norm_scheme:
        ds = normalize(ds, ds.norm_scheme)
        model.norm = ds.normalization
    return ds


def train(model: ResTcnModel, ds: WindowedDataset,
          cfg: TrainConfig) -> tuple[ResTcnModel, list[float]]:
    """Train in place; returns (model, per-epoch mean loss history)."""
    ds = _prepare(model, ds)
    data, _, subject_ids = ds.stacked()
    targets = _targets_for(model, ds, cfg.task)
    personal = model.config.mode == PERSONAL
    if personal:
        missing = sorted({s for s in subject_ids if s not in model._subject_index})
        if missing:
            raise UnknownSubject(f"subjects not in embedding table: {missing}")

    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(cfg)
    n = len(ds)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for bi, lo in enumerate(range(0, n, cfg.batch_size)):
            sel = order[lo: lo + cfg.batch_size]
            xb = data[sel]
            yb = targets[sel]
            sb = [subject_ids[i] for i in sel] if personal else None
            model.zero_grad()
            probs = model.forward(xb, sb, train=True)
            loss, dlogits = cross_entropy(probs, yb)
            if not np.isfinite(loss):
                raise NonFiniteLoss("non-finite training loss", epoch, bi)
            model.backward(dlogits)
            opt.step(model.params())
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return model, history


def _loss_of(model: ResTcnModel, x: np.ndarray, targets: np.ndarray,
             subject_ids) -> float:
    probs = model.forward(x, subject_ids)
    loss, _ = cross_entropy(probs, targets)
    return loss


def grad_check(model: ResTcnModel, x: np.ndarray, targets: np.ndarray,
               subject_ids=None, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients
    of the cross-entropy loss over every parameter."""
    model.zero_grad()
    probs = model.forward(x, subject_ids, train=True)
    _, dlogits = cross_entropy(probs, targets)
    model.backward(dlogits)
    analytic = {name: grad.copy() for name, _, grad in model.params()}

    worst = 0.0
    for name, value, _ in model.params():
        flat = value.reshape(-1)
        a = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = _loss_of(model, x, targets, subject_ids)
            flat[i] = orig - h
            lm = _loss_of(model, x, targets, subject_ids)
            flat[i] = orig
            num = (lp - lm) / (2.0 * h)
            denom = max(abs(a[i]), abs(num), 1e-8)
            worst = max(worst, abs(a[i] - num) / denom)
    return worst


def predict_log(model: ResTcnModel, ds: WindowedDataset,
                task: str = TASK_EMOTION) -> PredictionLog:
    """One entry per window; applies the model's stored normalization to raw
    datasets. predicted_label = argmax(confidence), ties to the lowest code
    (np.argmax returns the first maximal index)."""
    if ds.normalization is None and model.norm is not None:
        data = np.stack([model.norm.apply(w.data) for w in ds.windows])
    else:
        data, _, _ = ds.stacked()
    subject_ids = [w.subject_id for w in ds.windows]
    probs = model.forward(
        data, subject_ids if model.config.mode == PERSONAL else None)
    labels = model.config.targets
    entries = []
    for i, w in enumerate(ds.windows):
        true = w.subject_id if task == TASK_IDENTIFY else w.label.label
        pred = labels[int(np.argmax(probs[i]))]
        entries.append(LogEntry(
            sample_id=f"{w.subject_id}:{w.source_offset}",
            subject_id=w.subject_id,
            modality=w.modality.label,
            true_label=true,
            predicted_label=pred,
            confidence=probs[i],
        ))
    return PredictionLog(list(labels), entries)
