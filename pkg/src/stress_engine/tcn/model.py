"""Two-branch residual TCN: a general convolutional branch over the window
plus an optional personal branch carrying a learned subject embedding.

In generalized mode the personal branch contributes a zero vector, so two
models differing only in embedding contents are indistinguishable.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ShapeMismatch, UnknownSubject
from ..signals import NormStats
from .layers import Affine, Embedding, GlobalAvgPool, ResidualBlock, softmax

MODEL_FORMAT = "stress-engine-model"
MODEL_VERSION = 1

GENERAL = "general"
PERSONAL = "personal"


@dataclass
class ModelConfig:
    """Architecture plus target labels (affect classes or subject ids)."""

    in_channels: int
    window_len: int
    targets: list[str]
    mode: str = GENERAL
    channels: int = 32
    kernel_size: int = 3
    n_blocks: int = 3
    dilations: list[int] | None = None
    emb_dim: int = 8
    subjects: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in (GENERAL, PERSONAL):
            raise ValueError(f"mode must be '{GENERAL}' or '{PERSONAL}'")
        if self.mode == PERSONAL and not self.subjects:
            raise ValueError("personalized mode requires a subject list")
        if self.dilations is None:
            self.dilations = [2 ** i for i in range(self.n_blocks)]
        if len(self.dilations) != self.n_blocks:
            raise ValueError("dilations must have one entry per block")

    @property
    def n_classes(self) -> int:
        return len(self.targets)

    def to_json(self) -> dict:
        return {
            "in_channels": self.in_channels, "window_len": self.window_len,
            "targets": list(self.targets), "mode": self.mode,
            "channels": self.channels, "kernel_size": self.kernel_size,
            "n_blocks": self.n_blocks, "dilations": list(self.dilations),
            "emb_dim": self.emb_dim, "subjects": list(self.subjects),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


class ResTcnModel:
    """Residual TCN with softmax head; built by build_model."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.blocks: list[ResidualBlock] = []
        c_in = config.in_channels
        for i, d in enumerate(config.dilations):
            self.blocks.append(ResidualBlock(c_in, config.channels,
                                             config.kernel_size, d, rng,
                                             f"blocks.{i}"))
            c_in = config.channels
        self.pool = GlobalAvgPool()
        feat_dim = c_in  # equals in_channels when n_blocks == 0
        self.emb: Embedding | None = None
        if config.subjects:
            self.emb = Embedding(len(config.subjects), config.emb_dim, rng)
        self.head = Affine(feat_dim + config.emb_dim, config.n_classes, rng)
        self.norm: NormStats | None = None
        self._subject_index = {s: i for i, s in enumerate(config.subjects)}
        self._cache = None

    # -- parameter access ---------------------------------------------------

    def params(self):
        """(name, value, grad) triples in declared order."""
        out = []
        for blk in self.blocks:
            out.extend(blk.params())
        if self.emb is not None:
            out.extend(self.emb.params())
        out.extend(self.head.params())
        return out

    def n_params(self) -> int:
        return sum(v.size for _, v, _ in self.params())

    def zero_grad(self):
        for _, _, g in self.params():
            g[...] = 0.0

    # -- forward / backward -------------------------------------------------

    def subject_indices(self, subject_ids) -> np.ndarray:
        idx = np.empty(len(subject_ids), dtype=np.int64)
        for i, s in enumerate(subject_ids):
            if s not in self._subject_index:
                raise UnknownSubject(f"subject {s!r} not in embedding table")
            idx[i] = self._subject_index[s]
        return idx

    def _check_shape(self, x: np.ndarray):
        if x.ndim != 3 or x.shape[1] != self.config.in_channels \
                or x.shape[2] != self.config.window_len:
            raise ShapeMismatch(
                f"expected (B, {self.config.in_channels}, "
                f"{self.config.window_len}), got {x.shape}"
            )

    def features_sequence(self, x: np.ndarray) -> np.ndarray:
        """Per-time activations after the residual stack (pre-pooling)."""
        self._check_shape(x)
        h = np.asarray(x, dtype=np.float64)
        for blk in self.blocks:
            h = blk.forward(h)
        return h

    def forward(self, x: np.ndarray, subject_ids=None,
                train: bool = False) -> np.ndarray:
        """Probability vectors, one per window.

        subject_ids is required (and used) only in personalized mode; in
        generalized mode the personal branch is a zero vector.
        """
        self._check_shape(x)
        h = np.asarray(x, dtype=np.float64)
        for blk in self.blocks:
            h = blk.forward(h, train)
        pooled = self.pool.forward(h, train)
        B = pooled.shape[0]
        if self.config.mode == PERSONAL:
            if subject_ids is None:
                raise UnknownSubject("personalized mode requires subject ids")
            personal = self.emb.forward(self.subject_indices(subject_ids), train)
        else:
            personal = np.zeros((B, self.config.emb_dim))
        feats = np.concatenate([pooled, personal], axis=1)
        logits = self.head.forward(feats, train)
        if train:
            self._cache = pooled.shape[1]
        return softmax(logits)

    def backward(self, dlogits: np.ndarray):
        dfeats = self.head.backward(dlogits)
        split = self._cache
        dpooled, dpersonal = dfeats[:, :split], dfeats[:, split:]
        if self.config.mode == PERSONAL:
            self.emb.backward(dpersonal)
        dh = self.pool.backward(dpooled)
        for blk in reversed(self.blocks):
            dh = blk.backward(dh)
        return dh


def build_model(config: ModelConfig, seed: int = 0) -> ResTcnModel:
    """Seed fully determines the initial weights."""
    return ResTcnModel(config, np.random.default_rng(seed))


def receptive_field(model: ResTcnModel) -> int:
    """Number of past input samples one output sample can see.

    Two convolutions per block: 1 + sum over blocks of 2*(k-1)*dilation.
    """
    k = model.config.kernel_size
    return 1 + sum(2 * (k - 1) * d for d in model.config.dilations)


# ---------------------------------------------------------------------------
# Persistence: JSON + base64 float64 arrays, bit-exact round trip
# ---------------------------------------------------------------------------

def save_model(model: ResTcnModel, path) -> None:
    params = [
        {"name": name, "shape": list(value.shape),
         "data": base64.b64encode(
             np.ascontiguousarray(value, dtype="<f8").tobytes()).decode()}
        for name, value, _ in model.params()
    ]
    obj = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config.to_json(),
        "norm": model.norm.to_json() if model.norm else None,
        "params": params,
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True))


def load_model(path) -> ResTcnModel:
    obj = json.loads(Path(path).read_text())
    if obj.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a stress-engine model file")
    model = build_model(ModelConfig.from_json(obj["config"]), seed=0)
    stored = {p["name"]: p for p in obj["params"]}
    for name, value, _ in model.params():
        rec = stored[name]
        raw = base64.b64decode(rec["data"].encode())
        value[...] = np.frombuffer(raw, dtype="<f8").reshape(rec["shape"])
    if obj.get("norm"):
        model.norm = NormStats.from_json(obj["norm"])
    return model
