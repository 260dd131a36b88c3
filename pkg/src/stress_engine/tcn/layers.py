"""Float64 network layers with hand-written forward/backward passes.

Every layer caches what its backward pass needs when called with
train=True; gradients accumulate into preallocated arrays so a training
step is zero_grad -> forward -> backward -> optimizer step.
"""

from __future__ import annotations

import numpy as np


class CausalConv1d:
    """Dilated 1D convolution with left-only padding.

    Output length equals input length and output at time t depends only on
    inputs at times <= t (left padding of (k-1)*dilation zeros).
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 dilation: int, rng: np.random.Generator, name: str = "conv"):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.name = name
        std = np.sqrt(2.0 / (in_channels * kernel_size))
        self.w = rng.standard_normal((out_channels, in_channels, kernel_size)) * std
        self.b = np.zeros(out_channels)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._xp = None

    @property
    def pad(self) -> int:
        return (self.kernel_size - 1) * self.dilation

    def params(self):
        return [(f"{self.name}.w", self.w, self.dw),
                (f"{self.name}.b", self.b, self.db)]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        B, C, T = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, 0)))
        y = np.broadcast_to(self.b[:, np.newaxis], (B, self.out_channels, T)).copy()
        for j in range(self.kernel_size):
            seg = xp[:, :, j * self.dilation: j * self.dilation + T]
            y += np.einsum("oc,bct->bot", self.w[:, :, j], seg)
        if train:
            self._xp = xp
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xp = self._xp
        B, _, Tp = xp.shape
        T = dy.shape[2]
        dxp = np.zeros_like(xp)
        for j in range(self.kernel_size):
            lo = j * self.dilation
            seg = xp[:, :, lo: lo + T]
            self.dw[:, :, j] += np.einsum("bot,bct->oc", dy, seg)
            dxp[:, :, lo: lo + T] += np.einsum("oc,bot->bct", self.w[:, :, j], dy)
        self.db += dy.sum(axis=(0, 2))
        return dxp[:, :, self.pad:]


class ReLU:
    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        mask = x > 0
        if train:
            self._mask = mask
        return x * mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class ResidualBlock:
    """Two causal convolutions with a skip connection.

    y = relu(conv2(relu(conv1(x)))) + project(x); project is a 1x1
    convolution when channel counts differ, identity otherwise.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 dilation: int, rng: np.random.Generator, name: str = "block"):
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.conv1 = CausalConv1d(in_channels, out_channels, kernel_size,
                                  dilation, rng, f"{name}.conv1")
        self.relu1 = ReLU()
        self.conv2 = CausalConv1d(out_channels, out_channels, kernel_size,
                                  dilation, rng, f"{name}.conv2")
        self.relu2 = ReLU()
        self.proj = None
        if in_channels != out_channels:
            self.proj = CausalConv1d(in_channels, out_channels, 1, 1, rng,
                                     f"{name}.proj")

    def params(self):
        out = self.conv1.params() + self.conv2.params()
        if self.proj is not None:
            out += self.proj.params()
        return out

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        h = self.relu2.forward(
            self.conv2.forward(self.relu1.forward(self.conv1.forward(x, train), train),
                               train), train)
        skip = self.proj.forward(x, train) if self.proj is not None else x
        return h + skip

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dmain = self.conv1.backward(
            self.relu1.backward(self.conv2.backward(self.relu2.backward(dy))))
        dskip = self.proj.backward(dy) if self.proj is not None else dy
        return dmain + dskip


class GlobalAvgPool:
    """(B, C, T) -> (B, C), mean over time."""

    def __init__(self):
        self._T = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._T = x.shape[2]
        return x.mean(axis=2)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return np.repeat(dy[:, :, np.newaxis], self._T, axis=2) / self._T


class Embedding:
    """Lookup table mapping subject index to a learned vector."""

    def __init__(self, n_rows: int, dim: int, rng: np.random.Generator,
                 name: str = "emb"):
        self.name = name
        self.table = rng.standard_normal((n_rows, dim)) * 0.1
        self.dtable = np.zeros_like(self.table)
        self._idx = None

    def params(self):
        return [(f"{self.name}.table", self.table, self.dtable)]

    def forward(self, idx: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._idx = idx
        return self.table[idx]

    def backward(self, dy: np.ndarray) -> None:
        np.add.at(self.dtable, self._idx, dy)


class Affine:
    """Fully connected layer: y = x @ W + b."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 name: str = "head"):
        self.name = name
        self.w = rng.standard_normal((in_dim, out_dim)) * np.sqrt(1.0 / in_dim)
        self.b = np.zeros(out_dim)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [(f"{self.name}.w", self.w, self.dw),
                (f"{self.name}.b", self.b, self.db)]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._x = x
        return x @ self.w + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.dw += self._x.T @ dy
        self.db += dy.sum(axis=0)
        return dy @ self.w.T


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax; outputs are nonnegative and sum to 1."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax outputs against integer targets.

    Returns (loss, dloss/dlogits) using the combined softmax derivative
    (probs - onehot) / batch.
    """
    B = probs.shape[0]
    loss = float(-np.log(probs[np.arange(B), targets]).mean())
    dlogits = probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    return loss, dlogits / B
