"""Minimal feed-forward network engine: ReLU MLPs with hand-written
backprop, Adam with decoupled weight decay, soft target updates, and a
deterministic checkpoint format.

Everything is float64.  Networks are value-like: clone before mutating if
another owner still reads the original.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .core import RngStream

CHECKPOINT_MAGIC = b"MGNET1\n"


class Mlp:
    """Affine + ReLU stack with an identity output layer.

    Parameters are a flat list [W0, b0, W1, b1, ...]; weights are
    (n_in, n_out) row-major.  Heads (Gaussian transforms, softmax, ...)
    live outside this class.
    """

    def __init__(self, sizes, weights, biases):
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialize(cls, sizes, rng: RngStream, final_scale: float = 1.0) -> "Mlp":
        """Uniform fan-in init; the last layer is scaled by final_scale."""
        weights, biases = [], []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(n_in)
            w = rng.uniform(-bound, bound, size=(n_in, n_out))
            b = rng.uniform(-bound, bound, size=n_out)
            if i == len(sizes) - 2:
                w = w * final_scale
                b = b * final_scale
            weights.append(w)
            biases.append(b)
        return cls(sizes, weights, biases)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def clone(self) -> "Mlp":
        return Mlp(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def checksum(self) -> str:
        h = hashlib.sha256()
        for p in self.parameters():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input has {x.shape[1]} features, network expects {self.sizes[0]}")
        return x, single

    def forward(self, x) -> np.ndarray:
        x, single = self._check_input(x)
        h = x
        for i in range(self.n_layers):
            h = h @ self.weights[i] + self.biases[i]
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    def forward_cached(self, x):
        """Forward pass keeping pre-activation inputs for backward()."""
        x, single = self._check_input(x)
        inputs = [x]
        h = x
        for i in range(self.n_layers):
            z = h @ self.weights[i] + self.biases[i]
            h = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
            inputs.append(h)
        y = h[0] if single else h
        return y, (inputs, single)

    def backward(self, cache, grad_output):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (parameter gradients in parameters() order, gradient
        w.r.t. the input batch).
        """
        inputs, single = cache
        g = np.asarray(grad_output, dtype=float)
        if single:
            g = g[None, :]
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for i in reversed(range(self.n_layers)):
            h_in = inputs[i]
            if i < self.n_layers - 1:
                g = g * (inputs[i + 1] > 0.0)
            grads_w[i] = h_in.T @ g
            grads_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        grad_x = g[0] if single else g
        return grads, grad_x


def loss_gradients(net: Mlp, x, loss_head):
    """Parameter gradients of ``loss_head`` applied to the network output.

    ``loss_head(y) -> (scalar, d loss / d y)``.
    """
    y, cache = net.forward_cached(x)
    loss, grad_y = loss_head(y)
    grads, _ = net.backward(cache, grad_y)
    return loss, grads


@dataclass
class Adam:
    """Adam with bias correction and decoupled weight decay."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        self.step_count = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        """One update, in place; returns params for convenience."""
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        if len(params) != len(self._m):
            raise ValueError("parameter list changed size under the optimizer")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            if self.weight_decay:
                p -= self.lr * self.weight_decay * p
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def soft_update(target_params: list[np.ndarray], source_params: list[np.ndarray], tau: float) -> None:
    """target <- (1 - tau) * target + tau * source, element-wise, in place."""
    for t, s in zip(target_params, source_params):
        t *= 1.0 - tau
        t += tau * s


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------
#
# Layout (byte-deterministic; no timestamps):
#   magic "MGNET1\n"
#   uint64 little-endian header length
#   header: UTF-8 JSON with sorted keys:
#     {"version": 1,
#      "nets": {name: {"sizes": [...]}, ...},
#      "extras": {...}}
#   for each net in sorted(name) order, for each layer: W then b as raw
#   little-endian float64, row-major.

def save_checkpoint(path, nets: dict[str, Mlp], extras: dict | None = None) -> None:
    header = {
        "version": 1,
        "nets": {name: {"sizes": list(net.sizes)} for name, net in nets.items()},
        "extras": extras or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in sorted(nets):
            for p in nets[name].parameters():
                f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, Mlp], dict]:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a multigait checkpoint")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        nets = {}
        for name in sorted(header["nets"]):
            sizes = header["nets"][name]["sizes"]
            weights, biases = [], []
            for n_in, n_out in zip(sizes[:-1], sizes[1:]):
                w = np.frombuffer(f.read(8 * n_in * n_out), dtype="<f8").reshape(n_in, n_out).copy()
                b = np.frombuffer(f.read(8 * n_out), dtype="<f8").copy()
                weights.append(w)
                biases.append(b)
            nets[name] = Mlp(sizes, weights, biases)
    return nets, header.get("extras", {})
