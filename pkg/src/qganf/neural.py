"""Small fully connected network with manual backprop and Adam."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAKY_SLOPE = 0.2
PROB_CLAMP = 1e-7
FORMAT_VERSION = 1


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1.6e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("Adam epsilon must be positive")


class AdamState:
    """Moment accumulators for a flat list of parameter arrays."""

    def __init__(self, shapes):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads, config: AdamConfig) -> None:
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient; update rejected")
        self.t += 1
        bc1 = 1 - config.beta1 ** self.t
        bc2 = 1 - config.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= config.beta1
            m += (1 - config.beta1) * g
            v *= config.beta2
            v += (1 - config.beta2) * g * g
            p -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)

    def to_dict(self) -> dict:
        return {"t": self.t, "m": [a.ravel().tolist() for a in self.m],
                "v": [a.ravel().tolist() for a in self.v]}

    def load(self, d: dict) -> None:
        self.t = int(d["t"])
        self.m = [np.array(a, dtype=float).reshape(m.shape) for a, m in zip(d["m"], self.m)]
        self.v = [np.array(a, dtype=float).reshape(v.shape) for a, v in zip(d["v"], self.v)]


class DenseNet:
    """Dense layers with leaky-ReLU hidden activations and a linear or sigmoid output.

    Weights are stored as (fan_in, fan_out) so a batch ``x`` of shape
    (batch, fan_in) maps to ``x @ W + b``.
    """

    def __init__(self, sizes, output: str = "linear", rng=None, slope: float = LEAKY_SLOPE):
        if len(sizes) < 2:
            raise ValueError("a network needs at least an input and an output size")
        if output not in ("linear", "sigmoid"):
            raise ValueError(f"output activation must be 'linear' or 'sigmoid', got {output!r}")
        self.sizes = [int(s) for s in sizes]
        self.output = output
        self.slope = slope
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.adam = AdamState([p.shape for p in self.params])
        self._cache = None

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} does not match network input {self.sizes[0]}")
        inputs, pre = [], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.where(z > 0, z, self.slope * z)
            elif self.output == "sigmoid":
                h = 1.0 / (1.0 + np.exp(-z))
            else:
                h = z
        self._cache = (inputs, pre, h)
        return h

    __call__ = forward

    def backward(self, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of a scalar loss given dLoss/dOutput.

        Returns ``(param_grads, grad_input)`` with param_grads ordered like
        :attr:`params`.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a fresh forward pass")
        inputs, pre, out = self._cache
        g = np.asarray(grad_out, dtype=float).reshape(out.shape)
        if self.output == "sigmoid":
            g = g * out * (1 - out)
        grads = []
        for i in reversed(range(len(self.weights))):
            if i < len(self.weights) - 1:
                g = g * np.where(pre[i] > 0, 1.0, self.slope)
            # appended bias-then-weight so the final reverse gives params order
            grads.append(g.sum(axis=0))
            grads.append(inputs[i].T @ g)
            g = g @ self.weights[i].T
        grads.reverse()
        return grads, g

    def adam_step(self, grads, config: AdamConfig) -> None:
        if len(grads) != len(self.params) or any(g.shape != p.shape for g, p in zip(grads, self.params)):
            raise ValueError("gradient shapes do not match parameters")
        self.adam.step(self.params, grads, config)
        self._cache = None

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "sizes": self.sizes,
            "output": self.output,
            "slope": self.slope,
            "params": [p.ravel().tolist() for p in self.params],
            "adam": self.adam.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNet":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported network format version {d.get('version')}")
        net = cls(d["sizes"], d["output"], slope=d["slope"])
        for p, flat in zip(net.params, d["params"]):
            p[...] = np.array(flat, dtype=float).reshape(p.shape)
        net.adam.load(d["adam"])
        return net


def bce_loss(pred, labels) -> float:
    p, y = np.asarray(pred, dtype=float).ravel(), np.asarray(labels, dtype=float).ravel()
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    p = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def bce_grad(pred, labels) -> np.ndarray:
    p, y = np.asarray(pred, dtype=float), np.asarray(labels, dtype=float).reshape(np.shape(pred))
    p = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    return (p - y) / (p * (1 - p)) / p.size


def mse_loss(pred, target) -> float:
    p, t = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def mse_grad(pred, target) -> np.ndarray:
    p, t = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    return 2 * (p - t) / p.size
