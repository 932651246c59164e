"""Minimal dense-network engine: forward, exact reverse-mode gradients,
softmax, and Adam/SGD steps over flat parameter vectors.

Everything is float64 and deterministic given (parameters, input). Inputs
may be a single vector (n,) or a batch (B, n); parameter gradients are
summed over the batch. The rectifier uses subgradient 0 at exactly 0.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "uamrl-checkpoint"
CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected net: rectifier on hidden layers, identity output.

    `output_activation="relu"` rectifies the last layer too (used for the
    communication modules, whose output feeds another rectified layer).
    """

    def __init__(self, sizes, rng=None, output_activation="identity"):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if output_activation not in ("identity", "relu"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.sizes = list(int(s) for s in sizes)
        self.output_activation = output_activation
        self.weights = []
        self.biases = []
        rng = rng if rng is not None else np.random.default_rng()
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_params(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    def get_params(self) -> np.ndarray:
        """Flat view: [W1, b1, W2, b2, ...] in layer order."""
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        k = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[k:k + w.size].reshape(w.shape).copy()
            k += w.size
            self.biases[i] = flat[k:k + b.size].copy()
            k += b.size

    def forward(self, x):
        """Returns (output, cache); cache feeds `backward`."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {a.shape[1]} != layer size {self.sizes[0]}")
        activations = [a]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            last = i == n_layers - 1
            a = z if last and self.output_activation == "identity" else np.maximum(z, 0.0)
            activations.append(a)
        cache = (activations, single)
        return (a[0] if single else a), cache

    def backward(self, cache, output_grad):
        """Exact gradients from a matching forward cache.

        Returns (flat parameter gradient, input gradient). Parameter
        gradients are summed over the batch dimension.
        """
        activations, single = cache
        if len(activations) != len(self.weights) + 1:
            raise ValueError("cache does not match this network")
        dy = np.asarray(output_grad, dtype=float)
        if single:
            dy = dy[None, :]
        if dy.shape != activations[-1].shape:
            raise ValueError(f"output grad shape {dy.shape} != output shape {activations[-1].shape}")
        grads = [None] * len(self.weights)
        dz = dy if self.output_activation == "identity" else dy * (activations[-1] > 0)
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = activations[i]
            dw = dz.T @ a_prev
            db = dz.sum(axis=0)
            grads[i] = (dw, db)
            da_prev = dz @ self.weights[i]
            if i > 0:
                dz = da_prev * (activations[i] > 0)
        flat = np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])
        return flat, (da_prev[0] if single else da_prev)

    def to_state(self) -> dict:
        return {
            "sizes": self.sizes,
            "output_activation": self.output_activation,
            "params": self.get_params().tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Mlp":
        net = cls(state["sizes"], rng=np.random.default_rng(0),
                  output_activation=state.get("output_activation", "identity"))
        net.set_params(np.array(state["params"], dtype=float))
        return net


def softmax(logits):
    """Stable softmax along the last axis."""
    x = np.asarray(logits, dtype=float)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    x = np.asarray(logits, dtype=float)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class Adam:
    """Bias-corrected Adam over a flat parameter vector.

    `direction="ascent"` negates the step (policy objectives are maximized,
    critic losses minimized, with the same machinery).
    """

    def __init__(self, n_params: int, alpha: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, direction="descent") -> np.ndarray:
        if params.shape != grad.shape or params.shape != self.m.shape:
            raise ValueError("parameter/gradient/state shapes disagree")
        if direction not in ("descent", "ascent"):
            raise ValueError(f"unknown direction {direction!r}")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        delta = self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)
        return params - delta if direction == "descent" else params + delta


class Sgd:
    """Plain gradient step with fixed rate; the TD update in its raw form."""

    def __init__(self, alpha: float):
        self.alpha = alpha

    def step(self, params: np.ndarray, grad: np.ndarray, direction="descent") -> np.ndarray:
        if direction not in ("descent", "ascent"):
            raise ValueError(f"unknown direction {direction!r}")
        delta = self.alpha * grad
        return params - delta if direction == "descent" else params + delta


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale so the L2 norm is at most max_norm."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm > 0:
        return grad * (max_norm / norm)
    return grad


def save_checkpoint(path, payload: dict) -> None:
    """Write a versioned JSON checkpoint; floats round-trip bit-exactly."""
    body = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION}
    body.update(payload)
    Path(path).write_text(json.dumps(body), encoding="utf-8")


def load_checkpoint(path) -> dict:
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    if body.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a recognized checkpoint file")
    if body.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {body.get('version')}")
    return body
