"""Minimal dense feedforward networks with hand-written backpropagation.

Everything the package trains (the channel autoencoder and the scheduling
policy) runs through this module: float64 numpy parameters, explicit forward
caches, analytic gradients, Adam or plain gradient steps.  Checkpoints are
canonical JSON so that save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CHECKPOINT_FORMAT = "edgesched-net-v1"

ACTIVATIONS = ("sigmoid", "tanh", "relu", "linear")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "sigmoid"

    def __post_init__(self) -> None:
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def mlp_specs(dims: Sequence[int], hidden: str = "sigmoid",
              output: str = "sigmoid") -> tuple[LayerSpec, ...]:
    """Layer specs for a plain MLP given the full list of layer sizes."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output size")
    acts = [hidden] * (len(dims) - 2) + [output]
    return tuple(LayerSpec(int(a), int(b), act)
                 for a, b, act in zip(dims[:-1], dims[1:], acts))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "sigmoid":
        return _sigmoid(z)
    if act == "tanh":
        return np.tanh(z)
    if act == "relu":
        return np.maximum(z, 0.0)
    return z


def _derivative(act: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d(activation)/dz, reusing the post-activation value where cheaper."""
    if act == "sigmoid":
        return a * (1.0 - a)
    if act == "tanh":
        return 1.0 - a * a
    if act == "relu":
        return (z > 0.0).astype(z.dtype)
    return np.ones_like(z)


Gradients = list[tuple[np.ndarray, np.ndarray]]


class Network:
    """Dense MLP with weights of shape (out, in) per layer."""

    def __init__(self, specs: Iterable[LayerSpec],
                 rng: np.random.Generator | None = None,
                 weights: list[np.ndarray] | None = None,
                 biases: list[np.ndarray] | None = None):
        self.specs = tuple(specs)
        for prev, nxt in zip(self.specs[:-1], self.specs[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError("adjacent layer dimensions do not chain")
        if weights is not None and biases is not None:
            self.weights = [np.array(w, dtype=float) for w in weights]
            self.biases = [np.array(b, dtype=float) for b in biases]
        else:
            if rng is None:
                raise ValueError("need an rng to initialise parameters")
            self.weights, self.biases = [], []
            for spec in self.specs:
                # Glorot/Xavier uniform keeps early activations in range
                limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
                self.weights.append(rng.uniform(-limit, limit,
                                                size=(spec.out_dim, spec.in_dim)))
                self.biases.append(np.zeros(spec.out_dim))

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def clone(self) -> "Network":
        return Network(self.specs,
                       weights=[w.copy() for w in self.weights],
                       biases=[b.copy() for b in self.biases])

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Map (B, in_dim) or (in_dim,) inputs to outputs, no cache kept."""
        a = np.atleast_2d(np.asarray(x, dtype=float))
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            a = _apply(spec.activation, a @ w.T + b)
        return a[0] if np.ndim(x) == 1 else a

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping per-layer inputs and pre-activations."""
        a = np.atleast_2d(np.asarray(x, dtype=float))
        cache = []
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            z = a @ w.T + b
            out = _apply(spec.activation, z)
            cache.append((a, z, out))
            a = out
        return a, cache

    def backward(self, cache, grad_out: np.ndarray) -> Gradients:
        """Backpropagate dLoss/dOutput through the cached forward pass.

        Returns one (dW, db) pair per layer.  The caller owns any batch
        averaging: gradients here are plain sums over the batch rows of
        whatever upstream gradient is passed in.
        """
        grads: Gradients = [None] * len(self.specs)  # type: ignore[list-item]
        delta = np.atleast_2d(np.asarray(grad_out, dtype=float))
        for idx in range(len(self.specs) - 1, -1, -1):
            spec = self.specs[idx]
            a_in, z, a_out = cache[idx]
            dz = delta * _derivative(spec.activation, z, a_out)
            grads[idx] = (dz.T @ a_in, dz.sum(axis=0))
            if idx > 0:
                delta = dz @ self.weights[idx]
        return grads

    def l2_norm_sq(self) -> float:
        """Squared L2 norm over all weights and biases."""
        total = 0.0
        for w, b in zip(self.weights, self.biases):
            total += float((w * w).sum() + (b * b).sum())
        return total

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def sgd_step(net: Network, grads: Gradients, lr: float) -> None:
    """Plain gradient descent update, in place."""
    for (dw, db), w, b in zip(grads, net.weights, net.biases):
        w -= lr * dw
        b -= lr * db


class Adam:
    """Adam optimiser bound to one network, with the usual moment defaults."""

    def __init__(self, net: Network, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [(np.zeros_like(w), np.zeros_like(b))
                  for w, b in zip(net.weights, net.biases)]
        self.v = [(np.zeros_like(w), np.zeros_like(b))
                  for w, b in zip(net.weights, net.biases)]

    def step(self, grads: Gradients) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for idx, (dw, db) in enumerate(grads):
            mw, mb = self.m[idx]
            vw, vb = self.v[idx]
            mw *= self.beta1
            mw += (1.0 - self.beta1) * dw
            mb *= self.beta1
            mb += (1.0 - self.beta1) * db
            vw *= self.beta2
            vw += (1.0 - self.beta2) * dw * dw
            vb *= self.beta2
            vb += (1.0 - self.beta2) * db * db
            self.net.weights[idx] -= self.lr * (mw / b1c) / (np.sqrt(vw / b2c) + self.eps)
            self.net.biases[idx] -= self.lr * (mb / b1c) / (np.sqrt(vb / b2c) + self.eps)


def checkpoint_dict(net: Network, seed: int | None, epoch: int,
                    extra: dict | None = None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "seed": seed,
        "epoch": epoch,
        "layers": [
            {"in": s.in_dim, "out": s.out_dim, "activation": s.activation}
            for s in net.specs
        ],
        "weights": [w.ravel().tolist() for w in net.weights],  # row-major
        "biases": [b.tolist() for b in net.biases],
        "extra": extra or {},
    }


def save_checkpoint(net: Network, path: str | Path, *, seed: int | None = None,
                    epoch: int = 0, extra: dict | None = None) -> None:
    """Write the network to canonical JSON (sorted keys, fixed layout).

    Python floats round-trip exactly through repr, so loading a checkpoint
    and saving it again reproduces the file byte for byte.
    """
    doc = checkpoint_dict(net, seed, epoch, extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path: str | Path) -> tuple[Network, dict]:
    """Load a checkpoint; returns the network and the full metadata dict."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a recognised checkpoint: {path}")
    specs = [LayerSpec(d["in"], d["out"], d["activation"]) for d in doc["layers"]]
    weights = [np.array(flat, dtype=float).reshape(s.out_dim, s.in_dim)
               for flat, s in zip(doc["weights"], specs)]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    return Network(specs, weights=weights, biases=biases), doc
