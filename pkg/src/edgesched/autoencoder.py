"""Channel-state compression with a stacked autoencoder.

The scheduler's policy network takes a low-dimensional encoding of the N x M
channel gain matrix.  Gains span several orders of magnitude, so raster
vectors are log10-transformed and min-max scaled to [0, 1] against running
dataset bounds.  Training minimises a reconstruction loss with two extra
terms: a per-row relative-shape term (each UE row divided by its row maximum,
so the loss also preserves which MEC looks best relative to the others) and
an L2 weight penalty.

A bounded FIFO memory admits only samples the current autoencoder fails to
reconstruct well, and the scheduler encodes against a periodically synced
snapshot so online encodings stay stable between refreshes.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mec import ChannelState
from .neural import Adam, Gradients, LayerSpec, Network, _apply, checkpoint_dict, mlp_specs

SAE_FORMAT = "edgesched-sae-v1"


@dataclass
class AutoencoderConfig:
    """Encoder layer sizes plus training and memory knobs.

    ``dims`` lists the encoder sizes input-first, e.g. [60, 45, 30]; the
    decoder mirrors them.  A single-entry list means no compression at all:
    the compressor becomes an identity map over the normalised raster vector.
    """

    dims: list[int]
    gamma1: float = 0.5
    gamma2: float = 0.08
    t_sae: int = 500
    memory: int = 4096
    threshold: float = 0.01
    batch: int = 32
    lr: float = 1e-3
    activation: str = "sigmoid"
    sync_period: int = 200
    refresh_iters: int = 20
    pretrain_samples: int = 2000

    def __post_init__(self) -> None:
        if not self.dims:
            raise ValueError("dims must not be empty")
        if any(d <= 0 for d in self.dims):
            raise ValueError("layer sizes must be positive")
        if len(self.dims) > 1 and self.dims[-1] >= self.dims[0]:
            raise ValueError("encoder output must be smaller than its input")

    @property
    def identity(self) -> bool:
        return len(self.dims) == 1


def default_dims(n_ues: int, n_mecs: int, out_dim: int | None = None) -> list[int]:
    """Sensible encoder sizes for a scenario.

    Halves the input by default, with one intermediate layer at the midpoint
    (30 UEs with 2 MECs gives 60-45-30).  When the requested output is not
    smaller than the input, the identity layout is returned.
    """
    in_dim = n_ues * n_mecs
    out = in_dim // 2 if out_dim is None else int(out_dim)
    if out >= in_dim or in_dim == 1:
        return [in_dim]
    out = max(1, out)
    mid = (in_dim + out + 1) // 2
    if mid in (in_dim, out):
        return [in_dim, out]
    return [in_dim, mid, out]


def compression_ratio(in_dim: int, out_dim: int) -> float:
    """Fraction of channel entries removed by the encoder: 1 - out/in."""
    if out_dim > in_dim:
        raise ValueError("encoded dimension exceeds the input dimension")
    if in_dim <= 0 or out_dim <= 0:
        raise ValueError("dimensions must be positive")
    return 1.0 - out_dim / in_dim


@dataclass(frozen=True)
class EncodedState:
    """Compressed channel observation handed to the policy."""

    vector: np.ndarray
    epoch: int


class Rasterizer:
    """Row-major flattening plus log10 min-max normalisation to [0, 1].

    Bounds grow as data is observed; ``transform`` clips, so entries stay in
    [0, 1] even when a later sample exceeds the recorded bounds.
    """

    def __init__(self, lo: float | None = None, hi: float | None = None):
        self.lo = lo
        self.hi = hi

    def observe(self, gains: np.ndarray) -> None:
        logg = np.log10(gains)
        lo, hi = float(logg.min()), float(logg.max())
        self.lo = lo if self.lo is None else min(self.lo, lo)
        self.hi = hi if self.hi is None else max(self.hi, hi)

    def transform(self, gains: np.ndarray) -> np.ndarray:
        if self.lo is None:
            raise RuntimeError("no bounds observed yet")
        flat = np.log10(np.asarray(gains, dtype=float)).ravel()
        span = self.hi - self.lo
        if span <= 0:
            return np.full(flat.shape, 0.5)
        return np.clip((flat - self.lo) / span, 0.0, 1.0)

    def inverse(self, vector: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
        """Map a normalised vector back to a gain matrix (diagnostics)."""
        if self.lo is None:
            raise RuntimeError("no bounds observed yet")
        span = max(self.hi - self.lo, 0.0)
        logg = self.lo + np.asarray(vector, dtype=float) * span
        return (10.0 ** logg).reshape(n_rows, n_cols)

    def copy(self) -> "Rasterizer":
        return Rasterizer(self.lo, self.hi)


class SampleMemory:
    """Bounded FIFO store of rasterized channel vectors."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._store: deque[np.ndarray] = deque(maxlen=capacity)

    def add(self, x: np.ndarray) -> None:
        self._store.append(np.asarray(x, dtype=float))

    def __len__(self) -> int:
        return len(self._store)

    def as_array(self) -> np.ndarray:
        return np.stack(tuple(self._store))


def reconstruction_error(net: Network, x: np.ndarray) -> float:
    """Root-mean-square entry error of one normalised vector."""
    diff = net.forward(x) - x
    return float(np.sqrt(np.mean(diff * diff)))


def memory_update(memory: SampleMemory, x: np.ndarray, net: Network,
                  threshold: float) -> bool:
    """Admit ``x`` iff the current net reconstructs it worse than ``threshold``.

    Returns whether the sample was admitted.  Well-reconstructed samples are
    dropped so the memory concentrates on channel patterns still worth
    learning.
    """
    if reconstruction_error(net, x) > threshold:
        memory.add(x)
        return True
    return False


def _row_shapes(batch: np.ndarray, n_rows: int, n_cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Each UE row divided by its row maximum; also returns the maxima."""
    rows = batch.reshape(batch.shape[0], n_rows, n_cols)
    maxima = rows.max(axis=2, keepdims=True)
    if np.any(maxima <= 0):
        raise ValueError("row maximum must be positive")
    return rows / maxima, maxima


def mse_loss(net: Network, batch: np.ndarray) -> float:
    """Plain mean squared entry error over a batch of normalised vectors."""
    batch = np.atleast_2d(batch)
    diff = net.forward(batch) - batch
    return float(np.mean(diff * diff))


def reconstruction_loss(net: Network, batch: np.ndarray, n_rows: int,
                        n_cols: int, gamma1: float, gamma2: float) -> float:
    """Composite loss: MSE + relative row-shape term + L2 weight penalty."""
    loss, _ = reconstruction_loss_grads(net, batch, n_rows, n_cols,
                                        gamma1, gamma2, want_grads=False)
    return loss


def reconstruction_loss_grads(net: Network, batch: np.ndarray, n_rows: int,
                              n_cols: int, gamma1: float, gamma2: float,
                              want_grads: bool = True) -> tuple[float, Gradients | None]:
    """Loss and analytic parameter gradients for one batch.

    The relative term treats each sample's row maximum as part of the
    computation graph, so its gradient has an extra component at the argmax
    entry of every reconstructed row.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=float))
    b, d = x.shape
    if d != n_rows * n_cols:
        raise ValueError("batch width does not match n_rows * n_cols")
    y, cache = net.forward_cached(x)

    diff = y - x
    loss = float(np.mean(diff * diff))
    grad_y = 2.0 * diff / diff.size

    if gamma1 != 0.0:
        u, _ = _row_shapes(x, n_rows, n_cols)
        yr = y.reshape(b, n_rows, n_cols)
        maxima = yr.max(axis=2, keepdims=True)
        if np.any(maxima <= 0):
            raise ValueError("row maximum must be positive")
        v = yr / maxima
        e = u - v
        loss += float(0.5 * gamma1 * np.sum(e * e) / b)
        # d/dy_j of sum_l e_l^2 / 2: -e_j/m everywhere, plus the row-max
        # entry picking up +(sum_l e_l v_l)/m from the quotient rule.
        g = -e / maxima
        argmax = yr.argmax(axis=2, keepdims=True)
        extra = (e * v).sum(axis=2, keepdims=True) / maxima
        np.put_along_axis(g, argmax, np.take_along_axis(g, argmax, axis=2) + extra,
                          axis=2)
        grad_y = grad_y + gamma1 * g.reshape(b, d) / b

    if gamma2 != 0.0:
        loss += 0.5 * gamma2 * net.l2_norm_sq()

    if not want_grads:
        return loss, None

    grads = net.backward(cache, grad_y)
    if gamma2 != 0.0:
        grads = [(dw + gamma2 * w, db + gamma2 * bb)
                 for (dw, db), w, bb in zip(grads, net.weights, net.biases)]
    return loss, grads


def train(net: Network, memory: SampleMemory, cfg: AutoencoderConfig,
          rng: np.random.Generator, adam: Adam | None = None,
          iters: int | None = None, n_rows: int | None = None,
          n_cols: int | None = None) -> list[float]:
    """Run mini-batch updates against the memory; returns the loss trace."""
    if len(memory) == 0:
        return []
    if n_rows is None or n_cols is None:
        raise ValueError("row/column shape required for the relative term")
    data = memory.as_array()
    adam = adam or Adam(net, lr=cfg.lr)
    steps = cfg.t_sae if iters is None else iters
    take = min(cfg.batch, data.shape[0])
    trace = []
    for _ in range(steps):
        idx = rng.integers(0, data.shape[0], size=take)
        loss, grads = reconstruction_loss_grads(net, data[idx], n_rows, n_cols,
                                                cfg.gamma1, cfg.gamma2)
        adam.step(grads)  # type: ignore[arg-type]
        trace.append(loss)
    return trace


def reconstruction_accuracy(net: Network | None, vectors: np.ndarray) -> float:
    """1 minus the mean relative entry error, clamped to [0, 1].

    ``net=None`` stands for the identity compressor and scores exactly 1.
    """
    if net is None:
        return 1.0
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    y = net.forward(x)
    rel = np.abs(x - y) / np.maximum(np.abs(x), 1e-9)
    return float(np.clip(1.0 - rel.mean(), 0.0, 1.0))


class ChannelCompressor:
    """Autoencoder, its memory, and the synced online encoder snapshot.

    The training side (net, bounds, memory) advances whenever samples are
    admitted or a refresh runs; the scheduler encodes against the snapshot
    taken at the last ``sync`` call.  ``version`` counts syncs so stored
    encodings can be detected as stale and recomputed.
    """

    def __init__(self, cfg: AutoencoderConfig, n_ues: int, n_mecs: int,
                 rng: np.random.Generator | None = None):
        if cfg.dims[0] != n_ues * n_mecs:
            raise ValueError("encoder input size must equal N * M")
        self.cfg = cfg
        self.n_ues = n_ues
        self.n_mecs = n_mecs
        self.raster = Rasterizer()
        self.memory = SampleMemory(cfg.memory)
        if cfg.identity:
            self.net = None
            self.adam = None
            self.n_encoder_layers = 0
        else:
            full_dims = cfg.dims + cfg.dims[-2::-1]
            specs = mlp_specs(full_dims, hidden=cfg.activation, output="sigmoid")
            if rng is None:
                raise ValueError("need an rng to initialise the autoencoder")
            self.net = Network(specs, rng=rng)
            self.adam = Adam(self.net, lr=cfg.lr)
            self.n_encoder_layers = len(cfg.dims) - 1
        self._online_net: Network | None = None
        self._online_raster = Rasterizer()
        self.version = 0
        self.sync()

    # --- dimensions -----------------------------------------------------

    @property
    def in_dim(self) -> int:
        return self.cfg.dims[0]

    @property
    def out_dim(self) -> int:
        return self.cfg.dims[-1]

    def compression_ratio(self) -> float:
        return compression_ratio(self.in_dim, self.out_dim)

    # --- training side --------------------------------------------------

    def observe_and_admit(self, channel: ChannelState) -> bool:
        """Update bounds and run the memory admission check for one sample."""
        self.raster.observe(channel.gains)
        if self.net is None:
            return False
        x = self.raster.transform(channel.gains)
        return memory_update(self.memory, x, self.net, self.cfg.threshold)

    def pretrain(self, gain_mats: Iterable[np.ndarray],
                 rng: np.random.Generator) -> list[float]:
        """Admit a dataset and run the configured number of training steps.

        Bounds are settled over the whole dataset before any sample is
        rasterized, so the memory is not polluted by early, badly scaled
        vectors.
        """
        mats = [np.asarray(g, dtype=float) for g in gain_mats]
        for g in mats:
            self.raster.observe(g)
        if self.net is not None:
            for g in mats:
                memory_update(self.memory, self.raster.transform(g), self.net,
                              self.cfg.threshold)
        trace = self._train(rng, self.cfg.t_sae)
        self.sync()
        return trace

    def refresh(self, rng: np.random.Generator, iters: int | None = None) -> list[float]:
        """Continue training from the current memory (incremental learning)."""
        return self._train(rng, self.cfg.refresh_iters if iters is None else iters)

    def _train(self, rng: np.random.Generator, iters: int) -> list[float]:
        if self.net is None or iters <= 0:
            return []
        return train(self.net, self.memory, self.cfg, rng, adam=self.adam,
                     iters=iters, n_rows=self.n_ues, n_cols=self.n_mecs)

    def accuracy(self, gain_mats: Sequence[np.ndarray]) -> float:
        """Reconstruction accuracy of the training-side net on held-out data."""
        if self.net is None:
            return 1.0
        x = np.stack([self.raster.transform(g) for g in gain_mats])
        return reconstruction_accuracy(self.net, x)

    # --- online side ----------------------------------------------------

    @property
    def primed(self) -> bool:
        """Whether the online snapshot has normalisation bounds to encode with."""
        return self._online_raster.lo is not None

    def sync(self) -> None:
        """Publish the training-side parameters and bounds to the encoder."""
        self._online_net = None if self.net is None else self.net.clone()
        self._online_raster = self.raster.copy()
        self.version += 1

    def rasterize(self, channel: ChannelState) -> np.ndarray:
        """Normalised flat vector of one channel state (online bounds)."""
        return self._online_raster.transform(channel.gains)

    def encode_raw(self, raw_flat: np.ndarray) -> np.ndarray:
        """Encode raw (unnormalised) flat gain vectors; batch friendly."""
        x = self._online_raster.transform(np.asarray(raw_flat, dtype=float))
        if raw_flat.ndim == 2:
            x = x.reshape(raw_flat.shape)
        return self._encode_normalised(x)

    def encode_channel(self, channel: ChannelState) -> EncodedState:
        vec = self._encode_normalised(self.rasterize(channel))
        return EncodedState(vector=vec, epoch=channel.epoch)

    def _encode_normalised(self, x: np.ndarray) -> np.ndarray:
        if self._online_net is None:
            return x
        a = np.atleast_2d(x)
        for idx in range(self.n_encoder_layers):
            spec = self._online_net.specs[idx]
            a = _apply(spec.activation,
                       a @ self._online_net.weights[idx].T + self._online_net.biases[idx])
        return a[0] if x.ndim == 1 else a

    # --- persistence ----------------------------------------------------

    def save(self, path: str | Path, *, seed: int | None = None,
             epoch: int = 0) -> None:
        doc = {
            "format": SAE_FORMAT,
            "n_ues": self.n_ues,
            "n_mecs": self.n_mecs,
            "dims": list(self.cfg.dims),
            "lo": self.raster.lo,
            "hi": self.raster.hi,
            "net": None if self.net is None
            else checkpoint_dict(self.net, seed, epoch),
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path, cfg: AutoencoderConfig | None = None) -> "ChannelCompressor":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != SAE_FORMAT:
            raise ValueError(f"not a compressor checkpoint: {path}")
        cfg = cfg or AutoencoderConfig(dims=list(doc["dims"]))
        if list(cfg.dims) != list(doc["dims"]):
            raise ValueError("checkpoint dims disagree with the configuration")
        rng = np.random.default_rng(0)
        comp = cls(cfg, doc["n_ues"], doc["n_mecs"], rng=rng)
        comp.raster = Rasterizer(doc["lo"], doc["hi"])
        if doc["net"] is not None:
            net_doc = doc["net"]
            specs = [LayerSpec(d["in"], d["out"], d["activation"])
                     for d in net_doc["layers"]]
            weights = [np.array(flat, dtype=float).reshape(s.out_dim, s.in_dim)
                       for flat, s in zip(net_doc["weights"], specs)]
            biases = [np.array(b, dtype=float) for b in net_doc["biases"]]
            comp.net = Network(specs, weights=weights, biases=biases)
            comp.adam = Adam(comp.net, lr=cfg.lr)
        comp.version = 0
        comp.sync()
        return comp
