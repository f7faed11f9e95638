"""Denoising training of the noise estimator.

Each presentation of a clean wavelet patch ``c`` draws fresh noise ``eta``
and the network is fit so that ``D(c + eta) ~ eta`` in mean square.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DataError, ShapeError
from .network import DaeNetwork

__all__ = ["TrainConfig", "Adam", "train_dae"]


@dataclass(frozen=True)
class TrainConfig:
    patch_size: int = 40
    batch_size: int = 128
    epochs: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    sigma_eta: float = 25 / 255
    seed: int = 0

    def __post_init__(self):
        for name in ("patch_size", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.sigma_eta < 0:
            raise ConfigError("sigma_eta must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    """Adaptive-moment gradient descent updating arrays in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_dae(net: DaeNetwork, dataset, cfg: TrainConfig, callback=None):
    """Train ``net`` in place on clean patches (N, 8, P, P).

    Returns ``(net, history)`` where ``history`` holds the mean per-element
    squared error of each epoch.  Shuffling and noise draws come from a
    generator seeded with ``cfg.seed`` so reruns are bitwise identical.
    """
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 4 or data.shape[0] == 0:
        raise DataError(f"training set must be a nonempty (N, C, P, P) array, got shape {data.shape}")
    if data.shape[1] != net.input_channels:
        raise ShapeError(f"patches have {data.shape[1]} channels, network expects {net.input_channels}")
    if data.shape[2] != cfg.patch_size or data.shape[3] != cfg.patch_size:
        raise ShapeError(f"patches are {data.shape[2]}x{data.shape[3]}, config says {cfg.patch_size}")

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(net.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    history = []
    net.mode = "train"
    n = data.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            clean = data[idx]
            eta = cfg.sigma_eta * rng.standard_normal(clean.shape)
            loss, grads = net.loss_and_grads(clean + eta, eta)
            opt.step(grads)
            total += loss * len(idx)
            count += len(idx)
        history.append(total / count)
        if callback is not None:
            callback(epoch, history[-1])
    net.mode = "inference"
    net.meta.update({"sigma_eta": cfg.sigma_eta, "seed": cfg.seed, "epochs": cfg.epochs})
    return net, history
