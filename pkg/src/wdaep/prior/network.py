"""Residual convolutional noise estimator ``D`` operating on wavelet tensors.

Everything is plain numpy in float64: 3x3 "same" convolutions with zero
padding, batch normalization and ReLU, plus residual sums that add a block's
input to the output of its last batch norm (before that layer's ReLU).

Tensors are laid out (N, C, H, W).  Single tensors (C, H, W) are accepted by
the public functions and returned in the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..validation import check_random_state

__all__ = [
    "Architecture",
    "BatchNorm",
    "Layer",
    "DaeNetwork",
    "build_network",
    "dae_forward",
    "dae_vjp",
    "conv3x3",
]

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
# the output conv starts near zero so an untrained net predicts ~no noise
OUTPUT_INIT_GAIN = 0.01


@dataclass(frozen=True)
class Architecture:
    """Layer layout of the noise estimator.

    The network is ``Conv+ReLU``, then ``blocks`` residual blocks of
    ``block_depth`` ``Conv+BN+ReLU`` layers each, then ``tail_layers`` plain
    ``Conv+BN+ReLU`` layers, then a final ``Conv`` back to ``channels``.
    """

    width: int = 16
    blocks: int = 1
    block_depth: int = 2
    tail_layers: int = 1
    channels: int = 8

    def __post_init__(self):
        for name in ("width", "block_depth", "channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.blocks < 0 or self.tail_layers < 0:
            raise ValueError("blocks and tail_layers must be non-negative")

    @property
    def n_conv(self) -> int:
        return 2 + self.blocks * self.block_depth + self.tail_layers

    @classmethod
    def full_size(cls) -> "Architecture":
        """Full-size layout: 320 filters, five residual blocks, 20 conv layers."""
        return cls(width=320, blocks=5, block_depth=3, tail_layers=3)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "blocks": self.blocks,
            "block_depth": self.block_depth,
            "tail_layers": self.tail_layers,
            "channels": self.channels,
        }


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = BN_EPS
    momentum: float = BN_MOMENTUM

    @classmethod
    def identity(cls, n: int) -> "BatchNorm":
        return cls(np.ones(n), np.zeros(n), np.zeros(n), np.ones(n))


@dataclass
class Layer:
    """``Conv -> [BN] -> [+ skip] -> [ReLU]``.

    ``skip_from`` is the index of the layer whose *input* is added to this
    layer's BN output.
    """

    weight: np.ndarray
    bias: np.ndarray
    bn: BatchNorm | None = None
    relu: bool = True
    skip_from: int | None = None

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]


def _im2col(x: np.ndarray) -> np.ndarray:
    # (N, H, W, C) -> (N*H*W, 9*C), window offsets major, channels minor
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, w, 3, 3, c))
    for i in range(3):
        for j in range(3):
            cols[:, :, :, i, j, :] = xp[:, i : i + h, j : j + w, :]
    return cols.reshape(n * h * w, 9 * c)


def _weight_matrix(weight: np.ndarray) -> np.ndarray:
    # (O, C, 3, 3) -> (9*C, O) matching the _im2col column order
    return weight.transpose(2, 3, 1, 0).reshape(-1, weight.shape[0])


def _conv_nhwc(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None):
    n, h, w, _ = x.shape
    cols = _im2col(x)
    out = cols @ _weight_matrix(weight)
    if bias is not None:
        out += bias
    return out.reshape(n, h, w, weight.shape[0]), cols


def _conv_nhwc_input_grad(g: np.ndarray, weight: np.ndarray) -> np.ndarray:
    # adjoint of a zero-padded "same" correlation: correlate with the flipped, transposed kernel
    flipped = weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    return _conv_nhwc(g, flipped)[0]


def _conv_weight_grad(g: np.ndarray, cols: np.ndarray, shape) -> np.ndarray:
    o, c = shape[0], shape[1]
    dw = cols.T @ g.reshape(-1, o)  # (9*C, O)
    return dw.reshape(3, 3, c, o).transpose(3, 2, 0, 1)


def conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Same-size 3x3 cross-correlation with zero padding on (N, C, H, W) input."""
    out, _ = _conv_nhwc(np.moveaxis(x, 1, -1), weight, bias)
    return np.ascontiguousarray(np.moveaxis(out, -1, 1))


@dataclass
class DaeNetwork:
    """Layered residual network with explicit parameters.

    ``mode`` selects batch statistics (``"train"``) or running statistics
    (``"inference"``) in the batch-norm layers.
    """

    arch: Architecture
    layers: list[Layer]
    mode: str = "inference"
    meta: dict = field(default_factory=dict)

    @property
    def input_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def output_channels(self) -> int:
        return self.layers[-1].out_channels

    # -- parameters -------------------------------------------------------
    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order (conv weight, bias, [gamma, beta])."""
        params = []
        for layer in self.layers:
            params += [layer.weight, layer.bias]
            if layer.bn is not None:
                params += [layer.bn.gamma, layer.bn.beta]
        return params

    def buffers(self) -> list[np.ndarray]:
        bufs = []
        for layer in self.layers:
            if layer.bn is not None:
                bufs += [layer.bn.running_mean, layer.bn.running_var]
        return bufs

    def copy(self) -> "DaeNetwork":
        layers = []
        for layer in self.layers:
            bn = None
            if layer.bn is not None:
                b = layer.bn
                bn = BatchNorm(b.gamma.copy(), b.beta.copy(), b.running_mean.copy(),
                               b.running_var.copy(), b.eps, b.momentum)
            layers.append(Layer(layer.weight.copy(), layer.bias.copy(), bn, layer.relu, layer.skip_from))
        return DaeNetwork(self.arch, layers, self.mode, dict(self.meta))

    # -- forward / backward ----------------------------------------------
    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4:
            raise ShapeError(f"network input must be (C, H, W) or (N, C, H, W), got {x.shape}")
        if x.shape[1] != self.input_channels:
            raise ShapeError(f"network expects {self.input_channels} channels, got {x.shape[1]}")
        return x, single

    # internal passes work channels-last: (N, H, W, C)
    def _forward(self, x: np.ndarray, train: bool, update_stats: bool):
        inputs: list[np.ndarray] = []
        caches = []
        h = x
        for layer in self.layers:
            inputs.append(h)
            z, cols = _conv_nhwc(h, layer.weight, layer.bias)
            bn_cache = None
            if layer.bn is not None:
                z, bn_cache = _bn_forward(z, layer.bn, train, update_stats)
            if layer.skip_from is not None:
                z = z + inputs[layer.skip_from]
            mask = None
            if layer.relu:
                mask = z > 0
                z = z * mask
            caches.append((cols, bn_cache, mask))
            h = z
        return h, caches

    def _backward(self, caches, grad: np.ndarray, param_grads: bool):
        n_layers = len(self.layers)
        skip_grads: dict[int, np.ndarray] = {}
        grads: list[list[np.ndarray]] = [[] for _ in range(n_layers)]
        g = grad
        for i in range(n_layers - 1, -1, -1):
            layer = self.layers[i]
            cols, bn_cache, mask = caches[i]
            if mask is not None:
                g = g * mask
            if layer.skip_from is not None:
                j = layer.skip_from
                skip_grads[j] = skip_grads.get(j, 0) + g
            if layer.bn is not None:
                g, dgamma, dbeta = _bn_backward(g, layer.bn, bn_cache)
            if param_grads:
                dw = _conv_weight_grad(g, cols, layer.weight.shape)
                db = g.sum(axis=(0, 1, 2))
                grads[i] = [dw, db] + ([dgamma, dbeta] if layer.bn is not None else [])
            if i > 0 or not param_grads:
                g = _conv_nhwc_input_grad(g, layer.weight)
            if i in skip_grads:
                g = g + skip_grads.pop(i)
        flat = [a for layer_grads in grads for a in layer_grads]
        return g, flat

    def forward(self, x, train: bool | None = None) -> np.ndarray:
        x, single = self._check_input(x)
        train = self.mode == "train" if train is None else train
        out, _ = self._forward(np.moveaxis(x, 1, -1), train, update_stats=False)
        out = np.ascontiguousarray(np.moveaxis(out, -1, 1))
        return out[0] if single else out

    def vjp(self, x, r, train: bool | None = None) -> np.ndarray:
        """Gradient of ``<D(x), r>`` with respect to ``x``."""
        x, single = self._check_input(x)
        r = np.asarray(r, dtype=np.float64)
        if single:
            r = r[None]
        expected = (x.shape[0], self.output_channels) + x.shape[2:]
        if r.shape != expected:
            raise ShapeError(f"cotangent shape {r.shape} does not match network output {expected}")
        train = self.mode == "train" if train is None else train
        _, caches = self._forward(np.moveaxis(x, 1, -1), train, update_stats=False)
        g, _ = self._backward(caches, np.moveaxis(r, 1, -1), param_grads=False)
        g = np.ascontiguousarray(np.moveaxis(g, -1, 1))
        return g[0] if single else g

    def loss_and_grads(self, x: np.ndarray, target: np.ndarray, update_stats: bool = True):
        """Mean squared error against ``target`` and its parameter gradients (train mode).

        ``x`` and ``target`` are (N, C, H, W).
        """
        out, caches = self._forward(np.moveaxis(x, 1, -1), train=True, update_stats=update_stats)
        diff = out - np.moveaxis(target, 1, -1)
        loss = float(np.mean(diff**2))
        _, grads = self._backward(caches, 2.0 * diff / diff.size, param_grads=True)
        return loss, grads


def _bn_forward(z: np.ndarray, bn: BatchNorm, train: bool, update_stats: bool):
    if train:
        mean = z.mean(axis=(0, 1, 2))
        var = z.var(axis=(0, 1, 2))
        if update_stats:
            m = z.size // z.shape[-1]
            unbiased = var * m / max(m - 1, 1)
            bn.running_mean[...] = (1 - bn.momentum) * bn.running_mean + bn.momentum * mean
            bn.running_var[...] = (1 - bn.momentum) * bn.running_var + bn.momentum * unbiased
    else:
        mean, var = bn.running_mean, bn.running_var
    invstd = 1.0 / np.sqrt(var + bn.eps)
    xhat = (z - mean) * invstd
    return bn.gamma * xhat + bn.beta, (xhat, invstd, train)


def _bn_backward(g: np.ndarray, bn: BatchNorm, cache):
    xhat, invstd, train = cache
    dgamma = np.sum(g * xhat, axis=(0, 1, 2))
    dbeta = g.sum(axis=(0, 1, 2))
    dxhat = g * bn.gamma
    if not train:
        return dxhat * invstd, dgamma, dbeta
    m = g.size // g.shape[-1]
    dz = invstd / m * (m * dxhat - dxhat.sum(axis=(0, 1, 2)) - xhat * np.sum(dxhat * xhat, axis=(0, 1, 2)))
    return dz, dgamma, dbeta


def _init_conv(rng: np.random.Generator, c_out: int, c_in: int, gain: float = 1.0):
    fan_in = c_in * 9
    bound = gain * np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(c_out, c_in, 3, 3)), np.zeros(c_out)


def build_network(arch: Architecture | dict | None = None, seed=0, output_gain: float = OUTPUT_INIT_GAIN) -> DaeNetwork:
    """Create a freshly initialized network.

    Hidden convs get He-uniform weights; the output conv is additionally
    scaled by ``output_gain``.  Biases start at zero.
    """
    if arch is None:
        arch = Architecture()
    elif isinstance(arch, dict):
        arch = Architecture(**arch)
    rng = check_random_state(seed)
    c, w = arch.channels, arch.width
    layers = [Layer(*_init_conv(rng, w, c), bn=None, relu=True)]
    for _ in range(arch.blocks):
        start = len(layers)
        for d in range(arch.block_depth):
            last = d == arch.block_depth - 1
            layers.append(
                Layer(*_init_conv(rng, w, w), bn=BatchNorm.identity(w), relu=True,
                      skip_from=start if last else None)
            )
    for _ in range(arch.tail_layers):
        layers.append(Layer(*_init_conv(rng, w, w), bn=BatchNorm.identity(w), relu=True))
    layers.append(Layer(*_init_conv(rng, c, w, output_gain), bn=None, relu=False))
    return DaeNetwork(arch, layers)


def dae_forward(net, x) -> np.ndarray:
    """Noise estimate ``D(x)`` in the network's current mode."""
    return net.forward(x)


def dae_vjp(net, x, r) -> np.ndarray:
    """Vector-Jacobian product ``J_D(x)^T r``."""
    return net.vjp(x, r)
