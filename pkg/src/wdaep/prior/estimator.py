"""scikit-learn style front end for the wavelet-domain noise estimator."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..validation import check_tensor
from .network import Architecture, DaeNetwork, build_network
from .training import TrainConfig, train_dae

__all__ = ["WaveletDAE"]


class WaveletDAE(BaseEstimator):
    """Residual CNN trained to predict the Gaussian noise added to clean
    8-channel wavelet tensors.

    ``fit`` takes clean patches shaped (N, 8, P, P); ``predict`` returns the
    noise estimate ``D(x)`` and ``vjp`` the network backward pass needed by
    the reconstruction.

    Parameters
    ----------
    width, blocks, block_depth, tail_layers : int
        Layer layout, see :class:`~wdaep.prior.network.Architecture`.
    sigma_eta : float
        Training noise level in unit-normalized intensity.
    epochs, batch_size, learning_rate : training schedule (Adam).
    random_state : int
        Seeds weight initialization, shuffling and noise.
    """

    def __init__(
        self,
        width=16,
        blocks=1,
        block_depth=2,
        tail_layers=1,
        sigma_eta=25 / 255,
        epochs=20,
        batch_size=128,
        learning_rate=1e-3,
        random_state=0,
    ):
        self.width = width
        self.blocks = blocks
        self.block_depth = block_depth
        self.tail_layers = tail_layers
        self.sigma_eta = sigma_eta
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _architecture(self) -> Architecture:
        return Architecture(self.width, self.blocks, self.block_depth, self.tail_layers)

    def fit(self, X, y=None, callback=None):
        X = check_tensor(X, channels=8, name="X")
        if X.ndim == 3:
            X = X[None]
        cfg = TrainConfig(
            patch_size=X.shape[-1],
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            sigma_eta=self.sigma_eta,
            seed=self.random_state,
        )
        net = build_network(self._architecture(), seed=self.random_state)
        self.network_, self.loss_history_ = train_dae(net, X, cfg, callback=callback)
        return self

    @classmethod
    def from_network(cls, net: DaeNetwork) -> "WaveletDAE":
        a = net.arch
        est = cls(a.width, a.blocks, a.block_depth, a.tail_layers,
                  sigma_eta=net.meta.get("sigma_eta", 25 / 255),
                  random_state=net.meta.get("seed", 0))
        est.network_ = net
        est.loss_history_ = list(net.meta.get("loss_history", []))
        return est

    def _net(self) -> DaeNetwork:
        if not hasattr(self, "network_"):
            raise NotFittedError("WaveletDAE is not fitted yet; call fit first")
        return self.network_

    def predict(self, X) -> np.ndarray:
        return self._net().forward(check_tensor(X, channels=8, name="X"))

    def vjp(self, X, r) -> np.ndarray:
        return self._net().vjp(check_tensor(X, channels=8, name="X"), r)

    # the estimator itself can be handed to the solver in place of a network
    def forward(self, X) -> np.ndarray:
        return self.predict(X)

    @property
    def meta(self) -> dict:
        return self._net().meta
