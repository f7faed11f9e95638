"""Learned wavelet-domain prior: the residual noise estimator and its oracles."""

from .estimator import WaveletDAE
from .network import Architecture, BatchNorm, DaeNetwork, Layer, build_network, dae_forward, dae_vjp
from .oracle import (
    GaussianSurrogatePrior,
    GmmDensity,
    analytic_dae,
    analytic_score,
    optimal_noise_estimate,
    quadrature_dae,
)
from .training import Adam, TrainConfig, train_dae

__all__ = [
    "Adam",
    "Architecture",
    "BatchNorm",
    "DaeNetwork",
    "GaussianSurrogatePrior",
    "GmmDensity",
    "Layer",
    "TrainConfig",
    "WaveletDAE",
    "analytic_dae",
    "analytic_score",
    "build_network",
    "dae_forward",
    "dae_vjp",
    "optimal_noise_estimate",
    "quadrature_dae",
    "train_dae",
]
