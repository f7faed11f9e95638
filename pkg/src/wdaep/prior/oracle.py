"""Optimal denoising autoencoder for Gaussian-mixture data densities.

For data drawn from an isotropic Gaussian mixture ``q`` and Gaussian noise of
standard deviation ``sigma``, the Bayes-optimal reconstruction is

    A(u) = u + sigma**2 * grad log (g_sigma * q)(u)

and ``g_sigma * q`` is again a mixture with variances ``s_i**2 + sigma**2``.
``quadrature_dae`` evaluates the same quantity as a ratio of integrals over
the noise, independently of the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from ..errors import ShapeError, UnsupportedDimension

__all__ = [
    "GmmDensity",
    "analytic_score",
    "analytic_dae",
    "optimal_noise_estimate",
    "quadrature_dae",
    "GaussianSurrogatePrior",
]


@dataclass(frozen=True)
class GmmDensity:
    """Isotropic Gaussian mixture ``sum_i w_i N(mu_i, s_i^2 I)``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.asarray(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu[:, None] if w.size > 1 or mu.size == 1 else mu[None, :]
        s2 = np.atleast_1d(np.asarray(self.variances, dtype=np.float64))
        if not (w.size == mu.shape[0] == s2.size):
            raise ShapeError("weights, means and variances disagree on the component count")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if np.any(s2 <= 0):
            raise ValueError("component variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", s2)

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.size

    def smoothed(self, sigma: float) -> "GmmDensity":
        return GmmDensity(self.weights, self.means, self.variances + sigma**2)

    def _component_logpdf(self, u: np.ndarray) -> np.ndarray:
        # u: (..., d) -> (..., K)
        d = self.dimension
        diff = u[..., None, :] - self.means
        sq = np.sum(diff**2, axis=-1)
        return (
            np.log(self.weights)
            - 0.5 * d * np.log(2 * np.pi * self.variances)
            - 0.5 * sq / self.variances
        )

    def logpdf(self, u) -> np.ndarray:
        u = self._check(u)
        return logsumexp(self._component_logpdf(u), axis=-1)

    def score(self, u) -> np.ndarray:
        """``grad log q(u)``."""
        u = self._check(u)
        resp = softmax(self._component_logpdf(u), axis=-1)
        pull = (self.means - u[..., None, :]) / self.variances[:, None]
        return np.sum(resp[..., None] * pull, axis=-2)

    def sample(self, n: int, rng) -> np.ndarray:
        k = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dimension))
        return self.means[k] + np.sqrt(self.variances[k])[:, None] * z

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 0:
            u = u[None]
        if u.shape[-1] != self.dimension:
            raise ShapeError(f"point has dimension {u.shape[-1]}, mixture has {self.dimension}")
        return u


def analytic_score(q: GmmDensity, sigma_eta: float, u) -> np.ndarray:
    """Mean-shift vector ``sigma**2 * grad log (g_sigma * q)(u)``."""
    return sigma_eta**2 * q.smoothed(sigma_eta).score(u)


def analytic_dae(q: GmmDensity, sigma_eta: float, u) -> np.ndarray:
    """Bayes-optimal denoiser output ``A(u)``."""
    u = q._check(u)
    return u + analytic_score(q, sigma_eta, u)


def optimal_noise_estimate(q: GmmDensity, sigma_eta: float, y) -> np.ndarray:
    """Bayes-optimal residual predictor ``E[eta | y] = y - A(y)``."""
    return -analytic_score(q, sigma_eta, y)


def quadrature_dae(q: GmmDensity, sigma_eta: float, u, radius: float = 8.0, points: int | None = None) -> np.ndarray:
    """``A(u)`` as a ratio of trapezoid-rule integrals over the noise.

    Only for one- and two-dimensional mixtures.
    """
    d = q.dimension
    if d > 2:
        raise UnsupportedDimension(f"quadrature oracle supports d <= 2, got d = {d}")
    u = q._check(u)
    if u.ndim != 1:
        raise ShapeError("quadrature_dae evaluates a single point")
    if sigma_eta <= 0:
        return u.copy()
    if points is None:
        points = 4001 if d == 1 else 801
    t = np.linspace(-radius * sigma_eta, radius * sigma_eta, points)
    wt = np.full(points, t[1] - t[0])
    wt[[0, -1]] *= 0.5
    if d == 1:
        eta = t[:, None]
        wq = wt
    else:
        e0, e1 = np.meshgrid(t, t, indexing="ij")
        eta = np.stack([e0.ravel(), e1.ravel()], axis=-1)
        wq = np.outer(wt, wt).ravel()
    log_kernel = -0.5 * np.sum(eta**2, axis=-1) / sigma_eta**2
    log_integrand = log_kernel + q.logpdf(u[None, :] - eta)
    weights = wq * np.exp(log_integrand - log_integrand.max())
    mean_noise = weights @ eta / weights.sum()
    return u - mean_noise


class GaussianSurrogatePrior:
    """Per-coefficient Gaussian prior posing as a trained noise estimator.

    Every wavelet coefficient is modeled as ``N(mean, variance)``, so the
    optimal noise estimate is linear, ``D(x) = (x - mean) * sigma**2 /
    (variance + sigma**2)``.  Exposes the ``forward``/``vjp`` interface of
    :class:`~wdaep.prior.network.DaeNetwork`.
    """

    input_channels = 8
    output_channels = 8

    def __init__(self, sigma_eta: float, mean: float = 0.0, variance: float = 1.0):
        self.sigma_eta = sigma_eta
        self.density = GmmDensity([1.0], [[mean]], [variance])
        self.meta = {"sigma_eta": sigma_eta}

    @property
    def gain(self) -> float:
        return self.sigma_eta**2 / (self.density.variances[0] + self.sigma_eta**2)

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        return optimal_noise_estimate(self.density, self.sigma_eta, x[..., None])[..., 0]

    def vjp(self, x, r):
        return self.gain * np.asarray(r, dtype=np.float64)
