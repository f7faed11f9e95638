"""Reconstruction quality metrics: PSNR, SSIM and HFEN.

All metrics compare magnitude images.  PSNR uses the root-mean-square error
(per-pixel normalized norm); with the plain Frobenius norm the familiar
~30 dB values on 256x256 images would be unreachable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateReference, ShapeError

__all__ = ["MetricReport", "log_kernel", "psnr", "ssim", "hfen", "evaluate"]


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    hfen: float

    def csv(self) -> str:
        return f"{_fmt(self.psnr)},{_fmt(self.ssim)},{_fmt(self.hfen)}"

    def __str__(self):
        return f"PSNR {self.psnr:.2f} dB / SSIM {self.ssim:.4f} / HFEN {self.hfen:.4f}"


def _fmt(v: float) -> str:
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _magnitudes(u, ref):
    u = np.abs(np.asarray(u))
    ref = np.abs(np.asarray(ref))
    if u.shape != ref.shape:
        raise ShapeError(f"image shape {u.shape} does not match reference shape {ref.shape}")
    return u.astype(np.float64), ref.astype(np.float64)


def psnr(u, ref) -> float:
    """``20 log10(max|ref| / RMSE)``; ``inf`` for an exact match."""
    u, ref = _magnitudes(u, ref)
    rmse = np.sqrt(np.mean((u - ref) ** 2))
    if rmse == 0:
        return float("inf")
    return float(20.0 * np.log10(ref.max() / rmse))


def ssim(u, ref, *, windowed: bool = False, data_range: float | None = None) -> float:
    """Structural similarity with ``c1 = (0.01 L)^2``, ``c2 = (0.03 L)^2``.

    By default the statistics are global (one window covering the image).
    ``windowed=True`` uses 11x11 Gaussian windows (sigma 1.5) and averages
    the SSIM map.
    """
    u, ref = _magnitudes(u, ref)
    L = ref.max() if data_range is None else data_range
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    if windowed:
        blur = lambda a: ndimage.gaussian_filter(a, 1.5, truncate=5 / 1.5, mode="reflect")  # noqa: E731
        mu_u, mu_r = blur(u), blur(ref)
        var_u = blur(u * u) - mu_u**2
        var_r = blur(ref * ref) - mu_r**2
        cov = blur(u * ref) - mu_u * mu_r
    else:
        mu_u, mu_r = u.mean(), ref.mean()
        du, dr = u - mu_u, ref - mu_r
        var_u, var_r = np.mean(du * du), np.mean(dr * dr)
        cov = np.mean(du * dr)
    num = (2 * mu_u * mu_r + c1) * (2 * cov + c2)
    den = (mu_u**2 + mu_r**2 + c1) * (var_u + var_r + c2)
    if np.ndim(num) == 0 and den == 0:
        return 1.0
    return float(np.mean(num / den))


def log_kernel(size: int = 15, sigma: float = 1.5) -> np.ndarray:
    """Zero-mean Laplacian-of-Gaussian taps on a ``size`` x ``size`` grid."""
    r = np.arange(size) - (size - 1) / 2.0
    x, y = np.meshgrid(r, r, indexing="ij")
    rr = x**2 + y**2
    k = (rr - 2 * sigma**2) / sigma**4 * np.exp(-rr / (2 * sigma**2))
    k = k - k.mean()
    # average with the transpose and flips so the 8-fold symmetry is exact in floating point
    k = (k + k.T) / 2
    k = (k + k[::-1, :]) / 2
    k = (k + k[:, ::-1]) / 2
    return k - k.mean()


def _log_filter(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.convolve(a, kernel, mode="reflect")


def hfen(u, ref, size: int = 15, sigma: float = 1.5) -> float:
    """``||LoG(u) - LoG(ref)||_F^2 / ||LoG(ref)||_F^2`` with mirror boundaries."""
    u, ref = _magnitudes(u, ref)
    k = log_kernel(size, sigma)
    lr = _log_filter(ref, k)
    den = np.sum(lr**2)
    scale = max(np.sum(ref**2), np.finfo(float).tiny)
    if den <= 1e-24 * scale or den == 0:
        raise DegenerateReference("LoG of the reference image is zero (constant image?)")
    lu = _log_filter(u, k)
    return float(np.sum((lu - lr) ** 2) / den)


def evaluate(u, ref) -> MetricReport:
    return MetricReport(psnr(u, ref), ssim(u, ref), hfen(u, ref))
