"""Synthetic phantoms and training-patch assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .wavelet import uwt_forward

__all__ = [
    "Ellipse",
    "make_phantom",
    "make_phantom_set",
    "extract_patches",
    "training_patches",
]


@dataclass(frozen=True)
class Ellipse:
    """Ellipse in normalized coordinates, the image spanning [-1, 1] on both axes."""

    center_y: float
    center_x: float
    axis_y: float
    axis_x: float
    angle: float = 0.0
    intensity: float = 1.0

    def rasterize(self, h: int, w: int) -> np.ndarray:
        y = (np.arange(h) - (h - 1) / 2.0) / (h / 2.0)
        x = (np.arange(w) - (w - 1) / 2.0) / (w / 2.0)
        yy, xx = np.meshgrid(y - self.center_y, x - self.center_x, indexing="ij")
        c, s = np.cos(self.angle), np.sin(self.angle)
        ry = -s * xx + c * yy
        rx = c * xx + s * yy
        return (rx / self.axis_x) ** 2 + (ry / self.axis_y) ** 2 <= 1.0


def _random_ellipses(n: int, rng: np.random.Generator) -> list[Ellipse]:
    outer = Ellipse(
        rng.uniform(-0.05, 0.05),
        rng.uniform(-0.05, 0.05),
        rng.uniform(0.7, 0.9),
        rng.uniform(0.6, 0.85),
        rng.uniform(-0.3, 0.3),
        1.0,
    )
    out = [outer]
    for _ in range(n - 1):
        r = 0.5 * np.sqrt(rng.uniform())
        phi = rng.uniform(0, 2 * np.pi)
        out.append(
            Ellipse(
                r * np.sin(phi),
                r * np.cos(phi),
                rng.uniform(0.05, 0.3),
                rng.uniform(0.05, 0.3),
                rng.uniform(0, np.pi),
                rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.5),
            )
        )
    return out


def _smooth_phase(h: int, w: int, order: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    y = np.linspace(-1, 1, h)
    x = np.linspace(-1, 1, w)
    yy, xx = np.meshgrid(y, x, indexing="ij")
    phase = np.zeros((h, w))
    for i in range(order + 1):
        for j in range(order + 1 - i):
            phase += scale * rng.standard_normal() * yy**i * xx**j
    # wrap into (-pi, pi]
    return -np.angle(np.exp(-1j * phase))


def make_phantom(
    shape=(64, 64),
    n_ellipses: int = 8,
    seed=0,
    *,
    ellipses: list[Ellipse] | None = None,
    phase_order: int = 2,
    phase_scale: float = 0.4,
) -> np.ndarray:
    """Complex piecewise-constant ellipse phantom with a smooth phase, max magnitude 1.

    ``ellipses`` overrides the random layout; ``phase_scale=0`` gives a real image.
    """
    h, w = shape
    rng = np.random.default_rng(seed)
    if ellipses is None:
        if n_ellipses < 1:
            raise ConfigError("n_ellipses must be >= 1")
        ellipses = _random_ellipses(n_ellipses, rng)
    elif len(ellipses) == 0:
        raise ConfigError("at least one ellipse is required")
    mag = np.zeros((h, w))
    for e in ellipses:
        mag += e.intensity * e.rasterize(h, w)
    mag = np.abs(mag)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    phase = _smooth_phase(h, w, phase_order, phase_scale, rng) if phase_scale else np.zeros((h, w))
    return mag * np.exp(1j * phase)


def make_phantom_set(n: int, shape=(64, 64), seed=0, **kwargs) -> list[np.ndarray]:
    """``n`` independent phantoms, each seeded from a spawned child sequence."""
    children = np.random.SeedSequence(seed).spawn(n)
    n_ell = kwargs.pop("n_ellipses", None)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        k = int(rng.integers(4, 11)) if n_ell is None else n_ell
        out.append(make_phantom(shape, k, rng, **kwargs))
    return out


def extract_patches(t, patch: int, stride: int, max_count: int | None = None, seed=None) -> np.ndarray:
    """Aligned square crops of a (C, H, W) or (N, C, H, W) tensor on a stride grid.

    With ``seed`` the patch order is shuffled before truncation to ``max_count``.
    """
    t = np.asarray(t)
    if t.ndim == 3:
        t = t[None]
    if t.ndim != 4:
        raise ShapeError(f"expected (C, H, W) or (N, C, H, W), got {t.shape}")
    h, w = t.shape[-2:]
    if patch < 1 or patch > min(h, w):
        raise ConfigError(f"patch size {patch} does not fit in {h}x{w}")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    ys = range(0, h - patch + 1, stride)
    xs = range(0, w - patch + 1, stride)
    patches = np.stack(
        [t[n, :, y : y + patch, x : x + patch] for n in range(t.shape[0]) for y in ys for x in xs]
    )
    if seed is not None:
        patches = patches[np.random.default_rng(seed).permutation(len(patches))]
    if max_count is not None:
        patches = patches[:max_count]
    return patches


def training_patches(images, wavelet="haar", patch: int = 40, stride: int = 8,
                     max_count: int | None = None, seed=0) -> np.ndarray:
    """Transform whole images to the wavelet domain, then cut aligned 8-channel patches."""
    stack = np.stack([np.asarray(im, dtype=np.complex128) for im in images])
    return extract_patches(uwt_forward(stack, wavelet), patch, stride, max_count, seed)
