"""Cartesian MRI forward model and k-space sampling masks.

All k-space arrays are stored DC-centered (``fftshift`` layout) and the
Fourier transform is unitary, so ``encode`` and ``zero_filled`` are exact
adjoints of each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MaskError, ShapeError
from .validation import check_image, check_random_state

__all__ = [
    "SamplingMask",
    "fft2_unitary",
    "ifft2_unitary",
    "encode",
    "zero_filled",
    "add_measurement_noise",
    "mask_cartesian1d",
    "mask_radial",
    "mask_random2d",
    "make_mask",
    "R_TOLERANCE",
]

R_TOLERANCE = 0.05


@dataclass(frozen=True)
class SamplingMask:
    """Boolean k-space sampling pattern with DC at ``(h // 2, w // 2)``."""

    samples: np.ndarray
    pattern: str
    target_R: float
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.samples, dtype=bool)
        if m.ndim != 2:
            raise ShapeError(f"mask must be 2D, got shape {m.shape}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "samples", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @property
    def n_sampled(self) -> int:
        return int(self.samples.sum())

    @property
    def achieved_R(self) -> float:
        n = self.n_sampled
        return float(self.samples.size) / n if n else float("inf")

    def metadata(self) -> dict:
        return {
            "pattern": self.pattern,
            "target_R": float(self.target_R),
            "achieved_R": self.achieved_R,
            "seed": self.seed,
            "params": dict(self.params),
        }


def _as_mask_array(m) -> np.ndarray:
    if isinstance(m, SamplingMask):
        return m.samples
    return np.asarray(m, dtype=bool)


def fft2_unitary(u) -> np.ndarray:
    """Unitary 2D DFT with the DC sample moved to the grid center."""
    u = np.asarray(u, dtype=np.complex128)
    return np.fft.fftshift(np.fft.fft2(u, norm="ortho"), axes=(-2, -1))


def ifft2_unitary(k) -> np.ndarray:
    """Inverse of :func:`fft2_unitary`."""
    k = np.asarray(k, dtype=np.complex128)
    return np.fft.ifft2(np.fft.ifftshift(k, axes=(-2, -1)), norm="ortho")


def encode(u, mask) -> np.ndarray:
    """Partial Fourier encoding ``F_p u``; zeros at unsampled positions."""
    u = check_image(u)
    m = _as_mask_array(mask)
    if m.shape != u.shape:
        raise ShapeError(f"image shape {u.shape} does not match mask shape {m.shape}")
    return np.where(m, fft2_unitary(u), 0.0)


def zero_filled(f, mask) -> np.ndarray:
    """Adjoint ``F_p^T f``: inverse DFT of the masked k-space."""
    f = np.asarray(f, dtype=np.complex128)
    m = _as_mask_array(mask)
    if f.shape != m.shape:
        raise ShapeError(f"k-space shape {f.shape} does not match mask shape {m.shape}")
    return ifft2_unitary(np.where(m, f, 0.0))


def add_measurement_noise(f, mask, std: float, seed=None) -> np.ndarray:
    """Add circular complex Gaussian noise of total std ``std`` on sampled positions."""
    f = np.asarray(f, dtype=np.complex128)
    m = _as_mask_array(mask)
    if std <= 0:
        return f.copy()
    rng = check_random_state(seed)
    noise = (rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape)) * (std / np.sqrt(2.0))
    return np.where(m, f + noise, 0.0)


def _check_R(target_R: float) -> float:
    target_R = float(target_R)
    if not np.isfinite(target_R) or target_R <= 1.0:
        raise ConfigError(f"acceleration factor must be > 1, got {target_R}")
    return target_R


def _within_tolerance(achieved: float, target: float) -> bool:
    return abs(achieved - target) <= R_TOLERANCE * target


def mask_cartesian1d(h: int, w: int, target_R: float, center_fraction: float = 0.08, seed=0) -> SamplingMask:
    """Sample whole phase-encode rows: a contiguous center block plus random rows."""
    target_R = _check_R(target_R)
    n_lines = int(round(h / target_R))
    n_center = int(round(center_fraction * h))
    if center_fraction < 0 or center_fraction * h > h / target_R:
        raise ConfigError(
            f"center_fraction={center_fraction} needs {center_fraction * h:.1f} rows, "
            f"more than the {h / target_R:.1f} allowed by R={target_R}"
        )
    if n_lines < 1:
        raise ConfigError(f"R={target_R} leaves no rows to sample on h={h}")
    start = h // 2 - n_center // 2
    center = np.arange(start, start + n_center)
    rest = np.setdiff1d(np.arange(h), center)
    rng = np.random.default_rng(seed)
    extra = rng.choice(rest, size=n_lines - n_center, replace=False)
    rows = np.zeros(h, dtype=bool)
    rows[center] = True
    rows[extra] = True
    m = SamplingMask(
        np.repeat(rows[:, None], w, axis=1),
        "cartesian1d",
        target_R,
        seed,
        {"center_fraction": center_fraction},
    )
    if not _within_tolerance(m.achieved_R, target_R):
        raise ConfigError(f"R={target_R} is not reachable within 5% with whole rows on h={h}")
    return m


def _radial_samples(h: int, w: int, n_spokes: int, offset: float) -> np.ndarray:
    ch, cw = h // 2, w // 2
    rmax = np.hypot(h, w) / 2.0
    t = np.arange(-np.ceil(2 * rmax), np.ceil(2 * rmax) + 1) / 2.0
    theta = offset * np.pi / n_spokes + np.arange(n_spokes) * np.pi / n_spokes
    dy = np.rint(np.outer(np.sin(theta), t)).astype(int).ravel()
    dx = np.rint(np.outer(np.cos(theta), t)).astype(int).ravel()
    # keep an offset only if its mirror image also fits, so the mask is point-symmetric about DC
    ok = (
        (ch + dy >= 0) & (ch + dy < h) & (ch - dy >= 0) & (ch - dy < h)
        & (cw + dx >= 0) & (cw + dx < w) & (cw - dx >= 0) & (cw - dx < w)
    )
    m = np.zeros((h, w), dtype=bool)
    m[ch + dy[ok], cw + dx[ok]] = True
    return m


def mask_radial(h: int, w: int, target_R: float, seed=0) -> SamplingMask:
    """Pseudo-radial mask: equiangular diameters rasterized on the Cartesian grid.

    The spoke count is found by bisection so that the achieved acceleration
    is as close as possible to ``target_R``.
    """
    target_R = _check_R(target_R)
    offset = float(np.random.default_rng(seed).random())

    def accel(n):
        return h * w / _radial_samples(h, w, n, offset).sum()

    lo, hi = 1, max(h, w) * 4
    if accel(hi) > target_R:
        raise MaskError(f"R={target_R} is below what {hi} spokes reach on {h}x{w}")
    # smallest spoke count whose acceleration is <= target
    while lo < hi:
        mid = (lo + hi) // 2
        if accel(mid) <= target_R:
            hi = mid
        else:
            lo = mid + 1
    candidates = [n for n in (lo - 1, lo, lo + 1) if n >= 1]
    best = min(candidates, key=lambda n: abs(accel(n) - target_R))
    if not _within_tolerance(accel(best), target_R):
        raise MaskError(f"no spoke count reaches R={target_R} within 5% on {h}x{w}")
    return SamplingMask(
        _radial_samples(h, w, best, offset),
        "radial",
        target_R,
        seed,
        {"n_spokes": best, "offset": offset},
    )


def _fill_probabilities(p: np.ndarray, need: int) -> np.ndarray:
    # scale so that sum(min(1, s * p)) == need
    if need <= 0:
        return np.zeros_like(p)
    if need >= p.size:
        return np.ones_like(p)
    lo, hi = 0.0, need / p.min()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.minimum(1.0, mid * p).sum() < need:
            lo = mid
        else:
            hi = mid
    return np.minimum(1.0, hi * p)


def mask_random2d(
    h: int,
    w: int,
    target_R: float,
    decay_power: float = 2.0,
    center_fraction: float = 0.08,
    seed=0,
) -> SamplingMask:
    """Variable-density random mask with inclusion probability ``(1 + r/r_max)**-decay_power``."""
    target_R = _check_R(target_R)
    if decay_power < 0:
        raise ConfigError(f"decay_power must be >= 0, got {decay_power}")
    if center_fraction < 0:
        raise ConfigError(f"center_fraction must be >= 0, got {center_fraction}")
    ky, kx = np.meshgrid(np.arange(h) - h // 2, np.arange(w) - w // 2, indexing="ij")
    r = np.hypot(ky, kx)
    density = (1.0 + r / r.max()) ** (-float(decay_power))
    center = r <= center_fraction * min(h, w) / 2.0 if center_fraction > 0 else np.zeros_like(r, dtype=bool)
    n_target = int(round(h * w / target_R))
    need = n_target - int(center.sum())
    if need < 0:
        raise ConfigError(
            f"center disk holds {int(center.sum())} samples, more than the {n_target} allowed by R={target_R}"
        )
    rng = np.random.default_rng(seed)
    prob = np.zeros_like(density)
    prob[~center] = _fill_probabilities(density[~center], need)
    drawn = rng.random(prob.shape) < prob
    tiebreak = rng.random(prob.shape)
    drawn &= ~center

    flat_prob, flat_tie, flat_drawn = prob.ravel(), tiebreak.ravel(), drawn.ravel()
    excess = int(flat_drawn.sum()) - need
    if excess > 0:
        idx = np.flatnonzero(flat_drawn)
        order = np.lexsort((flat_tie[idx], flat_prob[idx]))  # lowest probability first
        flat_drawn[idx[order[:excess]]] = False
    elif excess < 0:
        idx = np.flatnonzero(~flat_drawn & ~center.ravel())
        order = np.lexsort((-flat_tie[idx], -flat_prob[idx]))  # highest probability first
        flat_drawn[idx[order[:-excess]]] = True
    samples = flat_drawn.reshape(h, w) | center
    m = SamplingMask(
        samples,
        "random2d",
        target_R,
        seed,
        {"decay_power": float(decay_power), "center_fraction": float(center_fraction)},
    )
    if not _within_tolerance(m.achieved_R, target_R):
        raise ConfigError(f"R={target_R} is not reachable within 5% on {h}x{w}")
    return m


def make_mask(pattern: str, shape, target_R: float, seed=0, **kwargs) -> SamplingMask:
    """Dispatch to the generator named by ``pattern``."""
    h, w = shape
    if pattern == "cartesian1d":
        return mask_cartesian1d(h, w, target_R, seed=seed, **kwargs)
    if pattern == "radial":
        return mask_radial(h, w, target_R, seed=seed)
    if pattern == "random2d":
        return mask_random2d(h, w, target_R, seed=seed, **kwargs)
    raise ConfigError(f"unknown mask pattern {pattern!r}; use cartesian1d, radial or random2d")
