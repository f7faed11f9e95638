"""One-level undecimated (a trous) 2D wavelet transform on complex images.

The filters are orthonormal two-channel banks rescaled by 1/sqrt(2) per 1D
stage, which turns the redundant undecimated transform ``W`` into a Parseval
tight frame: ``W.T @ W == I``.  The adjoint is therefore also the inverse.

Boundaries are periodic, so ``W`` commutes with circular shifts and matches
the periodicity of the discrete Fourier forward model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimensionError, ShapeError, UnsupportedWavelet

__all__ = [
    "FilterBank",
    "SUBBANDS",
    "CHANNELS",
    "available_wavelets",
    "filter_bank",
    "uwt_forward",
    "uwt_inverse",
    "UndecimatedWavelet",
]

SUBBANDS = ("LL", "LH", "HL", "HH")
CHANNELS = tuple(f"{b}_{part}" for b in SUBBANDS for part in ("re", "im"))

# Orthonormal decomposition low-pass filters (sum = sqrt(2)).
_ORTHONORMAL_LOWPASS = {
    "haar": [0.7071067811865476, 0.7071067811865476],
    "db4": [
        -0.010597401785069032,
        0.0328830116668852,
        0.030841381835560764,
        -0.18703481171909309,
        -0.027983769416859854,
        0.6308807679298589,
        0.7148465705529157,
        0.2303778133088965,
    ],
    "sym4": [
        -0.07576571478950221,
        -0.029635527646002493,
        0.497618667632775,
        0.8037387518051321,
        0.29785779560530606,
        -0.09921954357663353,
        -0.012603967262031304,
        0.032223100604051466,
    ],
    "coif2": [
        -0.000720549445520347,
        -0.0018232088709110323,
        0.005611434819368834,
        0.02368017194684777,
        -0.05943441864643109,
        -0.07648859907828076,
        0.4170051844232391,
        0.8127236354494135,
        0.3861100668227629,
        -0.0673725547237256,
        -0.04146493678687178,
        0.01638733646320364,
    ],
}


@dataclass(frozen=True)
class FilterBank:
    """Analysis filter pair of a Parseval-normalized undecimated bank.

    Synthesis uses the time-reversed analysis filters, which is what the
    adjoint of circular correlation amounts to.
    """

    name: str
    analysis_low: np.ndarray
    analysis_high: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.analysis_low, dtype=np.float64).ravel()
        hi = np.asarray(self.analysis_high, dtype=np.float64).ravel()
        if lo.size == 0 or hi.size == 0:
            raise ValueError("filters must be nonempty")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("filter coefficients must be finite")
        n = max(lo.size, hi.size)
        lo = np.pad(lo, (0, n - lo.size))
        hi = np.pad(hi, (0, n - hi.size))
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "analysis_low", lo)
        object.__setattr__(self, "analysis_high", hi)

    @property
    def length(self) -> int:
        return self.analysis_low.size

    @property
    def synthesis_low(self) -> np.ndarray:
        return self.analysis_low[::-1]

    @property
    def synthesis_high(self) -> np.ndarray:
        return self.analysis_high[::-1]

    def energy(self) -> float:
        return float(np.sum(self.analysis_low**2) + np.sum(self.analysis_high**2))

    @classmethod
    def from_orthonormal(cls, name: str, lowpass) -> "FilterBank":
        """Build a Parseval bank from an orthonormal low-pass filter.

        The high-pass is the quadrature mirror ``g[n] = (-1)^n h[L-1-n]``.
        """
        h = np.asarray(lowpass, dtype=np.float64)
        g = h[::-1] * (-1.0) ** np.arange(h.size)
        return cls(name, h / np.sqrt(2.0), g / np.sqrt(2.0))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "analysis_low": self.analysis_low.tolist(),
            "analysis_high": self.analysis_high.tolist(),
        }


def available_wavelets() -> tuple[str, ...]:
    return tuple(_ORTHONORMAL_LOWPASS)


def filter_bank(name) -> FilterBank:
    """Return the named built-in bank.

    ``name`` may also be an existing :class:`FilterBank` (returned as is) or a
    mapping with explicit ``analysis_low``/``analysis_high`` coefficients.
    """
    if isinstance(name, FilterBank):
        return name
    if isinstance(name, dict):
        return FilterBank(name.get("name", "custom"), name["analysis_low"], name["analysis_high"])
    key = str(name).lower()
    if key not in _ORTHONORMAL_LOWPASS:
        raise UnsupportedWavelet(
            f"unsupported wavelet {name!r}; available: {', '.join(available_wavelets())}"
        )
    return FilterBank.from_orthonormal(key, _ORTHONORMAL_LOWPASS[key])


def _correlate(x: np.ndarray, h: np.ndarray, axis: int) -> np.ndarray:
    # y[k] = sum_n h[n] x[k + n]  (periodic)
    out = np.zeros_like(x)
    for n, c in enumerate(h):
        if c != 0.0:
            out += c * np.roll(x, -n, axis=axis)
    return out


def _correlate_adjoint(y: np.ndarray, h: np.ndarray, axis: int) -> np.ndarray:
    # x[k] = sum_n h[n] y[k - n]  (periodic)
    out = np.zeros_like(y)
    for n, c in enumerate(h):
        if c != 0.0:
            out += c * np.roll(y, n, axis=axis)
    return out


def _split_complex(u: np.ndarray) -> np.ndarray:
    # (..., H, W) complex -> (..., 2, H, W) real
    return np.stack([u.real, u.imag], axis=-3)


def uwt_forward(u, fb="haar") -> np.ndarray:
    """Undecimated one-level analysis of a complex image.

    ``u`` has shape (H, W) or (N, H, W).  The result has shape (8, H, W) or
    (N, 8, H, W) with channels ordered as :data:`CHANNELS`.  In a subband
    name the first letter is the filter applied along rows (axis -1), the
    second along columns (axis -2).
    """
    fb = filter_bank(fb)
    u = np.asarray(u)
    if u.ndim not in (2, 3):
        raise ShapeError(f"expected an image (H, W) or a stack (N, H, W), got shape {u.shape}")
    h, w = u.shape[-2:]
    if min(h, w) < fb.length:
        raise DimensionError(
            f"image {h}x{w} is smaller than the {fb.name} filter length {fb.length}"
        )
    planes = _split_complex(u.astype(np.complex128, copy=False))
    lo, hi = fb.analysis_low, fb.analysis_high
    row_lo = _correlate(planes, lo, axis=-1)
    row_hi = _correlate(planes, hi, axis=-1)
    bands = [
        _correlate(row_lo, lo, axis=-2),  # LL
        _correlate(row_lo, hi, axis=-2),  # LH
        _correlate(row_hi, lo, axis=-2),  # HL
        _correlate(row_hi, hi, axis=-2),  # HH
    ]
    # each band is (..., 2, H, W); interleave re/im per band
    return np.concatenate(bands, axis=-3)


def uwt_inverse(t, fb="haar") -> np.ndarray:
    """Adjoint (and, for Parseval banks, inverse) of :func:`uwt_forward`."""
    fb = filter_bank(fb)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim not in (3, 4) or t.shape[-3] != 8:
        raise ShapeError(f"wavelet tensor must have 8 channels, got shape {t.shape}")
    lo, hi = fb.analysis_low, fb.analysis_high
    ll, lh, hl, hh = (t[..., 2 * i : 2 * i + 2, :, :] for i in range(4))
    row_lo = _correlate_adjoint(ll, lo, axis=-2) + _correlate_adjoint(lh, hi, axis=-2)
    row_hi = _correlate_adjoint(hl, lo, axis=-2) + _correlate_adjoint(hh, hi, axis=-2)
    planes = _correlate_adjoint(row_lo, lo, axis=-1) + _correlate_adjoint(row_hi, hi, axis=-1)
    return planes[..., 0, :, :] + 1j * planes[..., 1, :, :]


class UndecimatedWavelet(TransformerMixin, BaseEstimator):
    """scikit-learn transformer wrapping :func:`uwt_forward`/:func:`uwt_inverse`.

    Parameters
    ----------
    wavelet : str, default="haar"
        Name of a built-in filter bank.

    Examples
    --------
    >>> import numpy as np
    >>> uwt = UndecimatedWavelet("haar").fit(np.zeros((4, 4)))
    >>> uwt.transform(np.ones((4, 4))).shape
    (8, 4, 4)
    """

    def __init__(self, wavelet="haar"):
        self.wavelet = wavelet

    def fit(self, X=None, y=None):
        self.filter_bank_ = filter_bank(self.wavelet)
        self.n_channels_ = 8
        return self

    def _bank(self):
        return getattr(self, "filter_bank_", None) or filter_bank(self.wavelet)

    def transform(self, X):
        return uwt_forward(X, self._bank())

    def inverse_transform(self, X):
        return uwt_inverse(X, self._bank())
