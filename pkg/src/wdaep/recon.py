"""Proximal-gradient reconstruction with a wavelet-domain denoising prior.

Each iteration takes a gradient step on ``G(u) = ||D(W u [+ eta]) - eta||^2``
(the network backward pass supplies ``J_D^T r``) and then solves the
k-space least-squares subproblem

    min_u ||F_p u - f||^2 + (lambda / beta) ||u - v||^2

in closed form, frequency by frequency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigError, ShapeError
from .kspace import SamplingMask, fft2_unitary, ifft2_unitary, zero_filled
from .metrics import hfen, psnr, ssim
from .wavelet import filter_bank, uwt_forward, uwt_inverse

__all__ = [
    "NOISE_MODES",
    "ReconConfig",
    "TraceRecord",
    "ReconResult",
    "sigma_for_acceleration",
    "prior_gradient_step",
    "data_consistency",
    "reconstruct",
    "WDAEPRec",
]

NOISE_MODES = ("fresh_noise", "clean_input")


def sigma_for_acceleration(R: float) -> float:
    """Noise level policy: 20/255 up to R = 5, 25/255 beyond."""
    return 20 / 255 if R <= 5 else 25 / 255


@dataclass(frozen=True)
class ReconConfig:
    lam: float = 0.1
    beta: float = 1.0
    iterations: int = 100
    sigma_eta: float | None = None
    noise_mode: str = "fresh_noise"
    seed: int = 0
    stop_tol: float = 1e-5
    wavelet: str = "haar"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.beta > 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError(f"noise_mode must be one of {NOISE_MODES}, got {self.noise_mode!r}")
        if self.sigma_eta is not None and self.sigma_eta < 0:
            raise ConfigError("sigma_eta must be >= 0")
        if self.stop_tol < 0:
            raise ConfigError("stop_tol must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    rel_change: float
    psnr: float | None = None
    ssim: float | None = None
    hfen: float | None = None


@dataclass
class ReconResult:
    image: np.ndarray
    trace: list[TraceRecord] = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0
    sigma_eta: float = 0.0

    def trace_csv(self) -> str:
        lines = ["iteration,rel_change,psnr,ssim,hfen"]
        for t in self.trace:
            cells = [str(t.k), repr(t.rel_change)]
            cells += ["" if v is None else repr(v) for v in (t.psnr, t.ssim, t.hfen)]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _mask_array(mask) -> np.ndarray:
    return mask.samples if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)


def prior_gradient_step(u, net, fb, cfg: ReconConfig, rng: np.random.Generator, sigma_eta: float | None = None):
    """Inner point ``u - beta * W^T J_D(x)^T (D(x) - eta)``.

    ``x = W u + eta`` in ``fresh_noise`` mode and ``x = W u`` in
    ``clean_input`` mode; ``eta`` is drawn from ``rng`` in both modes.
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2:
        raise ShapeError(f"image must be 2D, got shape {u.shape}")
    if getattr(net, "input_channels", 8) != 8:
        raise ShapeError("prior network must take 8-channel wavelet tensors")
    sigma = cfg.sigma_eta if sigma_eta is None else sigma_eta
    if sigma is None:
        raise ConfigError("sigma_eta is not set")
    fb = filter_bank(fb)
    t = uwt_forward(u, fb)
    eta = sigma * rng.standard_normal(t.shape)
    x = t + eta if cfg.noise_mode == "fresh_noise" else t
    r = net.forward(x) - eta
    grad = net.vjp(x, r)
    return u - cfg.beta * uwt_inverse(grad, fb)


def data_consistency(v, f, mask, lam: float) -> np.ndarray:
    """Closed-form minimizer of ``||F_p u - f||^2 + lam ||u - v||^2``.

    Per frequency ``(m f + lam v_hat) / (m + lam)``; for ``lam == 0`` the
    ``lam -> 0+`` limit keeps ``f`` where sampled and ``v_hat`` elsewhere.
    """
    v = np.asarray(v, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    m = _mask_array(mask)
    if not (v.shape == f.shape == m.shape):
        raise ShapeError(f"shapes disagree: image {v.shape}, k-space {f.shape}, mask {m.shape}")
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    vk = fft2_unitary(v)
    if lam == 0:
        uk = np.where(m, f, vk)
    else:
        uk = (np.where(m, f, 0.0) + lam * vk) / (m + lam)
    return ifft2_unitary(uk)


def _resolve_sigma(net, cfg: ReconConfig, mask) -> float:
    trained = getattr(net, "meta", {}).get("sigma_eta") if net is not None else None
    if cfg.sigma_eta is not None:
        if trained is not None and not math.isclose(trained, cfg.sigma_eta, rel_tol=1e-9):
            warnings.warn(
                f"prior was trained at sigma_eta={trained:.6g}, reconstructing with {cfg.sigma_eta:.6g}",
                stacklevel=3,
            )
        return cfg.sigma_eta
    if trained is not None:
        return float(trained)
    m = _mask_array(mask)
    return sigma_for_acceleration(m.size / max(int(m.sum()), 1))


def reconstruct(f, mask, net, cfg: ReconConfig | None = None, reference=None, callback=None) -> ReconResult:
    """Run the iterative solver from the zero-filled image.

    ``lam == 0`` switches the prior off: every iterate stays at the
    zero-filled solution.
    """
    cfg = cfg or ReconConfig()
    m = _mask_array(mask)
    f = np.asarray(f, dtype=np.complex128)
    if f.shape != m.shape:
        raise ShapeError(f"k-space shape {f.shape} does not match mask shape {m.shape}")
    if reference is not None and np.shape(reference) != m.shape:
        raise ShapeError("reference image shape does not match the measurements")
    sigma = _resolve_sigma(net, cfg, m)
    fb = filter_bank(cfg.wavelet)
    rng = np.random.default_rng(cfg.seed)
    weight = cfg.lam / cfg.beta

    u = zero_filled(f, m)
    trace: list[TraceRecord] = []
    converged = False
    for k in range(1, cfg.iterations + 1):
        if cfg.lam > 0:
            u_next = data_consistency(prior_gradient_step(u, net, fb, cfg, rng, sigma), f, m, weight)
        else:
            # zero-filled is the fixed point of the lam -> 0+ rule; skip the FFT round trip
            u_next = zero_filled(f, m)
        norm = np.linalg.norm(u)
        rel = float(np.linalg.norm(u_next - u) / (norm if norm > 0 else 1.0))
        u = u_next
        rec = TraceRecord(k, rel)
        if reference is not None:
            rec = TraceRecord(k, rel, psnr(u, reference), ssim(u, reference), _safe_hfen(u, reference))
        trace.append(rec)
        if callback is not None:
            callback(rec, u)
        if cfg.stop_tol > 0 and rel < cfg.stop_tol:
            converged = True
            break
    return ReconResult(u, trace, converged, len(trace), sigma)


def _safe_hfen(u, ref):
    try:
        return hfen(u, ref)
    except ValueError:
        return None


class WDAEPRec(BaseEstimator):
    """scikit-learn style wrapper around :func:`reconstruct`.

    ``fit(kspace, mask)`` runs the solver and stores ``image_``, ``trace_``
    and ``result_``.  ``prior`` is any object with ``forward``/``vjp`` (a
    trained :class:`~wdaep.prior.WaveletDAE` or a raw network).
    """

    def __init__(
        self,
        prior=None,
        lam=0.1,
        beta=1.0,
        iterations=100,
        sigma_eta=None,
        noise_mode="fresh_noise",
        stop_tol=1e-5,
        wavelet="haar",
        random_state=0,
    ):
        self.prior = prior
        self.lam = lam
        self.beta = beta
        self.iterations = iterations
        self.sigma_eta = sigma_eta
        self.noise_mode = noise_mode
        self.stop_tol = stop_tol
        self.wavelet = wavelet
        self.random_state = random_state

    def config(self) -> ReconConfig:
        return ReconConfig(
            lam=self.lam,
            beta=self.beta,
            iterations=self.iterations,
            sigma_eta=self.sigma_eta,
            noise_mode=self.noise_mode,
            seed=self.random_state,
            stop_tol=self.stop_tol,
            wavelet=self.wavelet,
        )

    def fit(self, kspace, mask, reference=None):
        if self.prior is None and self.lam > 0:
            raise ConfigError("a prior is required when lam > 0")
        self.result_ = reconstruct(kspace, mask, self.prior, self.config(), reference)
        self.image_ = self.result_.image
        self.trace_ = self.result_.trace
        self.n_iter_ = self.result_.iterations_run
        return self

    def reconstruct(self, kspace, mask, reference=None) -> ReconResult:
        return self.fit(kspace, mask, reference).result_
