"""Compressed-sensing MRI reconstruction with denoising-autoencoder priors
learned in the undecimated wavelet domain."""

from .data import extract_patches, make_phantom, make_phantom_set, training_patches
from .kspace import (
    SamplingMask,
    encode,
    fft2_unitary,
    ifft2_unitary,
    make_mask,
    mask_cartesian1d,
    mask_radial,
    mask_random2d,
    zero_filled,
)
from .metrics import evaluate, hfen, psnr, ssim
from .prior import Architecture, WaveletDAE, build_network, dae_forward, dae_vjp, train_dae
from .recon import ReconConfig, ReconResult, WDAEPRec, data_consistency, prior_gradient_step, reconstruct
from .wavelet import FilterBank, UndecimatedWavelet, filter_bank, uwt_forward, uwt_inverse

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "FilterBank",
    "ReconConfig",
    "ReconResult",
    "SamplingMask",
    "UndecimatedWavelet",
    "WDAEPRec",
    "WaveletDAE",
    "build_network",
    "dae_forward",
    "dae_vjp",
    "data_consistency",
    "encode",
    "evaluate",
    "extract_patches",
    "fft2_unitary",
    "filter_bank",
    "hfen",
    "ifft2_unitary",
    "make_mask",
    "make_phantom",
    "make_phantom_set",
    "mask_cartesian1d",
    "mask_radial",
    "mask_random2d",
    "prior_gradient_step",
    "psnr",
    "reconstruct",
    "ssim",
    "train_dae",
    "training_patches",
    "uwt_forward",
    "uwt_inverse",
    "zero_filled",
]
