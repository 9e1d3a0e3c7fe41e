"""Noise-translation denoising toolkit.

Thin wrapper over the C++ core. Arrays are numpy float64 in the [C,H,W]
layout with pixel values in [0,1]; noise levels quoted in 8-bit units
correspond to sigma/255 internally.
"""

from ._noisetrans import (  # noqa: F401
    Prng,
    analyze_noise,
    cosine_lr,
    denoise,
    denoise_only,
    dft2,
    empirical_moments,
    gaussian_spectrum_scale,
    loss_breakdown,
    psnr,
    rayleigh_pdf,
    sample_gaussian,
    sample_rayleigh,
    spectrum_magnitudes,
    ssim,
    synth_correlated,
    synth_signal_dependent,
    w1_oracle,
    w1_sorted,
)

__all__ = [
    "Prng",
    "analyze_noise",
    "cosine_lr",
    "denoise",
    "denoise_only",
    "dft2",
    "empirical_moments",
    "gaussian_spectrum_scale",
    "loss_breakdown",
    "psnr",
    "rayleigh_pdf",
    "sample_gaussian",
    "sample_rayleigh",
    "spectrum_magnitudes",
    "ssim",
    "synth_correlated",
    "synth_signal_dependent",
    "w1_oracle",
    "w1_sorted",
]
