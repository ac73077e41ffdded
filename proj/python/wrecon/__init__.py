"""Python bindings for the wrecon reconstruction library."""

from ._core import (
    Model,
    SamplingMask,
    data_fidelity,
    dwt,
    fft2c,
    gen_phantoms,
    generate_mask,
    hfen,
    ifft2c,
    iwt,
    load_image,
    load_mask,
    nmse,
    psnr,
    run_cli,
    save_image,
    ssim,
    undersample,
    wilcoxon,
)

__all__ = [
    "Model",
    "SamplingMask",
    "data_fidelity",
    "dwt",
    "fft2c",
    "gen_phantoms",
    "generate_mask",
    "hfen",
    "ifft2c",
    "iwt",
    "load_image",
    "load_mask",
    "nmse",
    "psnr",
    "run_cli",
    "save_image",
    "ssim",
    "undersample",
    "wilcoxon",
]
