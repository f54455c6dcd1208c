"""Infrared/visible image fusion by latent low-rank decomposition.

The pipeline decomposes each registered source image into a low-rank part
(global structure) and a saliency part (local structure), fuses the parts
separately (weighted average for low-rank, weighted sum for saliency), and
reconstructs the fused image.  Four reference-free fusion metrics score the
result against the two sources.
"""

from .decompose import ImageDecomposition, decompose, row_profile, validate_image
from .errors import InvalidInputError, LatfuseError, NumericalError
from .fusion import (
    FusedResult,
    FusionWeights,
    fuse_low_rank,
    fuse_pipeline,
    fuse_saliency,
    reconstruct,
)
from .imgio import load_image, resize_max_dim, save_image
from .metrics import MetricsReport, evaluate, nabf, qabf, scd, ssim, ssim_a
from .solver import LatLrrSolution, SolverConfig, soft_threshold, solve_latlrr, svt

__version__ = "0.1.0"

__all__ = [
    "ImageDecomposition",
    "InvalidInputError",
    "LatfuseError",
    "NumericalError",
    "FusedResult",
    "FusionWeights",
    "LatLrrSolution",
    "MetricsReport",
    "SolverConfig",
    "decompose",
    "evaluate",
    "fuse_low_rank",
    "fuse_pipeline",
    "fuse_saliency",
    "load_image",
    "nabf",
    "qabf",
    "reconstruct",
    "resize_max_dim",
    "row_profile",
    "save_image",
    "scd",
    "solve_latlrr",
    "soft_threshold",
    "ssim",
    "ssim_a",
    "svt",
    "validate_image",
    "__version__",
]
