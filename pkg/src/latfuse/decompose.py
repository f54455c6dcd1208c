"""Split a grayscale image into a low-rank part, a saliency part and a residual.

The image matrix itself is fed to the latent low-rank solver (no patching),
so for an H x W image the coefficient matrix Z is W x W and the projection
L is H x H.  The low-rank part X @ Z carries global structure and brightness,
the saliency part L @ X carries local structure such as hot objects and
edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .solver import SolverConfig, solve_latlrr


def validate_image(image, name: str = "image") -> np.ndarray:
    """Check that ``image`` is a finite 2-D array with values in [0, 1]."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D grayscale, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise InvalidInputError(
            f"{name} must be at least 2x2 pixels, got {arr.shape[0]}x{arr.shape[1]}"
        )
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} contains NaN or Inf pixels")
    lo = float(arr.min())
    hi = float(arr.max())
    if lo < 0.0 or hi > 1.0:
        raise InvalidInputError(
            f"{name} pixels must lie in [0, 1], got range [{lo:g}, {hi:g}]"
        )
    return arr


@dataclass
class ImageDecomposition:
    """Three additive parts of one image: low_rank + saliency + residual == image.

    The residual is stored as the exact floating-point complement
    ``image - low_rank - saliency``; it differs from the solver's sparse term
    by at most the solver tolerance, so the reported parts always rebuild the
    source image to rounding error.
    """

    low_rank: np.ndarray
    saliency: np.ndarray
    residual: np.ndarray
    converged: bool
    iterations: int


def decompose(image, cfg: SolverConfig | None = None) -> ImageDecomposition:
    """Decompose a [0, 1] grayscale image with the latent low-rank solver."""
    X = validate_image(image)
    sol = solve_latlrr(X, cfg)
    low_rank = X @ sol.Z
    saliency = sol.L @ X
    residual = X - low_rank - saliency
    return ImageDecomposition(
        low_rank=low_rank,
        saliency=saliency,
        residual=residual,
        converged=sol.converged,
        iterations=sol.iterations,
    )


def row_profile(part, row: int) -> np.ndarray:
    """Values of one row of a decomposition part, in column order.

    Feeds the CLI's plot-data writer; useful for comparing how strongly the
    two saliency parts respond along a scanline that crosses a salient object.
    """
    arr = np.asarray(part, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"part must be 2-D, got shape {arr.shape}")
    r = int(row)
    if r != row or not 0 <= r < arr.shape[0]:
        raise InvalidInputError(
            f"row index {row} out of range for a part with {arr.shape[0]} rows"
        )
    return arr[r].copy()
