"""Combine two image decompositions into a fused image.

Low-rank parts are blended by weighted average (defaults 0.5/0.5) so global
structure and brightness stay balanced; saliency parts are added with unit
weights so salient features from either source survive unreduced.  The fused
image is the sum of the two fused parts, clamped to [0, 1] only at the very
end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decompose import ImageDecomposition, decompose, validate_image
from .errors import InvalidInputError
from .solver import SolverConfig


@dataclass(frozen=True)
class FusionWeights:
    """w1/w2 blend the low-rank parts; s1/s2 scale the saliency parts."""

    w1: float = 0.5
    w2: float = 0.5
    s1: float = 1.0
    s2: float = 1.0

    def __post_init__(self):
        for name in ("w1", "w2", "s1", "s2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidInputError(f"{name} must be finite and >= 0, got {v}")
        if self.w1 > 1 or self.w2 > 1:
            raise InvalidInputError(
                f"low-rank weights must lie in [0, 1], got w1={self.w1}, w2={self.w2}"
            )


@dataclass
class FusedResult:
    """Fused image plus the intermediate parts that built it.

    ``fused_raw`` is the unclamped sum of the fused low-rank and saliency
    parts (the sum strategy can push it above 1); ``fused`` is the raw image
    clamped to [0, 1] and is what gets written to disk and scored.  When
    produced by :func:`fuse_pipeline`, the two source decompositions ride
    along for convergence reporting.
    """

    fused: np.ndarray
    fused_raw: np.ndarray
    fused_low_rank: np.ndarray
    fused_saliency: np.ndarray
    ir_decomposition: ImageDecomposition | None = None
    vis_decomposition: ImageDecomposition | None = None

    @property
    def converged(self) -> bool | None:
        """True if both decompositions converged; None without metadata."""
        if self.ir_decomposition is None or self.vis_decomposition is None:
            return None
        return self.ir_decomposition.converged and self.vis_decomposition.converged


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(
            f"{what} must have identical dimensions, got {a.shape} vs {b.shape}"
        )


def fuse_low_rank(a, b, weights: FusionWeights | None = None) -> np.ndarray:
    """Weighted average w1*a + w2*b of two low-rank parts."""
    w = weights if weights is not None else FusionWeights()
    A = np.asarray(a, dtype=np.float64)
    B = np.asarray(b, dtype=np.float64)
    _check_same_shape(A, B, "low-rank parts")
    return w.w1 * A + w.w2 * B


def fuse_saliency(a, b, weights: FusionWeights | None = None) -> np.ndarray:
    """Weighted sum s1*a + s2*b of two saliency parts."""
    w = weights if weights is not None else FusionWeights()
    A = np.asarray(a, dtype=np.float64)
    B = np.asarray(b, dtype=np.float64)
    _check_same_shape(A, B, "saliency parts")
    return w.s1 * A + w.s2 * B


def reconstruct(fused_low_rank, fused_saliency) -> FusedResult:
    """Add the fused parts and clamp the result to [0, 1]."""
    flr = np.asarray(fused_low_rank, dtype=np.float64)
    fs = np.asarray(fused_saliency, dtype=np.float64)
    _check_same_shape(flr, fs, "fused parts")
    raw = flr + fs
    return FusedResult(
        fused=np.clip(raw, 0.0, 1.0),
        fused_raw=raw,
        fused_low_rank=flr,
        fused_saliency=fs,
    )


def fuse_pipeline(
    ir,
    vis,
    cfg: SolverConfig | None = None,
    weights: FusionWeights | None = None,
) -> FusedResult:
    """Decompose a registered infrared/visible pair and fuse the parts.

    Both images must be equal-sized with pixels in [0, 1].  Non-convergence
    of either decomposition is carried in the result metadata rather than
    raised, so callers can warn and still use the output.
    """
    ir_img = validate_image(ir, "infrared image")
    vis_img = validate_image(vis, "visible image")
    _check_same_shape(ir_img, vis_img, "source images")
    w = weights if weights is not None else FusionWeights()

    d_ir = decompose(ir_img, cfg)
    d_vis = decompose(vis_img, cfg)
    flr = fuse_low_rank(d_ir.low_rank, d_vis.low_rank, w)
    fs = fuse_saliency(d_ir.saliency, d_vis.saliency, w)
    result = reconstruct(flr, fs)
    result.ir_decomposition = d_ir
    result.vis_decomposition = d_vis
    return result
