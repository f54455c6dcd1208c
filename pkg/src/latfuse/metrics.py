"""Objective fusion-quality metrics: qabf, scd, ssim / ssim_a, nabf.

All four operate on grayscale matrices with the fused image already clamped
to [0, 1] (the same pixels written to disk).  Higher is better for qabf, scd
and ssim_a; lower is better for nabf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import InvalidInputError

# Sigmoid constants of the gradient-based edge-preservation model.  Pinned
# here for reproducibility; changing them changes qabf and nabf.
_GAMMA_G = 0.9994
_KAPPA_G = -15.0
_SIGMA_G = 0.5
_GAMMA_A = 0.9879
_KAPPA_A = -22.0
_SIGMA_A = 0.8

# SSIM defaults: 11x11 Gaussian window, sigma 1.5, dynamic range L = 1.
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = (0.01 * 1.0) ** 2
_SSIM_C2 = (0.03 * 1.0) ** 2

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]])


@dataclass(frozen=True)
class MetricsReport:
    """The four scores for one fused image against its two sources."""

    qabf: float
    scd: float
    ssim_a: float
    nabf: float


def _as_image(M, name: str) -> np.ndarray:
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _check_shapes(*named) -> None:
    shapes = {arr.shape for _, arr in named}
    if len(shapes) > 1:
        detail = ", ".join(f"{name}={arr.shape}" for name, arr in named)
        raise InvalidInputError(f"images must have identical dimensions: {detail}")


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(x, y) -> float:
    """Mean structural similarity between two equal-sized [0, 1] images.

    Gaussian-weighted local statistics on 11x11 windows (sigma 1.5), map
    averaged over all fully interior window positions.  Result lies in
    [-1, 1] with 1 meaning structurally identical.
    """
    X = _as_image(x, "x")
    Y = _as_image(y, "y")
    _check_shapes(("x", X), ("y", Y))
    if min(X.shape) < _SSIM_WINDOW:
        raise InvalidInputError(
            f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} for the "
            f"local-statistics window, got {X.shape[0]}x{X.shape[1]}"
        )
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_x = convolve2d(X, win, mode="valid")
    mu_y = convolve2d(Y, win, mode="valid")
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = convolve2d(X * X, win, mode="valid") - mu_xx
    var_y = convolve2d(Y * Y, win, mode="valid") - mu_yy
    cov_xy = convolve2d(X * Y, win, mode="valid") - mu_xy
    ssim_map = ((2.0 * mu_xy + _SSIM_C1) * (2.0 * cov_xy + _SSIM_C2)) / (
        (mu_xx + mu_yy + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    )
    return float(ssim_map.mean())


def ssim_a(fused, i1, i2) -> float:
    """Mean of the fused image's SSIM to each source: structural preservation."""
    return (ssim(fused, i1) + ssim(fused, i2)) * 0.5


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    # Zero variance on either side makes the correlation undefined; score it 0.
    ad = a - a.mean()
    bd = b - b.mean()
    va = float((ad * ad).sum())
    vb = float((bd * bd).sum())
    if va == 0.0 or vb == 0.0:
        return 0.0
    return float((ad * bd).sum() / math.sqrt(va * vb))


def scd(fused, i1, i2) -> float:
    """Sum of correlations of differences.

    Correlates each source with the fused image minus the *other* source:
    r(F - I2, I1) + r(F - I1, I2).  Bounded by [-2, 2].
    """
    F = _as_image(fused, "fused")
    A = _as_image(i1, "i1")
    B = _as_image(i2, "i2")
    _check_shapes(("fused", F), ("i1", A), ("i2", B))
    return _pearson(F - B, A) + _pearson(F - A, B)


def _edge_strength_orientation(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sx = convolve2d(img, _SOBEL_X, mode="same")
    sy = convolve2d(img, _SOBEL_Y, mode="same")
    g = np.hypot(sx, sy)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.arctan(sy / sx)
    alpha[sx == 0.0] = np.pi / 2.0
    return g, alpha


def _edge_preservation(
    g_src: np.ndarray, a_src: np.ndarray, g_f: np.ndarray, a_f: np.ndarray
) -> np.ndarray:
    # Relative strength: min/max, with 0 when both gradients vanish (such
    # pixels also carry zero weight in the final sums).
    num = np.minimum(g_f, g_src)
    den = np.maximum(g_f, g_src)
    G = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    A = 1.0 - np.abs(a_src - a_f) / (np.pi / 2.0)
    q_g = _GAMMA_G / (1.0 + np.exp(_KAPPA_G * (G - _SIGMA_G)))
    q_a = _GAMMA_A / (1.0 + np.exp(_KAPPA_A * (A - _SIGMA_A)))
    return q_g * q_a


def qabf(fused, i1, i2) -> float:
    """Gradient-based edge-preservation score in [0, 1].

    Sobel strength and orientation are extracted per image; per-pixel
    preservation factors combine a relative-strength sigmoid and an
    orientation-agreement sigmoid, then are averaged with the source edge
    strengths as weights.  All-flat inputs (no edges anywhere) score 0.
    """
    F = _as_image(fused, "fused")
    A = _as_image(i1, "i1")
    B = _as_image(i2, "i2")
    _check_shapes(("fused", F), ("i1", A), ("i2", B))
    g_a, a_a = _edge_strength_orientation(A)
    g_b, a_b = _edge_strength_orientation(B)
    g_f, a_f = _edge_strength_orientation(F)
    q_af = _edge_preservation(g_a, a_a, g_f, a_f)
    q_bf = _edge_preservation(g_b, a_b, g_f, a_f)
    weight_sum = float((g_a + g_b).sum())
    if weight_sum == 0.0:
        return 0.0
    return float((q_af * g_a + q_bf * g_b).sum() / weight_sum)


def nabf(fused, i1, i2) -> float:
    """Fusion-artifact measure: weighted penalty where the fused gradient
    strictly exceeds both source gradients.  0 means no locations where the
    fusion invented edge energy; lower is better.
    """
    F = _as_image(fused, "fused")
    A = _as_image(i1, "i1")
    B = _as_image(i2, "i2")
    _check_shapes(("fused", F), ("i1", A), ("i2", B))
    g_a, a_a = _edge_strength_orientation(A)
    g_b, a_b = _edge_strength_orientation(B)
    g_f, a_f = _edge_strength_orientation(F)
    q_af = _edge_preservation(g_a, a_a, g_f, a_f)
    q_bf = _edge_preservation(g_b, a_b, g_f, a_f)
    weight_sum = float((g_a + g_b).sum())
    if weight_sum == 0.0:
        return 0.0
    artifacts = (g_f > g_a) & (g_f > g_b)
    penalty = artifacts * ((1.0 - q_af) * g_a + (1.0 - q_bf) * g_b)
    return float(penalty.sum() / weight_sum)


def evaluate(fused, i1, i2) -> MetricsReport:
    """All four metrics for one fused image."""
    return MetricsReport(
        qabf=qabf(fused, i1, i2),
        scd=scd(fused, i1, i2),
        ssim_a=ssim_a(fused, i1, i2),
        nabf=nabf(fused, i1, i2),
    )
