"""Adaptive pre-enhancement augmentation (APA).

Training-only pipeline that converts raw low-light frames into moderately
enhanced training inputs: edge-preserving denoise, adaptive gamma lift of
the luma channel followed by CLAHE, a green-red cast correction in Lab,
and saturation/highlight shaping in HSV. Runs once, offline; never applied
at inference time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import imgcore


@dataclass
class ApaParams:
    bilateral_d: int = 9
    sigma_color: float = 0.3
    sigma_space: float = 3.0
    gamma_base: float = 2.2
    kappa: float = 0.5
    gamma_min: float = 1.0
    gamma_max: float = 4.0
    epsilon: float = 1e-6
    clahe_clip: float = 2.0
    clahe_tiles: int = 8
    clahe_enabled: bool = True
    beta_red: float = 1.1
    beta_sat: float = 1.2
    eta_supp: float = 0.95

    def __post_init__(self) -> None:
        if self.gamma_min < 1.0:
            raise ValueError("gamma_min must be >= 1")
        if self.gamma_max <= self.gamma_min:
            raise ValueError("gamma_max must exceed gamma_min")
        if not 0.0 < self.eta_supp <= 1.0:
            raise ValueError("eta_supp must be in (0, 1]")
        if self.beta_sat < 1.0 or self.beta_red < 1.0:
            raise ValueError("beta_sat and beta_red must be >= 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.bilateral_d < 1 or self.clahe_tiles < 1:
            raise ValueError("bilateral_d and clahe_tiles must be >= 1")


def bilateral_denoise(img: np.ndarray, params: ApaParams) -> np.ndarray:
    """Edge-preserving smoothing over a d x d window.

    Weights are the product of a spatial Gaussian (sigma_space, pixel
    units) and a range Gaussian (sigma_color) on the Euclidean RGB
    difference; out-of-bounds neighbors are excluded and the remaining
    weights normalized per pixel.
    """
    rgb = imgcore.ensure_image(img, 3)
    h, w = rgb.shape[:2]
    r = params.bilateral_d // 2
    inv_space = -0.5 / (params.sigma_space * params.sigma_space)
    inv_color = -0.5 / (params.sigma_color * params.sigma_color)
    acc = np.zeros_like(rgb)
    wacc = np.zeros((h, w))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            sw = math.exp((dy * dy + dx * dx) * inv_space)
            ya, yb = max(0, -dy), h - max(0, dy)
            xa, xb = max(0, -dx), w - max(0, dx)
            if ya >= yb or xa >= xb:
                continue
            dst = (slice(ya, yb), slice(xa, xb))
            src = (slice(ya + dy, yb + dy), slice(xa + dx, xb + dx))
            diff = rgb[src] - rgb[dst]
            weight = sw * np.exp(np.einsum("ijk,ijk->ij", diff, diff) * inv_color)
            acc[dst] += weight[:, :, None] * rgb[src]
            wacc[dst] += weight
    return (acc / wacc[:, :, None]).clip(0.0, 1.0).astype(np.float32)


def adaptive_gamma(mean_luminance: float, params: ApaParams) -> float:
    """Darkness-driven gamma: gamma_base - kappa*ln(mean + eps), clipped."""
    raw = params.gamma_base - params.kappa * math.log(mean_luminance + params.epsilon)
    return min(max(raw, params.gamma_min), params.gamma_max)


def gamma_lift(y: np.ndarray, gamma: float) -> np.ndarray:
    """Brighten a luma plane by Y^(1/gamma)."""
    plane = imgcore.ensure_image(y, 1)
    return np.clip(plane ** (1.0 / gamma), 0.0, 1.0).astype(np.float32)


def clahe(y: np.ndarray, clip_limit: float, tiles: int, bins: int = 256) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization on a [0, 1] plane.

    Per-tile histograms are clipped at clip_limit times the uniform bin
    height with the excess redistributed uniformly (one pass); per-tile
    equalization maps use the mid-bin CDF convention and are blended by
    bilinear interpolation between tile centers.
    """
    plane = imgcore.ensure_image(y, 1)
    h, w = plane.shape
    tiles = max(1, min(tiles, h, w))
    idx = np.minimum((plane * bins).astype(np.int64), bins - 1)

    ys = [round(i * h / tiles) for i in range(tiles + 1)]
    xs = [round(i * w / tiles) for i in range(tiles + 1)]
    maps = np.empty((tiles, tiles, bins))
    for ti in range(tiles):
        for tj in range(tiles):
            block = idx[ys[ti] : ys[ti + 1], xs[tj] : xs[tj + 1]]
            count = block.size
            hist = np.bincount(block.ravel(), minlength=bins).astype(np.float64)
            if math.isfinite(clip_limit):
                ceiling = clip_limit * count / bins
                excess = np.maximum(hist - ceiling, 0.0).sum()
                hist = np.minimum(hist, ceiling) + excess / bins
            cdf = np.cumsum(hist)
            maps[ti, tj] = (cdf - hist / 2.0) / count

    cy = np.array([(ys[i] + ys[i + 1]) / 2.0 for i in range(tiles)])
    cx = np.array([(xs[j] + xs[j + 1]) / 2.0 for j in range(tiles)])

    def axis_blend(coords: np.ndarray, centers: np.ndarray):
        j = np.searchsorted(centers, coords)
        lo = np.clip(j - 1, 0, len(centers) - 1)
        hi = np.clip(j, 0, len(centers) - 1)
        span = centers[hi] - centers[lo]
        frac = np.where(span > 0.0, (coords - centers[lo]) / np.where(span > 0.0, span, 1.0), 0.0)
        return lo, hi, np.clip(frac, 0.0, 1.0)

    ylo, yhi, fy = axis_blend(np.arange(h) + 0.5, cy)
    xlo, xhi, fx = axis_blend(np.arange(w) + 0.5, cx)

    v00 = maps[ylo[:, None], xlo[None, :], idx]
    v01 = maps[ylo[:, None], xhi[None, :], idx]
    v10 = maps[yhi[:, None], xlo[None, :], idx]
    v11 = maps[yhi[:, None], xhi[None, :], idx]
    fy2 = fy[:, None]
    fx2 = fx[None, :]
    out = (
        (1.0 - fy2) * ((1.0 - fx2) * v00 + fx2 * v01)
        + fy2 * ((1.0 - fx2) * v10 + fx2 * v11)
    )
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def boost_luminance(y: np.ndarray, params: ApaParams) -> np.ndarray:
    """Adaptive gamma lift of a luma plane, then CLAHE (when enabled)."""
    plane = imgcore.ensure_image(y, 1)
    gamma = adaptive_gamma(float(plane.mean()), params)
    lifted = gamma_lift(plane, gamma)
    if params.clahe_enabled:
        lifted = clahe(lifted, params.clahe_clip, params.clahe_tiles)
    return lifted


def red_cast_correct(img: np.ndarray, params: ApaParams) -> np.ndarray:
    """Scale the Lab a-channel away from neutral: a' = (a-0.5)*beta_red + 0.5."""
    lab = imgcore.to_lab(img).astype(np.float64)
    lab[:, :, 1] = np.clip((lab[:, :, 1] - 0.5) * params.beta_red + 0.5, 0.0, 1.0)
    return imgcore.from_lab(lab)


def saturation_highlight_adjust(img: np.ndarray, params: ApaParams) -> np.ndarray:
    """HSV shaping: S' = clip(S*beta_sat), V' = clip(V*eta_supp); H untouched."""
    hsv = imgcore.to_hsv(img).astype(np.float64)
    hsv[:, :, 1] = np.clip(hsv[:, :, 1] * params.beta_sat, 0.0, 1.0)
    hsv[:, :, 2] = np.clip(hsv[:, :, 2] * params.eta_supp, 0.0, 1.0)
    return imgcore.from_hsv(hsv)


def apa_transform(img: np.ndarray, params: ApaParams) -> np.ndarray:
    """Full augmentation: denoise, luma boost in YCrCb, cast and HSV shaping."""
    smooth = bilateral_denoise(img, params)
    ycc = imgcore.to_ycrcb(smooth).astype(np.float64)
    ycc[:, :, 0] = boost_luminance(ycc[:, :, 0], params)
    merged = imgcore.from_ycrcb(ycc)
    corrected = red_cast_correct(merged, params)
    return saturation_highlight_adjust(corrected, params)
