"""Zero-reference loss suite with analytic gradients.

Four non-reference objectives score an enhanced image without ground
truth: a luminance interval penalty pulling local patch means into a
target band, spatial consistency against the raw input, gray-world color
constancy, and total-variation smoothness of the enhancement map. Every
loss returns (value, exact analytic gradient); total_loss backpropagates
through the full curve recursion and every network layer. All math runs
in float64 so the gradients can be validated against central finite
differences at tight tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curve as curvemod
from . import imgcore

SPA_POOL = 4

# BT.601 luma weights, config-selectable alternative to the channel mean.
_BT601 = np.array([0.299, 0.587, 0.114])
_MEAN = np.array([1.0, 1.0, 1.0]) / 3.0


@dataclass
class LintParams:
    patch: int = 16
    e_dark: float = 0.5
    e_bright: float = 0.6
    e_global: float = 0.6
    gamma_global: float = 0.4

    def __post_init__(self) -> None:
        if not 0.0 <= self.e_dark <= self.e_bright <= 1.0:
            raise ValueError("targets must satisfy 0 <= e_dark <= e_bright <= 1")
        if self.gamma_global < 0.0:
            raise ValueError("gamma_global must be >= 0")
        if self.patch < 1:
            raise ValueError("patch must be >= 1")


@dataclass
class LossConfig:
    lambda_tv: float = 100.0
    lambda_spa: float = 4.0
    lambda_col: float = 20.0
    lambda_int: float = 200.0
    lint: LintParams = field(default_factory=LintParams)
    luminance: str = "mean"  # "mean" or "bt601"

    def __post_init__(self) -> None:
        if min(self.lambda_tv, self.lambda_spa, self.lambda_col, self.lambda_int) < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.luminance not in ("mean", "bt601"):
            raise ValueError(f"unknown luminance mode '{self.luminance}'")


@dataclass
class LossBreakdown:
    """Unweighted component values plus the weighted total."""

    total: float
    int_dark: float
    int_bright: float
    int_global: float
    spa: float
    col: float
    tv: float

    FIELDS = ("total", "int_dark", "int_bright", "int_global", "spa", "col", "tv")

    def recombined(self, cfg: LossConfig) -> float:
        lint = cfg.lambda_int * (
            self.int_dark + self.int_bright + cfg.lint.gamma_global * self.int_global
        )
        return lint + cfg.lambda_spa * self.spa + cfg.lambda_col * self.col + cfg.lambda_tv * self.tv


def _lum_weights(mode: str) -> np.ndarray:
    return _BT601 if mode == "bt601" else _MEAN


def luminance(img: np.ndarray, mode: str = "mean") -> np.ndarray:
    """Per-pixel luminance plane; default is the unweighted channel mean."""
    rgb = imgcore.ensure_image(img, 3)
    return rgb @ _lum_weights(mode)


def _patch_edges(extent: int, patch: int):
    starts = np.arange(0, extent, patch)
    lengths = np.minimum(starts + patch, extent) - starts
    return starts, lengths


def _l_int_parts(img_enh: np.ndarray, p: LintParams, mode: str = "mean"):
    """(dark, bright, global) component values and combined gradient."""
    rgb = imgcore.ensure_image(img_enh, 3)
    h, w = rgb.shape[:2]
    wts = _lum_weights(mode)
    y = rgb @ wts

    rs, rlen = _patch_edges(h, p.patch)
    cs, clen = _patch_edges(w, p.patch)
    sums = np.add.reduceat(np.add.reduceat(y, rs, axis=0), cs, axis=1)
    counts = np.outer(rlen, clen).astype(np.float64)
    means = sums / counts
    n_patches = means.size

    dark = np.maximum(p.e_dark - means, 0.0)
    bright = np.maximum(means - p.e_bright, 0.0)
    ybar = y.mean()
    v_dark = float(np.mean(dark**2))
    v_bright = float(np.mean(bright**2))
    v_global = float((ybar - p.e_global) ** 2)

    # d(value)/d(mean_i), then spread uniformly over each patch's pixels.
    dmean = (2.0 / n_patches) * (bright - dark)
    dy = np.repeat(np.repeat(dmean / counts, rlen, axis=0), clen, axis=1)
    dy += p.gamma_global * 2.0 * (ybar - p.e_global) / (h * w)
    grad = dy[:, :, None] * wts
    return v_dark, v_bright, v_global, grad


def l_int(img_enh: np.ndarray, p: LintParams, mode: str = "mean"):
    """Luminance interval loss: squared hinges on patch means plus a
    weighted global-mean term. Returns (value, gradient w.r.t. img_enh)."""
    v_dark, v_bright, v_global, grad = _l_int_parts(img_enh, p, mode)
    return v_dark + v_bright + p.gamma_global * v_global, grad


def _pool_mean(y: np.ndarray, pool: int) -> np.ndarray:
    h, w = y.shape
    rh, rw = h // pool, w // pool
    return y[: rh * pool, : rw * pool].reshape(rh, pool, rw, pool).mean(axis=(1, 3))


def l_spa(img_enh: np.ndarray, img_in: np.ndarray, mode: str = "mean"):
    """Spatial consistency on 4x4-pooled luminance: neighbor-difference
    magnitudes of the enhanced image should match the input's."""
    enh = imgcore.ensure_image(img_enh, 3)
    ref = imgcore.ensure_image(img_in, 3)
    if enh.shape != ref.shape:
        raise ValueError(f"shape mismatch {enh.shape} vs {ref.shape}")
    wts = _lum_weights(mode)
    ye = enh @ wts
    yi = ref @ wts
    pe = _pool_mean(ye, SPA_POOL)
    pi = _pool_mean(yi, SPA_POOL)
    rh, rw = pe.shape

    n_h = rh * max(rw - 1, 0)
    n_v = max(rh - 1, 0) * rw
    n_total = n_h + n_v
    if n_total == 0:
        return 0.0, np.zeros_like(enh)

    dh_e = pe[:, 1:] - pe[:, :-1]
    dv_e = pe[1:, :] - pe[:-1, :]
    dh_i = pi[:, 1:] - pi[:, :-1]
    dv_i = pi[1:, :] - pi[:-1, :]

    rh_term = np.abs(dh_e) - np.abs(dh_i)
    rv_term = np.abs(dv_e) - np.abs(dv_i)
    value = float((np.sum(rh_term**2) + np.sum(rv_term**2)) / n_total)

    dpe = np.zeros_like(pe)
    gh = 2.0 * rh_term * np.sign(dh_e) / n_total
    gv = 2.0 * rv_term * np.sign(dv_e) / n_total
    dpe[:, 1:] += gh
    dpe[:, :-1] -= gh
    dpe[1:, :] += gv
    dpe[:-1, :] -= gv

    # Undo the pooling (each pooled cell is a mean of pool^2 pixels).
    dy = np.zeros_like(ye)
    expanded = np.kron(dpe, np.ones((SPA_POOL, SPA_POOL))) / (SPA_POOL * SPA_POOL)
    dy[: rh * SPA_POOL, : rw * SPA_POOL] = expanded
    return value, dy[:, :, None] * wts


def l_col(img_enh: np.ndarray):
    """Gray-world color constancy: squared differences of channel means."""
    rgb = imgcore.ensure_image(img_enh, 3)
    h, w = rgb.shape[:2]
    m = rgb.mean(axis=(0, 1))
    value = float((m[0] - m[1]) ** 2 + (m[0] - m[2]) ** 2 + (m[1] - m[2]) ** 2)
    dm = np.array(
        [
            2.0 * (m[0] - m[1]) + 2.0 * (m[0] - m[2]),
            -2.0 * (m[0] - m[1]) + 2.0 * (m[1] - m[2]),
            -2.0 * (m[0] - m[2]) - 2.0 * (m[1] - m[2]),
        ]
    )
    grad = np.broadcast_to(dm / (h * w), rgb.shape).copy()
    return value, grad


def l_tv(amap: np.ndarray):
    """Smoothness of the enhancement map: mean squared forward differences,
    averaged over channels."""
    a = np.asarray(amap, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    h, w, c = a.shape
    dh = a[:, 1:, :] - a[:, :-1, :]
    dv = a[1:, :, :] - a[:-1, :, :]
    n_h = h * (w - 1)
    n_v = (h - 1) * w
    v_h = float(np.sum(dh**2) / (n_h * c)) if n_h > 0 else 0.0
    v_v = float(np.sum(dv**2) / (n_v * c)) if n_v > 0 else 0.0

    grad = np.zeros_like(a)
    if n_h > 0:
        gh = 2.0 * dh / (n_h * c)
        grad[:, 1:, :] += gh
        grad[:, :-1, :] -= gh
    if n_v > 0:
        gv = 2.0 * dv / (n_v * c)
        grad[1:, :, :] += gv
        grad[:-1, :, :] -= gv
    if np.asarray(amap).ndim == 2:
        grad = grad[:, :, 0]
    return v_h + v_v, grad


def total_loss(
    img_in: np.ndarray,
    img_aug: np.ndarray,
    net: curvemod.CurveNet,
    cfg: LossConfig,
    n: int | None = None,
):
    """Weighted zero-reference objective and its parameter gradients.

    The network consumes the augmented image, the curve is applied to the
    augmented image, and the spatial term compares against the raw input.
    Gradients are backpropagated exactly through all n curve iterations
    and every layer; returns (LossBreakdown, gradient list matching
    net.parameters()).
    """
    n = net.iterations if n is None else n
    aug = imgcore.ensure_image(img_aug, 3)
    raw = imgcore.ensure_image(img_in, 3)

    amap, feats, caches = curvemod._forward_cached(net, aug)
    xs = curvemod._apply_curve_cached(aug, amap, n)
    enh = xs[-1]

    v_dark, v_bright, v_global, g_int = _l_int_parts(enh, cfg.lint, cfg.luminance)
    v_spa, g_spa = l_spa(enh, raw, cfg.luminance)
    v_col, g_col = l_col(enh)
    v_tv, g_tv = l_tv(amap)

    total = (
        cfg.lambda_int * (v_dark + v_bright + cfg.lint.gamma_global * v_global)
        + cfg.lambda_spa * v_spa
        + cfg.lambda_col * v_col
        + cfg.lambda_tv * v_tv
    )

    d_enh = cfg.lambda_int * g_int + cfg.lambda_spa * g_spa + cfg.lambda_col * g_col
    _, d_amap = curvemod._curve_backward(xs, amap, d_enh)
    d_amap = d_amap + cfg.lambda_tv * g_tv
    grads = curvemod._backward(net, feats, caches, d_amap)

    breakdown = LossBreakdown(
        total=float(total),
        int_dark=v_dark,
        int_bright=v_bright,
        int_global=v_global,
        spa=v_spa,
        col=v_col,
        tv=v_tv,
    )
    return breakdown, grads
