"""Image substrate: color transforms, patch grids, Hann blending, raster I/O.

Images are plain numpy arrays. The package-wide currency is float32 in
[0, 1], shape (H, W, 3) for color and (H, W) for single-channel planes.
Public operations clamp their output into [0, 1] on write. Color
conventions: BT.601 full-range YCrCb, CIE L*a*b* under D65 with L = L*/100
and a/b offset so the neutral axis sits at 0.5, hexcone HSV with H in
[0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

# sRGB -> XYZ (D65). Row sums equal the white point, so neutral grays map
# to a* = b* = 0 exactly.
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ2RGB = np.linalg.inv(_RGB2XYZ)
_WHITE_D65 = _RGB2XYZ.sum(axis=1)

# BT.601 full-range luma/chroma constants.
_YR, _YG, _YB = 0.299, 0.587, 0.114
_CR_SCALE = 0.713
_CB_SCALE = 0.564

HANN_FLOOR = 1e-3


def ensure_image(img: np.ndarray, channels: int = 3) -> np.ndarray:
    """Validate an image array and return it as float64 for internal math."""
    arr = np.asarray(img)
    if channels == 1:
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise ValueError(f"expected a single-channel image, got shape {arr.shape}")
    else:
        if arr.ndim != 3 or arr.shape[2] != channels:
            raise ValueError(f"expected an image with {channels} channels, got shape {arr.shape}")
    return arr.astype(np.float64)


def _finish(arr: np.ndarray) -> np.ndarray:
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


# ---------------------------------------------------------------------------
# color transforms


def to_ycrcb(img: np.ndarray) -> np.ndarray:
    """RGB -> YCrCb (BT.601 full range, chroma centered at 0.5)."""
    rgb = ensure_image(img, 3)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = _YR * r + _YG * g + _YB * b
    cr = (r - y) * _CR_SCALE + 0.5
    cb = (b - y) * _CB_SCALE + 0.5
    return _finish(np.stack([y, cr, cb], axis=-1))


def from_ycrcb(img: np.ndarray) -> np.ndarray:
    """Exact algebraic inverse of to_ycrcb."""
    ycc = ensure_image(img, 3)
    y, cr, cb = ycc[:, :, 0], ycc[:, :, 1], ycc[:, :, 2]
    r = y + (cr - 0.5) / _CR_SCALE
    b = y + (cb - 0.5) / _CB_SCALE
    g = (y - _YR * r - _YB * b) / _YG
    return _finish(np.stack([r, g, b], axis=-1))


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d**3, np.cbrt(t), t / (3.0 * d * d) + 4.0 / 29.0)


def _lab_finv(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d, t**3, 3.0 * d * d * (t - 4.0 / 29.0))


def to_lab(img: np.ndarray) -> np.ndarray:
    """sRGB -> CIE L*a*b* (D65), encoded so L = L*/100 and neutral a = b = 0.5."""
    rgb = ensure_image(img, 3)
    lin = _srgb_to_linear(rgb)
    xyz = lin @ _RGB2XYZ.T
    fx, fy, fz = (_lab_f(xyz[:, :, i] / _WHITE_D65[i]) for i in range(3))
    lstar = 116.0 * fy - 16.0
    astar = 500.0 * (fx - fy)
    bstar = 200.0 * (fy - fz)
    out = np.stack([lstar / 100.0, astar / 255.0 + 0.5, bstar / 255.0 + 0.5], axis=-1)
    return _finish(out)


def from_lab(img: np.ndarray) -> np.ndarray:
    """Inverse of to_lab; out-of-gamut results are clamped."""
    lab = ensure_image(img, 3)
    lstar = lab[:, :, 0] * 100.0
    astar = (lab[:, :, 1] - 0.5) * 255.0
    bstar = (lab[:, :, 2] - 0.5) * 255.0
    fy = (lstar + 16.0) / 116.0
    fx = fy + astar / 500.0
    fz = fy - bstar / 200.0
    xyz = np.stack([_lab_finv(fx), _lab_finv(fy), _lab_finv(fz)], axis=-1) * _WHITE_D65
    lin = xyz @ _XYZ2RGB.T
    return _finish(_linear_to_srgb(lin))


def to_hsv(img: np.ndarray) -> np.ndarray:
    """RGB -> hexcone HSV with H in [0, 1)."""
    rgb = ensure_image(img, 3)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    v = rgb.max(axis=2)
    c = v - rgb.min(axis=2)
    safe_c = np.where(c == 0.0, 1.0, c)
    h = np.select(
        [c == 0.0, v == r, v == g],
        [0.0, np.mod((g - b) / safe_c, 6.0), (b - r) / safe_c + 2.0],
        default=(r - g) / safe_c + 4.0,
    ) / 6.0
    s = np.where(v == 0.0, 0.0, c / np.where(v == 0.0, 1.0, v))
    # H is cyclic: 1.0 wraps to 0 rather than being clamped.
    h = np.mod(h, 1.0)
    return np.stack([h, s, v], axis=-1).astype(np.float32)


def from_hsv(img: np.ndarray) -> np.ndarray:
    """Inverse hexcone transform."""
    hsv = ensure_image(img, 3)
    h = np.mod(hsv[:, :, 0], 1.0) * 6.0
    s = np.clip(hsv[:, :, 1], 0.0, 1.0)
    v = np.clip(hsv[:, :, 2], 0.0, 1.0)
    c = v * s
    x = c * (1.0 - np.abs(np.mod(h, 2.0) - 1.0))
    m = v - c
    k = np.floor(h).astype(int) % 6
    zeros = np.zeros_like(c)
    r = np.choose(k, [c, x, zeros, zeros, x, c])
    g = np.choose(k, [x, c, c, x, zeros, zeros])
    b = np.choose(k, [zeros, zeros, x, c, c, x])
    return _finish(np.stack([r + m, g + m, b + m], axis=-1))


# ---------------------------------------------------------------------------
# patch grids and blending


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    overlap: int
    origins: tuple  # ((x, y), ...) row-major

    def __len__(self) -> int:
        return len(self.origins)


def plan_patches(w: int, h: int, patch_size: int, overlap: int) -> PatchGrid:
    """Plan a covering grid of square patches.

    Origins step by stride = patch_size - overlap; the final origin on each
    axis is clamped inward so patches are never padded. Images smaller than
    patch_size on either side degrade to patches of min(w, h, patch_size).
    """
    if w <= 0 or h <= 0:
        raise ValueError("image dimensions must be positive")
    if overlap < 0:
        raise ValueError("overlap must be >= 0")
    patch = min(patch_size, w, h)
    ov = min(overlap, patch - 1) if patch > 1 else 0
    stride = patch - ov

    def axis_origins(extent: int) -> list:
        last = extent - patch
        pos = list(range(0, last + 1, stride))
        if pos[-1] != last:
            pos.append(last)
        return pos

    xs = axis_origins(w)
    ys = axis_origins(h)
    origins = tuple((x, y) for y in ys for x in xs)
    return PatchGrid(patch_size=patch, overlap=ov, origins=origins)


def hann_window(patch_size: int, floor: float = HANN_FLOOR) -> np.ndarray:
    """Separable 2-D Hann weight, floored so border pixels keep contribution."""
    if patch_size == 1:
        return np.ones((1, 1))
    n = np.arange(patch_size)
    w1 = 0.5 - 0.5 * np.cos(2.0 * math.pi * n / (patch_size - 1))
    w2 = np.outer(w1, w1)
    return np.maximum(w2, floor)


def blend_patches(patches, w: int, h: int) -> np.ndarray:
    """Stitch (origin, patch) pairs into an (h, w, C) image.

    Each patch is weighted by the floored Hann window and the accumulated
    sum is normalized per pixel, so identical overlapping content is
    reproduced exactly (partition of unity after normalization).

    Args:
        patches: iterable of ((x, y), array) with equal square patch shapes.
        w, h: output dimensions.

    Raises:
        ValueError: a pixel is covered by no patch (invalid grid).
    """
    patches = list(patches)
    if not patches:
        raise ValueError("no patches to blend")
    first = np.asarray(patches[0][1])
    ps = first.shape[0]
    channels = first.shape[2] if first.ndim == 3 else 1
    win = hann_window(ps)
    acc = np.zeros((h, w, channels))
    wacc = np.zeros((h, w))
    for (x, y), patch in patches:
        arr = np.asarray(patch, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.shape[0] != ps or arr.shape[1] != ps:
            raise ValueError("all patches must share one square size")
        acc[y : y + ps, x : x + ps] += win[:, :, None] * arr
        wacc[y : y + ps, x : x + ps] += win
    if np.any(wacc == 0.0):
        raise ValueError("patch grid leaves pixels uncovered")
    out = acc / wacc[:, :, None]
    if first.ndim == 2:
        out = out[:, :, 0]
    return _finish(out)


# ---------------------------------------------------------------------------
# raster I/O


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG/JPEG as float32 RGB in [0, 1]."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except Exception as exc:
        raise IOError(f"cannot read image '{path}': {exc}") from exc
    return arr


def save_image(path, img: np.ndarray) -> None:
    """Write a [0, 1] float image as an 8-bit PNG/JPEG."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None].repeat(3, axis=2)
    data = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(data, mode="RGB").save(path)
    except Exception as exc:
        raise IOError(f"cannot write image '{path}': {exc}") from exc
