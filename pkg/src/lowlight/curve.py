"""Curve-estimation network and iterative curve application.

A seven-layer stack of depthwise-separable 3x3 convolutions (width 8, no
resampling anywhere) with U-shaped skip concatenations emits a per-pixel,
per-channel enhancement map in (-1, 1); the map drives the iterated
quadratic curve x <- x + A*x*(1-x) that lifts or darkens each pixel.
Forward and backward passes are written out explicitly in numpy so the
training gradients stay analytically exact and independently checkable.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from . import imgcore

MAGIC = b"LCRV"
FORMAT_VERSION = 1
DEFAULT_ITERATIONS = 8
DEFAULT_WIDTH = 8
INIT_SIGMA = 0.02


def _layer_plan(width: int):
    # Last three layers consume U-shape concatenations of symmetric features.
    return [
        (3, width),
        (width, width),
        (width, width),
        (width, width),
        (2 * width, width),
        (2 * width, width),
        (2 * width, 3),
    ]


class CurveNet:
    """Parameter container plus explicit forward/backward passes.

    Layers hold (dw_weight (C,3,3), dw_bias (C,), pw_weight (C,Cout),
    pw_bias (Cout,)) in float64. A fresh net is zero-initialized (identity
    enhancement); call init_weights() for the Gaussian training init.
    """

    def __init__(self, width: int = DEFAULT_WIDTH, iterations: int = DEFAULT_ITERATIONS):
        if width < 1 or iterations < 1:
            raise ValueError("width and iterations must be >= 1")
        self.width = width
        self.iterations = iterations
        self.layers = []
        for cin, cout in _layer_plan(width):
            self.layers.append(
                [
                    np.zeros((cin, 3, 3)),
                    np.zeros(cin),
                    np.zeros((cin, cout)),
                    np.zeros(cout),
                ]
            )

    def init_weights(self, seed: int) -> "CurveNet":
        """Zero-mean Gaussian weights (sigma 0.02), zero biases, seeded."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer[0][:] = rng.normal(0.0, INIT_SIGMA, layer[0].shape)
            layer[1][:] = 0.0
            layer[2][:] = rng.normal(0.0, INIT_SIGMA, layer[2].shape)
            layer[3][:] = 0.0
        return self

    def parameters(self):
        """Flat list of parameter arrays in checkpoint order (live views)."""
        return [arr for layer in self.layers for arr in layer]

    def param_count(self) -> int:
        return sum(int(p.size) for p in self.parameters())

    def flops_per_pixel(self) -> int:
        """Analytic conv MACs per pixel (the published counting convention)."""
        return sum(cin * 9 + cin * cout for cin, cout in _layer_plan(self.width))


def _dw_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    h, w = x.shape[:2]
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    out = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            out += xp[i : i + h, j : j + w] * weight[:, i, j]
    return out + bias


def _dw_backward(x: np.ndarray, weight: np.ndarray, dout: np.ndarray):
    h, w = x.shape[:2]
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    dxp = np.zeros_like(xp)
    dweight = np.zeros_like(weight)
    for i in range(3):
        for j in range(3):
            dweight[:, i, j] = np.einsum("ijc,ijc->c", xp[i : i + h, j : j + w], dout)
            dxp[i : i + h, j : j + w] += dout * weight[:, i, j]
    dbias = dout.sum(axis=(0, 1))
    return dxp[1 : 1 + h, 1 : 1 + w], dweight, dbias


def _forward_cached(net: CurveNet, img: np.ndarray):
    x = imgcore.ensure_image(img, 3)
    feats = []
    caches = []
    h = x
    for li, layer in enumerate(net.layers):
        if li == 4:
            h = np.concatenate([feats[3], feats[2]], axis=2)
        elif li == 5:
            h = np.concatenate([feats[4], feats[1]], axis=2)
        elif li == 6:
            h = np.concatenate([feats[5], feats[0]], axis=2)
        elif li > 0:
            h = feats[li - 1]
        t = _dw_forward(h, layer[0], layer[1])
        z = t @ layer[2] + layer[3]
        out = np.tanh(z) if li == 6 else np.maximum(z, 0.0)
        caches.append((h, t, z))
        feats.append(out)
    return feats[6], feats, caches


def forward(net: CurveNet, img: np.ndarray) -> np.ndarray:
    """Run the network; returns the (H, W, 3) enhancement map in (-1, 1)."""
    amap, _, _ = _forward_cached(net, img)
    return amap


def _backward(net: CurveNet, feats, caches, damap: np.ndarray):
    """Backpropagate d(loss)/d(map) to parameter gradients (same layout)."""
    c = net.width
    grads = [[np.zeros_like(arr) for arr in layer] for layer in net.layers]
    dfeats = [np.zeros_like(f) for f in feats]
    dfeats[6] = damap

    def layer_backward(li: int, dout: np.ndarray) -> np.ndarray:
        hin, t, z = caches[li]
        if li == 6:
            dz = dout * (1.0 - np.tanh(z) ** 2)
        else:
            dz = dout * (z > 0.0)
        layer = net.layers[li]
        grads[li][2] += np.einsum("ijc,ijd->cd", t, dz)
        grads[li][3] += dz.sum(axis=(0, 1))
        dt = dz @ layer[2].T
        dh, dw_w, dw_b = _dw_backward(hin, layer[0], dt)
        grads[li][0] += dw_w
        grads[li][1] += dw_b
        return dh

    d_in = layer_backward(6, dfeats[6])
    dfeats[5] += d_in[:, :, :c]
    dfeats[0] += d_in[:, :, c:]
    d_in = layer_backward(5, dfeats[5])
    dfeats[4] += d_in[:, :, :c]
    dfeats[1] += d_in[:, :, c:]
    d_in = layer_backward(4, dfeats[4])
    dfeats[3] += d_in[:, :, :c]
    dfeats[2] += d_in[:, :, c:]
    for li in (3, 2, 1):
        dfeats[li - 1] += layer_backward(li, dfeats[li])
    layer_backward(0, dfeats[0])
    return [g for layer in grads for g in layer]


# ---------------------------------------------------------------------------
# curve application


def apply_curve(img: np.ndarray, amap: np.ndarray, n: int, clamp: bool = True) -> np.ndarray:
    """Iterate x <- x + A*x*(1-x) for n steps.

    For |A| < 1 the iterate stays inside [0, 1] on its own; the final clamp
    is a numerical guard only.
    """
    x = np.asarray(img, dtype=np.float64)
    a = np.asarray(amap, dtype=np.float64)
    if x.shape != a.shape:
        raise ValueError(f"image shape {x.shape} != map shape {a.shape}")
    if n < 1:
        raise ValueError("iteration count must be >= 1")
    for _ in range(n):
        x = x + a * x * (1.0 - x)
    return np.clip(x, 0.0, 1.0) if clamp else x


def _apply_curve_cached(img: np.ndarray, amap: np.ndarray, n: int):
    xs = [np.asarray(img, dtype=np.float64)]
    for _ in range(n):
        x = xs[-1]
        xs.append(x + amap * x * (1.0 - x))
    return xs


def _curve_backward(xs, amap: np.ndarray, dxn: np.ndarray):
    """Unrolled-exact gradients of the curve recursion.

    Returns (d/d(x0), d/d(A)) given d(loss)/d(x_n) and the cached iterates.
    """
    g = dxn
    da = np.zeros_like(amap)
    for x_prev in reversed(xs[:-1]):
        da += g * x_prev * (1.0 - x_prev)
        g = g * (1.0 + amap * (1.0 - 2.0 * x_prev))
    return g, da


def enhance(net: CurveNet, img: np.ndarray, n: int | None = None) -> np.ndarray:
    """Full-frame enhancement: apply_curve(img, forward(net, img), n)."""
    n = net.iterations if n is None else n
    return apply_curve(img, forward(net, img), n).astype(np.float32)


def enhance_tiled(
    net: CurveNet,
    img: np.ndarray,
    patch_size: int = 256,
    overlap: int = 64,
    n: int | None = None,
) -> np.ndarray:
    """Patch-based enhancement with Hann-window stitching.

    Images not exceeding the patch size run full-frame; larger images are
    processed on the clamped patch grid and blended.
    """
    arr = np.asarray(img)
    h, w = arr.shape[:2]
    if h <= patch_size and w <= patch_size:
        return enhance(net, arr, n)
    grid = imgcore.plan_patches(w, h, patch_size, overlap)
    ps = grid.patch_size
    patches = []
    for x, y in grid.origins:
        tile = arr[y : y + ps, x : x + ps]
        patches.append(((x, y), enhance(net, tile, n)))
    return imgcore.blend_patches(patches, w, h)


# ---------------------------------------------------------------------------
# checkpoint format: MAGIC | u32 version | u32 layers | u32 width | u32 n
# followed by the flat parameter tensors as little-endian float32.

_HEADER = struct.Struct("<4sIIII")


def save_checkpoint(net: CurveNet, path) -> None:
    """Write the weight file atomically (temp file + rename)."""
    blob = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, len(net.layers), net.width, net.iterations))
    for p in net.parameters():
        blob += np.ascontiguousarray(p, dtype="<f4").tobytes()
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> CurveNet:
    """Read a weight file back into a CurveNet (parameters become float64)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IOError(f"cannot read checkpoint '{path}': {exc}") from exc
    if len(blob) < _HEADER.size:
        raise ValueError(f"checkpoint '{path}' is truncated")
    magic, version, n_layers, width, iterations = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"'{path}' is not a curve-net checkpoint")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    net = CurveNet(width=width, iterations=iterations)
    if n_layers != len(net.layers):
        raise ValueError(f"unexpected layer count {n_layers}")
    offset = _HEADER.size
    for p in net.parameters():
        nbytes = p.size * 4
        if offset + nbytes > len(blob):
            raise ValueError(f"checkpoint '{path}' is truncated")
        tensor = np.frombuffer(blob, dtype="<f4", count=p.size, offset=offset)
        p[:] = tensor.reshape(p.shape)
        offset += nbytes
    if offset != len(blob):
        raise ValueError(f"checkpoint '{path}' has trailing bytes")
    return net


def checkpoint_descriptor(path) -> dict:
    """Header fields of a weight file, for `checkpoint-info`."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise ValueError(f"checkpoint '{path}' is truncated")
    magic, version, n_layers, width, iterations = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ValueError(f"'{path}' is not a curve-net checkpoint")
    net = CurveNet(width=width, iterations=iterations)
    return {
        "version": version,
        "layers": n_layers,
        "width": width,
        "iterations": iterations,
        "parameters": net.param_count(),
    }
