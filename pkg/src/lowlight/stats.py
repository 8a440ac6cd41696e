"""Dataset-level image statistics, split planning, and manifests."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imgcore

HIST_BINS = 50
MIN_SPLIT_IMAGES = 10
SPLIT_SECTIONS = ("train", "val", "test")

_LAPLACIAN_CENTER = -4.0


@dataclass(frozen=True)
class ImageStats:
    mean_luminance: float
    contrast: float
    entropy: float
    sharpness: float
    mean_lab: tuple

    def as_row(self) -> dict:
        return {
            "mean_luminance": self.mean_luminance,
            "contrast": self.contrast,
            "entropy": self.entropy,
            "sharpness": self.sharpness,
            "mean_l": self.mean_lab[0],
            "mean_a": self.mean_lab[1],
            "mean_b": self.mean_lab[2],
        }


def _grayscale(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    return arr.mean(axis=2)


def shannon_entropy(gray: np.ndarray) -> float:
    """Entropy in bits of the 256-level quantization of a [0, 1] image."""
    levels = np.clip(np.floor(gray * 256.0), 0, 255).astype(np.intp)
    counts = np.bincount(levels.ravel(), minlength=256)
    p = counts[counts > 0] / levels.size
    return float(-(p * np.log2(p)).sum())


def laplacian_sharpness(gray: np.ndarray) -> float:
    """Variance of the 3x3 Laplacian over the valid interior region."""
    h, w = gray.shape
    if h < 3 or w < 3:
        return 0.0
    core = gray[1:-1, 1:-1]
    resp = (
        _LAPLACIAN_CENTER * core
        + gray[:-2, 1:-1]
        + gray[2:, 1:-1]
        + gray[1:-1, :-2]
        + gray[1:-1, 2:]
    )
    return float(np.var(resp))


def compute_stats(img: np.ndarray) -> ImageStats:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    gray = _grayscale(arr)
    lab = imgcore.to_lab(arr).astype(np.float64)
    return ImageStats(
        mean_luminance=float(gray.mean()),
        contrast=float(gray.std()),
        entropy=shannon_entropy(gray),
        sharpness=laplacian_sharpness(gray),
        mean_lab=tuple(float(v) for v in lab.mean(axis=(0, 1))),
    )


HIST_METRICS = ("mean_luminance", "contrast", "entropy", "sharpness")


def _hist_range(metric: str, values) -> tuple:
    if metric == "mean_luminance":
        return (0.0, 1.0)
    if metric == "contrast":
        return (0.0, 0.5)
    if metric == "entropy":
        return (0.0, 8.0)
    top = max(values) if values else 0.0
    return (0.0, top if top > 0 else 1.0)


def dataset_report(directory) -> tuple:
    """Per-image stats rows plus per-metric histograms for a directory."""
    root = Path(directory)
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise ValueError(f"no images found in '{directory}'")
    rows = []
    for path in files:
        st = compute_stats(imgcore.load_image(path))
        row = {"filename": path.name}
        row.update(st.as_row())
        rows.append(row)
    hists = {}
    for metric in HIST_METRICS:
        values = [row[metric] for row in rows]
        lo, hi = _hist_range(metric, values)
        counts, edges = np.histogram(values, bins=HIST_BINS, range=(lo, hi))
        hists[metric] = (counts, edges)
    return rows, hists


STATS_COLUMNS = (
    "filename",
    "mean_luminance",
    "contrast",
    "entropy",
    "sharpness",
    "mean_l",
    "mean_a",
    "mean_b",
)


def write_stats_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STATS_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key, val in out.items():
                if isinstance(val, float):
                    out[key] = f"{val:.8g}"
            writer.writerow(out)


def write_hist_csv(hists, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "bin_left", "bin_right", "count"])
        for metric, (counts, edges) in hists.items():
            for i, count in enumerate(counts):
                writer.writerow([metric, f"{edges[i]:.8g}", f"{edges[i + 1]:.8g}", int(count)])


def make_splits(directory, ratios=(8, 1, 1), seed: int = 2025) -> dict:
    """Deterministic train/val/test partition of an image directory.

    Ratios may be on any positive scale; counts are floor(train), floor(val)
    with the remainder going to test, so every file lands in exactly one
    split.
    """
    root = Path(directory)
    files = sorted(p.name for p in root.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if len(files) < MIN_SPLIT_IMAGES:
        raise ValueError(
            f"need at least {MIN_SPLIT_IMAGES} images to split, found {len(files)} in '{directory}'"
        )
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) <= 0:
        raise ValueError(f"ratios must be three non-negative numbers, got {ratios!r}")
    total = float(sum(ratios))
    rng = np.random.default_rng(seed)
    order = [files[i] for i in rng.permutation(len(files))]
    n = len(order)
    n_train = math.floor(ratios[0] / total * n)
    n_val = math.floor(ratios[1] / total * n)
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train : n_train + n_val]),
        "test": sorted(order[n_train + n_val :]),
    }


def write_manifest(splits: dict, path) -> None:
    lines = []
    for section in SPLIT_SECTIONS:
        lines.append(f"[{section}]")
        lines.extend(splits.get(section, ()))
        lines.append("")
    Path(path).write_text("\n".join(lines))


def read_manifest(path) -> dict:
    splits = {name: [] for name in SPLIT_SECTIONS}
    current = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1]
            if name not in splits:
                raise ValueError(f"{path}:{lineno}: unknown manifest section '{name}'")
            current = name
            continue
        if current is None:
            raise ValueError(f"{path}:{lineno}: file entry before any [section] header")
        splits[current].append(line)
    return splits
