"""Desk-scale trainer: Adam with decoupled weight decay, linear warmup,
step decay, gradient accumulation, global-norm clipping, periodic
validation, and atomic best/last checkpointing. Fully deterministic under
a fixed seed; two runs with the same inputs produce bit-identical
checkpoints.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import curve as curvemod
from . import eei as eeimod
from . import imgcore, losses, stats

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

LOG_HEADER = ("step", "epoch", "lr") + losses.LossBreakdown.FIELDS


@dataclass
class TrainConfig:
    """Full training protocol by default; the CLI's default config swaps in
    the desk-scale profile (20 epochs, 256-pixel crops) instead."""

    epochs: int = 100
    base_lr: float = 1e-4
    warmup_epochs: int = 5
    decay_every: int = 50
    decay_factor: float = 0.5
    weight_decay: float = 1e-4
    micro_batch: int = 4
    accum_steps: int = 4
    clip_norm: float = 0.05
    patch: int = 2048
    seed: int = 2025
    validate_every: int = 5

    def __post_init__(self) -> None:
        if self.accum_steps < 1 or self.micro_batch < 1:
            raise ValueError("micro_batch and accum_steps must be >= 1")
        if self.clip_norm <= 0.0:
            raise ValueError("clip_norm must be positive")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("warmup_epochs must be < epochs")
        if self.decay_every < 1 or self.validate_every < 1:
            raise ValueError("decay_every and validate_every must be >= 1")


def desk_scale_config(**overrides) -> TrainConfig:
    """The quick profile shipped as the CLI default: small crops, few epochs."""
    base = dict(epochs=20, patch=256)
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Linear warmup, then stepwise decay every decay_every epochs."""
    if epoch < cfg.warmup_epochs:
        return cfg.base_lr * (epoch + 1) / cfg.warmup_epochs
    return cfg.base_lr * cfg.decay_factor ** ((epoch - cfg.warmup_epochs) // cfg.decay_every)


def clip_gradients(grads, max_norm: float):
    """Scale the whole gradient list so its global L2 norm is <= max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return [g * scale for g in grads]


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0) -> None:
    """One in-place update: decoupled decay, then bias-corrected Adam."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if weight_decay:
            p *= 1.0 - lr * weight_decay
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def _list_images(directory) -> list:
    root = Path(directory)
    return sorted(p.name for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _random_crop_coords(rng, h: int, w: int, patch: int):
    ch = min(patch, h)
    cw = min(patch, w)
    y0 = int(rng.integers(0, h - ch + 1))
    x0 = int(rng.integers(0, w - cw + 1))
    return y0, x0, ch, cw


def train(
    dataset_dir,
    apa_dir,
    cfg: TrainConfig,
    loss_cfg: losses.LossConfig,
    out_dir,
    width: int = curvemod.DEFAULT_WIDTH,
    iterations: int = curvemod.DEFAULT_ITERATIONS,
    val_dir=None,
    scores_file=None,
    calibration_file=None,
    log_fn=None,
) -> dict:
    """Run the optimization loop over paired raw/augmented directories.

    Crops are taken at identical coordinates from the raw image and its
    augmented counterpart; gradients from accum_steps micro-batches of
    micro_batch crops are averaged into one optimizer step. Writes
    last.ckpt, best.ckpt and train_log.csv into out_dir and returns their
    paths plus the validation rows.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = _list_images(dataset_dir)
    if not files:
        raise ValueError(f"no training images in '{dataset_dir}'")
    orphans = [f for f in files if not (Path(apa_dir) / f).exists()]
    if orphans:
        raise ValueError(f"missing augmented pair for: {', '.join(orphans)}")

    rng = np.random.default_rng(cfg.seed)
    net = curvemod.CurveNet(width=width, iterations=iterations).init_weights(cfg.seed)
    params = net.parameters()
    state = AdamState.for_params(params)

    raws = [imgcore.load_image(Path(dataset_dir) / f) for f in files]
    augs = [imgcore.load_image(Path(apa_dir) / f) for f in files]
    for f, a, b in zip(files, raws, augs):
        if a.shape != b.shape:
            raise ValueError(f"augmented pair shape mismatch for '{f}'")

    batch = cfg.micro_batch * cfg.accum_steps
    steps_per_epoch = max(1, len(files) // batch)
    log_path = out / "train_log.csv"
    best_path = out / "best.ckpt"
    last_path = out / "last.ckpt"
    val_rows = []
    best_metric = None
    global_step = 0

    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        for epoch in range(cfg.epochs):
            lr = lr_at(epoch, cfg)
            order = rng.permutation(len(files))
            ptr = 0
            epoch_total = 0.0
            for _ in range(steps_per_epoch):
                accum = [np.zeros_like(p) for p in params]
                sums = dict.fromkeys(losses.LossBreakdown.FIELDS, 0.0)
                for _ in range(cfg.accum_steps):
                    for _ in range(cfg.micro_batch):
                        idx = int(order[ptr % len(files)])
                        ptr += 1
                        raw, aug = raws[idx], augs[idx]
                        y0, x0, ch, cw = _random_crop_coords(rng, raw.shape[0], raw.shape[1], cfg.patch)
                        crop_raw = raw[y0 : y0 + ch, x0 : x0 + cw]
                        crop_aug = aug[y0 : y0 + ch, x0 : x0 + cw]
                        bd, grads = losses.total_loss(crop_raw, crop_aug, net, loss_cfg, iterations)
                        for g_acc, g in zip(accum, grads):
                            g_acc += g
                        for name in losses.LossBreakdown.FIELDS:
                            sums[name] += getattr(bd, name)
                for g_acc in accum:
                    g_acc /= batch
                clipped = clip_gradients(accum, cfg.clip_norm)
                adam_step(params, clipped, state, lr, cfg.weight_decay)
                global_step += 1
                row = [global_step, epoch, f"{lr:.8g}"] + [
                    f"{sums[name] / batch:.10g}" for name in losses.LossBreakdown.FIELDS
                ]
                writer.writerow(row)
                epoch_total += sums["total"] / batch
                if log_fn:
                    log_fn(step=global_step, epoch=epoch, lr=lr, total=sums["total"] / batch)

            due = (epoch + 1) % cfg.validate_every == 0 or epoch == cfg.epochs - 1
            if val_dir is not None and due:
                row = validate(
                    net,
                    val_dir,
                    scores_file=scores_file,
                    calibration_file=calibration_file,
                    loss_cfg=loss_cfg,
                )
                row["epoch"] = epoch
                val_rows.append(row)
                metric = row["eei"] if row.get("eei") is not None else row["val_loss"]
                if best_metric is None or metric < best_metric:
                    best_metric = metric
                    curvemod.save_checkpoint(net, best_path)
            elif val_dir is None:
                # No validation configured: rank by epoch-mean training loss.
                metric = epoch_total / steps_per_epoch
                if best_metric is None or metric < best_metric:
                    best_metric = metric
                    curvemod.save_checkpoint(net, best_path)

    curvemod.save_checkpoint(net, last_path)
    if not best_path.exists():
        curvemod.save_checkpoint(net, best_path)
    return {
        "best": best_path,
        "last": last_path,
        "log": log_path,
        "val_rows": val_rows,
        "net": net,
    }


def validate(
    checkpoint,
    val_dir,
    scores_file=None,
    calibration_file=None,
    loss_cfg: losses.LossConfig | None = None,
    patch: int = 256,
    overlap: int = 64,
) -> dict:
    """Score a checkpoint (path or live CurveNet) on a validation directory.

    Enhances every image with the tiled path, aggregates the stats-module
    metrics and the inference-mode zero-reference loss; when a scores file
    and a calibration are supplied, also computes an edge-efficiency index
    from the measured enhancement time and peak memory.
    """
    net = checkpoint
    if not isinstance(net, curvemod.CurveNet):
        net = curvemod.load_checkpoint(checkpoint)
    loss_cfg = loss_cfg or losses.LossConfig()
    files = _list_images(val_dir)
    if not files:
        raise ValueError(f"no validation images in '{val_dir}'")

    metric_sums = {"mean_luminance": 0.0, "contrast": 0.0, "entropy": 0.0, "sharpness": 0.0}
    loss_sum = 0.0
    probe = eeimod.PeakMemoryProbe()
    probe.start()
    t0 = time.perf_counter()
    resolution = None
    for f in files:
        img = imgcore.load_image(Path(val_dir) / f)
        if resolution is None:
            resolution = (img.shape[1], img.shape[0])
        enhanced = curvemod.enhance_tiled(net, img, patch, overlap)
        st = stats.compute_stats(enhanced)
        for k in metric_sums:
            metric_sums[k] += getattr(st, k)
        bd, _ = losses.total_loss(img, img, net, loss_cfg)
        loss_sum += bd.total
    elapsed = time.perf_counter() - t0
    peak = probe.stop()

    n = len(files)
    row = {k: v / n for k, v in metric_sums.items()}
    row["val_loss"] = loss_sum / n
    row["images"] = n
    row["eei"] = None
    if scores_file is not None and calibration_file is not None:
        base = eeimod.load_calibration(calibration_file)
        pi = eeimod.pi_from_scores(scores_file)
        inputs = eeimod.EeiInputs(
            time_model=elapsed / n,
            resolution=resolution,
            mem_model=float(max(peak, 1)),
            flops_model=float(net.flops_per_pixel()) * resolution[0] * resolution[1],
            params_model=float(net.param_count()),
            pi=pi,
        )
        report = eeimod.eei_score(inputs, base)
        row["eei"] = report.eei
        row["e_norm"] = report.e_norm
    return row
