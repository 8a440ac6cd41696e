"""Zero-reference low-light image enhancement toolkit.

A lightweight curve-estimation network trained without paired references,
an adaptive pre-enhancement augmentation pipeline that manufactures its
training targets, an edge-efficiency scoring harness, and dataset
statistics utilities, all exposed as a library and a batch CLI.
"""

__version__ = "0.1.0"

from .apa import ApaParams, apa_transform
from .curve import (
    CurveNet,
    apply_curve,
    checkpoint_descriptor,
    enhance,
    enhance_tiled,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .eei import (
    CalibrationBaseline,
    CurveNetAdapter,
    EeiInputs,
    EeiReport,
    EeiWeights,
    calibrate,
    eei_score,
    load_calibration,
    pi_from_scores,
    profile_model,
    save_calibration,
)
from .imgcore import blend_patches, hann_window, load_image, plan_patches, save_image
from .losses import LintParams, LossBreakdown, LossConfig, l_col, l_int, l_spa, l_tv, total_loss
from .stats import ImageStats, compute_stats, dataset_report, make_splits
# the training loop itself lives at lowlight.train.train; re-exporting the
# function here would shadow the submodule name
from .train import AdamState, TrainConfig, adam_step, clip_gradients, lr_at, validate

__all__ = [
    "__version__",
    "ApaParams",
    "apa_transform",
    "CurveNet",
    "apply_curve",
    "checkpoint_descriptor",
    "enhance",
    "enhance_tiled",
    "forward",
    "load_checkpoint",
    "save_checkpoint",
    "CalibrationBaseline",
    "CurveNetAdapter",
    "EeiInputs",
    "EeiReport",
    "EeiWeights",
    "calibrate",
    "eei_score",
    "load_calibration",
    "pi_from_scores",
    "profile_model",
    "save_calibration",
    "blend_patches",
    "hann_window",
    "load_image",
    "plan_patches",
    "save_image",
    "LintParams",
    "LossBreakdown",
    "LossConfig",
    "l_col",
    "l_int",
    "l_spa",
    "l_tv",
    "total_loss",
    "ImageStats",
    "compute_stats",
    "dataset_report",
    "make_splits",
    "AdamState",
    "TrainConfig",
    "adam_step",
    "clip_gradients",
    "lr_at",
    "validate",
]
