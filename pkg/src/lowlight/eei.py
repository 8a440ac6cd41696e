"""Edge-efficiency scoring.

Combines a no-reference perceptual index with three deployment-cost
factors, each normalized against a calibration baseline captured once per
device: wall-clock time (per pixel, against the baseline resolution),
model complexity (FLOPs and parameter count), and peak working memory.
A weighted sum of the factors scales the perceptual index into a single
comparable number; larger is worse for equal perceptual quality.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
import time
import tracemalloc
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curve as curvemod

CALIBRATION_FORMAT = 1
BASE_RESOLUTION = (3840, 2160)
FALLBACK_TIME_WEIGHT = 0.9
FALLBACK_RESOURCE_WEIGHT = 0.1
TIMING_WARMUP = 3
TIMING_RUNS = 10
TIMING_CV_LIMIT = 0.20


class CapacityError(RuntimeError):
    """A model declined to run at the requested resolution."""


class ProfilingUnavailable(RuntimeError):
    """Neither the direct nor the tiled profiling path could complete."""


@dataclass(frozen=True)
class CalibrationBaseline:
    time_ref_s: float
    mem_ref_bytes: float
    flops_ref: float | None = None
    params_ref: float | None = None
    base_resolution: tuple = BASE_RESOLUTION
    device_label: str = "unknown"
    warning: str | None = None

    def __post_init__(self):
        if self.time_ref_s <= 0 or self.mem_ref_bytes <= 0:
            raise ValueError("baseline time and memory must be positive")
        if (self.flops_ref is None) != (self.params_ref is None):
            raise ValueError("flops_ref and params_ref must be given together")

    @property
    def base_pixels(self) -> int:
        return self.base_resolution[0] * self.base_resolution[1]


_CALIBRATION_KEYS = (
    "device_label",
    "time_ref_s",
    "flops_ref",
    "params_ref",
    "mem_ref_bytes",
    "base_w",
    "base_h",
)


def save_calibration(baseline: CalibrationBaseline, path) -> None:
    lines = [f"format={CALIBRATION_FORMAT}", f"device_label={baseline.device_label}"]
    if baseline.warning:
        # comment line, skipped on load: calibration stays usable but flagged
        lines.insert(0, f"# warning: {baseline.warning}")
    lines.append(f"time_ref_s={baseline.time_ref_s:.9g}")
    if baseline.flops_ref is not None:
        lines.append(f"flops_ref={baseline.flops_ref:.0f}")
        lines.append(f"params_ref={baseline.params_ref:.0f}")
    lines.append(f"mem_ref_bytes={baseline.mem_ref_bytes:.0f}")
    lines.append(f"base_w={baseline.base_resolution[0]}")
    lines.append(f"base_h={baseline.base_resolution[1]}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_calibration(path) -> CalibrationBaseline:
    fields = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key=value, got '{raw}'")
        if key == "format":
            if int(value) != CALIBRATION_FORMAT:
                raise ValueError(f"{path}: unsupported calibration format '{value}'")
            continue
        if key not in _CALIBRATION_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown calibration key '{key}'")
        if key in fields:
            raise ValueError(f"{path}:{lineno}: duplicate key '{key}'")
        fields[key] = value.strip()
    missing = [k for k in ("time_ref_s", "mem_ref_bytes", "base_w", "base_h") if k not in fields]
    if missing:
        raise ValueError(f"{path}: missing calibration keys: {', '.join(missing)}")
    flops = float(fields["flops_ref"]) if "flops_ref" in fields else None
    params = float(fields["params_ref"]) if "params_ref" in fields else None
    return CalibrationBaseline(
        time_ref_s=float(fields["time_ref_s"]),
        mem_ref_bytes=float(fields["mem_ref_bytes"]),
        flops_ref=flops,
        params_ref=params,
        base_resolution=(int(fields["base_w"]), int(fields["base_h"])),
        device_label=fields.get("device_label", "unknown"),
    )


def default_calibration_path() -> Path:
    return Path(__file__).parent / "data" / "reference_calibration.txt"


@dataclass(frozen=True)
class EeiWeights:
    w_time: float = 0.8
    w_complex: float = 0.1
    w_resource: float = 0.1

    def __post_init__(self):
        if min(self.w_time, self.w_complex, self.w_resource) < 0:
            raise ValueError("weights must be non-negative")
        if self.w_time + self.w_complex + self.w_resource <= 0:
            raise ValueError("weights must not all be zero")

    @classmethod
    def parse(cls, text: str) -> "EeiWeights":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"weights must be 'time:complexity:resource', got '{text}'")
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise ValueError(f"weights must be numeric, got '{text}'") from None
        return cls(*values)

    def normalized(self) -> tuple:
        total = self.w_time + self.w_complex + self.w_resource
        return (self.w_time / total, self.w_complex / total, self.w_resource / total)


@dataclass(frozen=True)
class EeiInputs:
    time_model: float
    resolution: tuple
    mem_model: float
    pi: float
    flops_model: float | None = None
    params_model: float | None = None
    tiled: bool = False


@dataclass(frozen=True)
class EeiReport:
    tf: float
    rf: float
    e_norm: float
    eei: float
    pi: float
    weights: tuple
    cf: float | None = None
    fallback: bool = False
    tiled: bool = False
    warning: str | None = None


def time_factor(time_model: float, resolution, baseline: CalibrationBaseline) -> float:
    """Per-pixel runtime relative to the baseline device at its base size."""
    pixels = resolution[0] * resolution[1]
    if pixels <= 0:
        raise ValueError("resolution must be positive")
    return (time_model / baseline.time_ref_s) * (baseline.base_pixels / pixels)


def complexity_factor(flops_model, params_model, baseline: CalibrationBaseline):
    """Equal-weighted FLOPs/params ratio; None when any operand is absent
    (the profiling-failure path), never an error."""
    if None in (flops_model, params_model, baseline.flops_ref, baseline.params_ref):
        return None
    return 0.5 * flops_model / baseline.flops_ref + 0.5 * params_model / baseline.params_ref


def resource_factor(mem_model: float, baseline: CalibrationBaseline) -> float:
    return mem_model / baseline.mem_ref_bytes


def eei_score(
    inputs: EeiInputs,
    baseline: CalibrationBaseline,
    weights: EeiWeights | None = None,
) -> EeiReport:
    """Combine the cost factors and the perceptual index into one score.

    When the complexity factor cannot be formed (model or baseline lacks
    FLOPs/params) the weighting falls back to fixed 0.9 time / 0.1 memory
    and the report is flagged accordingly.
    """
    weights = weights or EeiWeights()
    wt, wc, wr = weights.normalized()
    tf = time_factor(inputs.time_model, inputs.resolution, baseline)
    rf = resource_factor(inputs.mem_model, baseline)
    cf = complexity_factor(inputs.flops_model, inputs.params_model, baseline)
    fallback = wc > 0 and cf is None
    if fallback:
        wt, wc, wr = FALLBACK_TIME_WEIGHT, 0.0, FALLBACK_RESOURCE_WEIGHT
    e_norm = wt * tf + wr * rf
    if wc > 0:
        e_norm += wc * cf
    return EeiReport(
        tf=tf,
        rf=rf,
        cf=cf,
        e_norm=e_norm,
        eei=inputs.pi * e_norm,
        pi=inputs.pi,
        weights=(wt, wc, wr),
        fallback=fallback,
        tiled=inputs.tiled,
    )


class PeakMemoryProbe:
    """Peak allocation tracker around a measured region, via tracemalloc.

    If tracing is already active the existing trace is reused and only the
    peak counter is reset, so nested probes stay cheap and safe.
    """

    def __init__(self):
        self._started_here = False
        self._active = False

    def start(self) -> None:
        if self._active:
            raise RuntimeError("probe already started")
        if not tracemalloc.is_tracing():
            tracemalloc.start()
            self._started_here = True
        tracemalloc.reset_peak()
        self._active = True

    def stop(self) -> int:
        if not self._active:
            raise RuntimeError("probe not started")
        _, peak = tracemalloc.get_traced_memory()
        if self._started_here:
            tracemalloc.stop()
            self._started_here = False
        self._active = False
        return int(peak)


@dataclass(frozen=True)
class TimingResult:
    mean_s: float
    cv: float
    samples: tuple
    warning: str | None = None


def time_callable(fn, warmup: int = TIMING_WARMUP, runs: int = TIMING_RUNS) -> TimingResult:
    """Mean wall time over `runs` calls after `warmup` discarded calls."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    mean = statistics.fmean(samples)
    cv = statistics.pstdev(samples) / mean if mean > 0 else 0.0
    warning = None
    if cv > TIMING_CV_LIMIT:
        warning = f"timing unstable: cv={cv:.1%} over {runs} runs exceeds {TIMING_CV_LIMIT:.0%}"
    return TimingResult(mean_s=mean, cv=cv, samples=tuple(samples), warning=warning)


class CurveNetAdapter:
    """Profiling adapter around a curve estimation network.

    `max_pixels` caps the direct full-frame path; beyond it the adapter
    reports the frame as unsupported so profiling falls back to tiling.
    """

    name = "curvenet"

    def __init__(self, net: curvemod.CurveNet, max_pixels: int | None = None):
        self.net = net
        self.max_pixels = max_pixels

    def accepts(self, width: int, height: int) -> bool:
        return self.max_pixels is None or width * height <= self.max_pixels

    def run(self, img: np.ndarray) -> np.ndarray:
        h, w = img.shape[:2]
        if not self.accepts(w, h):
            raise CapacityError(f"{w}x{h} exceeds adapter limit of {self.max_pixels} pixels")
        return curvemod.enhance(self.net, img)

    def run_tiled(self, img: np.ndarray, patch: int = 256, overlap: int = 64) -> np.ndarray:
        return curvemod.enhance_tiled(self.net, img, patch, overlap)

    def flops(self, width: int, height: int) -> float:
        return float(self.net.flops_per_pixel()) * width * height

    def param_count(self) -> int:
        return self.net.param_count()


@dataclass(frozen=True)
class ProfileResult:
    time_s: float
    mem_bytes: int
    resolution: tuple
    flops: float | None
    params: float | None
    tiled: bool
    warning: str | None = None

    def to_inputs(self, pi: float) -> EeiInputs:
        return EeiInputs(
            time_model=self.time_s,
            resolution=self.resolution,
            mem_model=float(self.mem_bytes),
            pi=pi,
            flops_model=self.flops,
            params_model=self.params,
            tiled=self.tiled,
        )


def profile_model(
    adapter,
    resolution,
    probe: PeakMemoryProbe | None = None,
    patch: int = 256,
    overlap: int = 64,
    rng=None,
) -> ProfileResult:
    """Time and memory-profile an adapter on a synthetic frame.

    Tries the direct full-frame path first; if the adapter declines the
    resolution, retries with the tiled path. Timing follows the
    warmup-then-average protocol; peak memory is probed on one extra run
    after timing so the probe does not distort the measured durations.
    """
    w, h = resolution
    rng = rng or np.random.default_rng(0)
    frame = rng.random((h, w, 3), dtype=np.float32)
    tiled = False
    if adapter.accepts(w, h):
        runner = lambda: adapter.run(frame)
    elif hasattr(adapter, "run_tiled"):
        runner = lambda: adapter.run_tiled(frame, patch, overlap)
        tiled = True
    else:
        raise ProfilingUnavailable(f"adapter rejects {w}x{h} and has no tiled path")
    try:
        timing = time_callable(runner)
        probe = probe or PeakMemoryProbe()
        probe.start()
        runner()
        peak = probe.stop()
    except CapacityError as exc:
        raise ProfilingUnavailable(str(exc)) from exc
    flops = adapter.flops(w, h) if hasattr(adapter, "flops") else None
    params = float(adapter.param_count()) if hasattr(adapter, "param_count") else None
    return ProfileResult(
        time_s=timing.mean_s,
        mem_bytes=peak,
        resolution=(w, h),
        flops=flops,
        params=params,
        tiled=tiled,
        warning=timing.warning,
    )


def calibrate(adapter, resolution=BASE_RESOLUTION, device_label: str | None = None, **kwargs) -> CalibrationBaseline:
    """Measure a baseline for this machine from a reference adapter."""
    result = profile_model(adapter, resolution, **kwargs)
    return CalibrationBaseline(
        time_ref_s=result.time_s,
        mem_ref_bytes=float(result.mem_bytes),
        flops_ref=result.flops,
        params_ref=result.params,
        base_resolution=tuple(resolution),
        device_label=device_label or os.uname().nodename,
        warning=result.warning,
    )


def pi_from_scores(path) -> float:
    """Mean of (niqe + brisque) / 2 over a delimited score file.

    Expects rows of `filename,niqe,brisque`; a leading header row is
    skipped when its numeric columns do not parse.
    """
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                niqe, brisque = float(row[1]), float(row[2])
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: non-numeric score in {row[1:]!r}") from None
            values.append((niqe + brisque) / 2.0)
    if not values:
        raise ValueError(f"{path}: no score rows found")
    return statistics.fmean(values)


REPORT_COLUMNS = ("width", "height", "tf", "cf", "rf", "e_norm", "pi", "eei", "tiled", "fallback")


def report_row(report: EeiReport, resolution) -> dict:
    return {
        "width": resolution[0],
        "height": resolution[1],
        "tf": f"{report.tf:.6g}",
        "cf": "" if report.cf is None else f"{report.cf:.6g}",
        "rf": f"{report.rf:.6g}",
        "e_norm": f"{report.e_norm:.6g}",
        "pi": f"{report.pi:.6g}",
        "eei": f"{report.eei:.6g}",
        "tiled": int(report.tiled),
        "fallback": int(report.fallback),
    }


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def format_report(rows) -> str:
    """Fixed-width text table of report rows for terminal output."""
    headers = list(REPORT_COLUMNS)
    table = [[str(r[h]) for h in headers] for r in rows]
    widths = [max(len(h), *(len(row[i]) for row in table)) if table else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)
