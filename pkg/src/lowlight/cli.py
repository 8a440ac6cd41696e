"""Batch command-line front-end.

One executable, one optional TOML config, seven subcommands: apa,
enhance, train, eei, stats, split, checkpoint-info. Flags win over config
values; logs are key=value lines on stderr; results land on stdout or in
the requested output files. Exit codes: 0 success, 1 usage or config
error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from . import apa as apamod
from . import config as configmod
from . import curve as curvemod
from . import eei as eeimod
from . import imgcore
from . import report as reportmod
from . import stats as statsmod
from . import train as trainmod

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class Logger:
    def __init__(self, quiet: bool = False, stream=None):
        self.quiet = quiet
        self.stream = stream or sys.stderr

    @staticmethod
    def _fmt(value) -> str:
        text = str(value)
        return f'"{text}"' if " " in text else text

    def _write(self, fields: dict) -> None:
        print(" ".join(f"{k}={self._fmt(v)}" for k, v in fields.items()), file=self.stream)

    def info(self, **fields) -> None:
        if not self.quiet:
            self._write(fields)

    def error(self, **fields) -> None:
        self._write({"level": "error", **fields})


def _parse_resolution(text: str):
    try:
        w, h = text.lower().split("x")
        res = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must look like 1920x1080, got '{text}'")
    if res[0] < 1 or res[1] < 1:
        raise argparse.ArgumentTypeError("resolution must be positive")
    return res


def _parse_ratios(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"ratios must look like 8:1:1, got '{text}'")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be numeric, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowlight",
        description="Low-light enhancement toolkit: augmentation, curve "
        "network training and inference, efficiency scoring, dataset tools.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="FILE", help="TOML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable; flags win over file)",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress logs")
    parser.add_argument("--threads", type=int, default=None, help="cap worker threads")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    parser.add_argument(
        "--dump-config",
        action="store_true",
        help="print the effective config as TOML and exit",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("apa", help="batch pre-enhancement augmentation over a directory")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--force", action="store_true", help="rewrite outputs that already exist")

    p = sub.add_parser("enhance", help="enhance one image with a trained checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--checkpoint", help="weight file (defaults to [curve] checkpoint)")
    p.add_argument("--tiled", action="store_true", help="tile with blended overlaps")
    p.add_argument("--iterations", type=int, default=None, help="override curve iteration count")

    p = sub.add_parser("train", help="train the curve network on paired directories")
    p.add_argument("data_dir", help="raw low-light inputs")
    p.add_argument("apa_dir", help="matching augmentation outputs")
    p.add_argument("out_dir")
    p.add_argument("--val-dir", help="validation image directory")
    p.add_argument("--scores", help="validation niqe/brisque score CSV (enables EEI ranking)")
    p.add_argument("--calibration", help="calibration file for validation EEI")

    p = sub.add_parser("eei", help="edge-efficiency scoring and calibration")
    p.add_argument("--calibration", help="baseline file (default: shipped reference)")
    p.add_argument("--weights", help="factor weights time:complexity:resource")
    p.add_argument("--pi", type=float, default=None, help="perceptual index value")
    p.add_argument("--scores", help="CSV of filename,niqe,brisque to average into PI")
    p.add_argument("--resolution", type=_parse_resolution, default=None, metavar="WxH")
    p.add_argument("--time-ms", type=float, default=None, help="measured time per frame")
    p.add_argument("--mem-gb", type=float, default=None, help="measured peak memory, decimal GB")
    p.add_argument("--flops-g", type=float, default=None, help="model GFLOPs at the resolution")
    p.add_argument("--params", type=float, default=None, help="model parameter count")
    p.add_argument("--measure", action="store_true", help="profile a checkpoint instead")
    p.add_argument("--checkpoint", help="weight file for --measure/--calibrate")
    p.add_argument("--tiled", action="store_true", help="force the tiled path when measuring")
    p.add_argument("--calibrate", action="store_true", help="write a new baseline for this machine")
    p.add_argument("--device-label", help="label stored with --calibrate")
    p.add_argument("--out", help="write report CSV (and factor figure) here")

    p = sub.add_parser("stats", help="per-image statistics and histograms for a directory")
    p.add_argument("dir")
    p.add_argument("--out", required=True, help="output directory for CSVs and figures")

    p = sub.add_parser("split", help="deterministic train/val/test manifest")
    p.add_argument("dir")
    p.add_argument("--out", required=True, help="manifest file to write")
    p.add_argument("--seed", type=int, default=None, help="shuffle seed (default: [train] seed)")
    p.add_argument("--ratios", type=_parse_ratios, default=(8.0, 1.0, 1.0), metavar="T:V:E")

    p = sub.add_parser("checkpoint-info", help="print a weight file's descriptor")
    p.add_argument("checkpoint")

    return parser


def _effective_config(args) -> configmod.AppConfig:
    data = {}
    if args.config:
        with open(args.config, "rb") as fh:
            data = configmod.tomllib.load(fh)
    for spec in args.overrides:
        configmod.merge_override(data, spec)
    cfg = configmod.config_from_dict(data)
    if args.no_figures:
        cfg.io.figures = False
    return cfg


def _list_inputs(directory):
    root = Path(directory)
    if not root.is_dir():
        raise ValueError(f"not a directory: '{directory}'")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))


def cmd_apa(args, cfg, log: Logger) -> int:
    files = _list_inputs(args.in_dir)
    if not files:
        log.error(reason="no input images", dir=args.in_dir)
        return EXIT_RUNTIME
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(path: Path) -> str:
        dest = out / path.name
        if dest.exists() and not args.force:
            return "skipped"
        img = imgcore.load_image(path)
        imgcore.save_image(dest, apamod.apa_transform(img, cfg.apa))
        return "done"

    workers = args.threads or min(8, os.cpu_count() or 1)
    failures = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for path, outcome in zip(files, pool.map(_guarded(work), files)):
            if isinstance(outcome, Exception):
                failures += 1
                log.error(cmd="apa", file=path.name, reason=str(outcome))
            else:
                log.info(cmd="apa", file=path.name, status=outcome)
    log.info(cmd="apa", total=len(files), failed=failures)
    return EXIT_RUNTIME if failures else EXIT_OK


def _guarded(fn):
    def inner(arg):
        try:
            return fn(arg)
        except Exception as exc:  # collected and reported per file
            return exc

    return inner


def cmd_enhance(args, cfg, log: Logger) -> int:
    ckpt = args.checkpoint or cfg.curve.checkpoint
    if not ckpt:
        log.error(cmd="enhance", reason="no checkpoint given (flag or [curve] config)")
        return EXIT_USAGE
    net = curvemod.load_checkpoint(ckpt)
    img = imgcore.load_image(args.input)
    n = args.iterations
    t0 = time.perf_counter()
    if args.tiled:
        result = curvemod.enhance_tiled(net, img, cfg.io.patch, cfg.io.overlap, n=n)
    else:
        result = curvemod.enhance(net, img, n=n)
    elapsed = time.perf_counter() - t0
    imgcore.save_image(args.output, result)
    log.info(cmd="enhance", input=args.input, output=args.output, seconds=f"{elapsed:.4f}", tiled=int(args.tiled))
    return EXIT_OK


def cmd_train(args, cfg, log: Logger) -> int:
    result = trainmod.train(
        args.data_dir,
        args.apa_dir,
        cfg.train,
        cfg.loss,
        args.out_dir,
        width=cfg.curve.width,
        iterations=cfg.curve.iterations,
        val_dir=args.val_dir,
        scores_file=args.scores,
        calibration_file=args.calibration,
        log_fn=lambda **kv: log.info(cmd="train", **{k: _num(v) for k, v in kv.items()}),
    )
    if result["val_rows"]:
        import csv as _csv

        columns = sorted({k for row in result["val_rows"] for k in row})
        val_path = Path(args.out_dir) / "val_metrics.csv"
        with open(val_path, "w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=columns, restval="")
            writer.writeheader()
            for row in result["val_rows"]:
                writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
        log.info(cmd="train", val_metrics=str(val_path), rows=len(result["val_rows"]))
    if cfg.io.figures:
        fig = reportmod.save_loss_curve(result["log"], Path(args.out_dir) / "loss_curve.png")
        log.info(cmd="train", figure=str(fig))
    log.info(cmd="train", best=str(result["best"]), last=str(result["last"]), log=str(result["log"]))
    return EXIT_OK


def _num(v):
    return f"{v:.6g}" if isinstance(v, float) else v


def _resolve_pi(args) -> float:
    if args.pi is not None and args.scores:
        raise UsageError("give either --pi or --scores, not both")
    if args.pi is not None:
        return args.pi
    if args.scores:
        return eeimod.pi_from_scores(args.scores)
    raise UsageError("a perceptual index is required: --pi or --scores")


class UsageError(ValueError):
    pass


def cmd_eei(args, cfg, log: Logger) -> int:
    if args.calibrate:
        if not args.checkpoint:
            raise UsageError("--calibrate requires --checkpoint")
        if not args.out:
            raise UsageError("--calibrate requires --out for the baseline file")
        net = curvemod.load_checkpoint(args.checkpoint)
        adapter = eeimod.CurveNetAdapter(net, max_pixels=1 if args.tiled else None)
        baseline = eeimod.calibrate(
            adapter,
            resolution=args.resolution or eeimod.BASE_RESOLUTION,
            device_label=args.device_label,
            patch=cfg.io.patch,
            overlap=cfg.io.overlap,
        )
        eeimod.save_calibration(baseline, args.out)
        log.info(cmd="eei", calibration=args.out, device=baseline.device_label)
        return EXIT_OK

    cal_path = args.calibration or cfg.eei.calibration or eeimod.default_calibration_path()
    baseline = eeimod.load_calibration(cal_path)
    weights = eeimod.EeiWeights.parse(args.weights or cfg.eei.weights)
    pi = _resolve_pi(args)

    warning = None
    if args.measure:
        if not args.checkpoint:
            raise UsageError("--measure requires --checkpoint")
        if args.resolution is None:
            raise UsageError("--measure requires --resolution")
        net = curvemod.load_checkpoint(args.checkpoint)
        adapter = eeimod.CurveNetAdapter(net, max_pixels=1 if args.tiled else None)
        profile = eeimod.profile_model(
            adapter, args.resolution, patch=cfg.io.patch, overlap=cfg.io.overlap
        )
        inputs = profile.to_inputs(pi)
        warning = profile.warning
    else:
        missing = [
            name
            for name, val in (
                ("--time-ms", args.time_ms),
                ("--mem-gb", args.mem_gb),
                ("--resolution", args.resolution),
            )
            if val is None
        ]
        if missing:
            raise UsageError(f"explicit scoring needs {', '.join(missing)} (or use --measure)")
        inputs = eeimod.EeiInputs(
            time_model=args.time_ms / 1e3,
            resolution=args.resolution,
            mem_model=args.mem_gb * 1e9,
            pi=pi,
            flops_model=None if args.flops_g is None else args.flops_g * 1e9,
            params_model=args.params,
        )

    score = eeimod.eei_score(inputs, baseline, weights)
    row = eeimod.report_row(score, inputs.resolution)
    print(eeimod.format_report([row]))
    if warning:
        log.error(cmd="eei", warning=warning)
    if score.fallback:
        log.info(cmd="eei", note="complexity factor unavailable, using 0.9/0.1 time/memory weights")
    log.info(cmd="eei", eei=f"{score.eei:.4f}", e_norm=f"{score.e_norm:.6f}", pi=f"{score.pi:.4f}")
    if args.out:
        eeimod.write_report_csv([row], args.out)
        log.info(cmd="eei", report=args.out)
        if cfg.io.figures:
            fig = reportmod.save_factor_chart([row], Path(args.out).with_suffix(".png"))
            log.info(cmd="eei", figure=str(fig))
    return EXIT_OK


def cmd_stats(args, cfg, log: Logger) -> int:
    rows, hists = statsmod.dataset_report(args.dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats_csv = out / "stats.csv"
    hist_csv = out / "stats_hist.csv"
    statsmod.write_stats_csv(rows, stats_csv)
    statsmod.write_hist_csv(hists, hist_csv)
    log.info(cmd="stats", images=len(rows), csv=str(stats_csv), hist=str(hist_csv))
    if cfg.io.figures:
        for fig in reportmod.save_histogram_figures(hists, out):
            log.info(cmd="stats", figure=str(fig))
    return EXIT_OK


def cmd_split(args, cfg, log: Logger) -> int:
    seed = args.seed if args.seed is not None else cfg.train.seed
    splits = statsmod.make_splits(args.dir, ratios=args.ratios, seed=seed)
    statsmod.write_manifest(splits, args.out)
    log.info(
        cmd="split",
        manifest=args.out,
        train=len(splits["train"]),
        val=len(splits["val"]),
        test=len(splits["test"]),
        seed=seed,
    )
    return EXIT_OK


def cmd_checkpoint_info(args, cfg, log: Logger) -> int:
    desc = curvemod.checkpoint_descriptor(args.checkpoint)
    print(" ".join(f"{k}={v}" for k, v in desc.items()))
    return EXIT_OK


_HANDLERS = {
    "apa": cmd_apa,
    "enhance": cmd_enhance,
    "train": cmd_train,
    "eei": cmd_eei,
    "stats": cmd_stats,
    "split": cmd_split,
    "checkpoint-info": cmd_checkpoint_info,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap, keep --help/--version at 0
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    log = Logger(quiet=args.quiet)
    try:
        cfg = _effective_config(args)
    except (ValueError, OSError) as exc:
        log.error(reason=str(exc))
        return EXIT_USAGE

    if args.dump_config:
        print(configmod.dump_config(cfg), end="")
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        return _HANDLERS[args.command](args, cfg, log)
    except UsageError as exc:
        log.error(cmd=args.command, reason=str(exc))
        return EXIT_USAGE
    except (eeimod.ProfilingUnavailable, eeimod.CapacityError, ValueError, OSError) as exc:
        log.error(cmd=args.command, reason=str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
