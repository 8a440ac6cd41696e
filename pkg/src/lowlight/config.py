"""Application configuration: TOML files, overrides, and round-trip dump.

One file configures every subcommand through six sections — [apa],
[curve], [loss], [train], [eei], [io] — mapped onto the per-module
parameter dataclasses. Unknown sections or keys are rejected by name so
typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .apa import ApaParams
from .eei import EeiWeights
from .losses import LintParams, LossConfig
from .train import TrainConfig, desk_scale_config

SECTIONS = ("apa", "curve", "loss", "train", "eei", "io")


@dataclass
class CurveConfig:
    width: int = 8
    iterations: int = 8
    checkpoint: str = ""

    def __post_init__(self) -> None:
        if self.width < 1 or self.iterations < 1:
            raise ValueError("width and iterations must be >= 1")


@dataclass
class EeiConfig:
    weights: str = "8:1:1"
    calibration: str = ""

    def __post_init__(self) -> None:
        EeiWeights.parse(self.weights)


@dataclass
class IoConfig:
    patch: int = 256
    overlap: int = 64
    figures: bool = True

    def __post_init__(self) -> None:
        if self.patch < 1:
            raise ValueError("io.patch must be >= 1")
        if not 0 <= self.overlap < self.patch:
            raise ValueError("io.overlap must be in [0, patch)")


@dataclass
class AppConfig:
    # [train] defaults to the quick desk-scale profile; the full protocol
    # stays reachable by overriding train.epochs / train.patch.
    apa: ApaParams = field(default_factory=ApaParams)
    curve: CurveConfig = field(default_factory=CurveConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=desk_scale_config)
    eei: EeiConfig = field(default_factory=EeiConfig)
    io: IoConfig = field(default_factory=IoConfig)


_SECTION_TYPES = {
    "apa": ApaParams,
    "curve": CurveConfig,
    "train": TrainConfig,
    "eei": EeiConfig,
    "io": IoConfig,
}

# [loss] flattens the nested intensity-target parameters into one section.
_LINT_KEYS = tuple(f.name for f in fields(LintParams))
_LOSS_KEYS = tuple(f.name for f in fields(LossConfig) if f.name != "lint")


def _coerce(section: str, key: str, value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ValueError(f"[{section}] {key} must be a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, bool):
            raise ValueError(f"[{section}] {key} must be an integer, got {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ValueError(f"[{section}] {key} must be an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ValueError(f"[{section}] {key} must be a number, got {value!r}")
    if isinstance(default, str):
        if isinstance(value, str):
            return value
        raise ValueError(f"[{section}] {key} must be a string, got {value!r}")
    raise ValueError(f"[{section}] {key} is not configurable")


def _build_section(section: str, cls, data: dict):
    defaults = cls()
    kwargs = {}
    names = {f.name for f in fields(cls)}
    for key, value in data.items():
        if key not in names:
            raise ValueError(f"unknown config key '{section}.{key}'")
        kwargs[key] = _coerce(section, key, value, getattr(defaults, key))
    return cls(**kwargs)


def _build_loss(data: dict) -> LossConfig:
    loss_kwargs, lint_kwargs = {}, {}
    loss_defaults, lint_defaults = LossConfig(), LintParams()
    for key, value in data.items():
        if key in _LINT_KEYS:
            lint_kwargs[key] = _coerce("loss", key, value, getattr(lint_defaults, key))
        elif key in _LOSS_KEYS:
            loss_kwargs[key] = _coerce("loss", key, value, getattr(loss_defaults, key))
        else:
            raise ValueError(f"unknown config key 'loss.{key}'")
    return LossConfig(lint=LintParams(**lint_kwargs), **loss_kwargs)


def config_from_dict(data: dict) -> AppConfig:
    kwargs = {}
    for section, body in data.items():
        if section not in SECTIONS:
            raise ValueError(f"unknown config section '[{section}]'")
        if not isinstance(body, dict):
            raise ValueError(f"config section '[{section}]' must be a table")
        if section == "loss":
            kwargs[section] = _build_loss(body)
        else:
            kwargs[section] = _build_section(section, _SECTION_TYPES[section], body)
    return AppConfig(**kwargs)


def load_config(path) -> AppConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"cannot parse config '{path}': {exc}") from exc
    return config_from_dict(data)


def parse_scalar(text: str):
    """Parse a --set value the way TOML would: bool, int, float, or string."""
    stripped = text.strip()
    if stripped in ("true", "false"):
        return stripped == "true"
    try:
        return int(stripped)
    except ValueError:
        pass
    try:
        return float(stripped)
    except ValueError:
        pass
    if len(stripped) >= 2 and stripped[0] == stripped[-1] and stripped[0] in ("'", '"'):
        return stripped[1:-1]
    return stripped


def merge_override(data: dict, spec: str) -> None:
    """Fold one 'section.key=value' override into a raw config dict."""
    target, sep, value = spec.partition("=")
    section, dot, key = target.partition(".")
    if not sep or not dot or not section or not key:
        raise ValueError(f"override must look like section.key=value, got '{spec}'")
    data.setdefault(section, {})[key] = parse_scalar(value)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise TypeError(f"cannot format config value {value!r}")


def _section_items(section: str, cfg: AppConfig):
    if section == "loss":
        loss = cfg.loss
        for name in _LOSS_KEYS:
            yield name, getattr(loss, name)
        for name in _LINT_KEYS:
            yield name, getattr(loss.lint, name)
        return
    obj = getattr(cfg, section)
    for f in fields(obj):
        yield f.name, getattr(obj, f.name)


def dump_config(cfg: AppConfig) -> str:
    """Render a config as TOML text that load_config parses back equal."""
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for name, value in _section_items(section, cfg):
            lines.append(f"{name} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
