"""Config loading, coercion, overrides, and dump round-tripping."""

import pytest

from lowlight.config import (
    SECTIONS,
    AppConfig,
    CurveConfig,
    EeiConfig,
    IoConfig,
    config_from_dict,
    dump_config,
    load_config,
    merge_override,
    parse_scalar,
)
from lowlight.train import TrainConfig


class TestDefaults:
    def test_sections_tuple(self):
        assert SECTIONS == ("apa", "curve", "loss", "train", "eei", "io")

    def test_shipped_train_profile_is_desk_scale(self):
        # The bare TrainConfig type keeps the full protocol; the app config
        # ships the quick profile so default CLI runs finish in minutes.
        cfg = AppConfig()
        assert (cfg.train.epochs, cfg.train.patch) == (20, 256)
        assert (TrainConfig().epochs, TrainConfig().patch) == (100, 2048)

    def test_io_defaults(self):
        cfg = AppConfig()
        assert (cfg.io.patch, cfg.io.overlap, cfg.io.figures) == (256, 64, True)

    def test_eei_defaults(self):
        assert AppConfig().eei.weights == "8:1:1"

    def test_empty_dict_is_all_defaults(self):
        assert config_from_dict({}) == AppConfig()


class TestValidation:
    def test_unknown_section(self):
        with pytest.raises(ValueError, match=r"unknown config section '\[nope\]'"):
            config_from_dict({"nope": {}})

    def test_unknown_key_names_section_and_key(self):
        with pytest.raises(ValueError, match=r"unknown config key 'curve\.depth'"):
            config_from_dict({"curve": {"depth": 3}})

    def test_section_must_be_table(self):
        with pytest.raises(ValueError, match="must be a table"):
            config_from_dict({"curve": 3})

    def test_section_invariants_still_fire(self):
        with pytest.raises(ValueError, match="io.overlap"):
            config_from_dict({"io": {"overlap": 300}})
        with pytest.raises(ValueError):
            config_from_dict({"eei": {"weights": "bogus"}})

    def test_curve_io_dataclass_validation(self):
        with pytest.raises(ValueError):
            CurveConfig(width=0)
        with pytest.raises(ValueError):
            IoConfig(patch=0)
        with pytest.raises(ValueError):
            IoConfig(patch=64, overlap=64)
        with pytest.raises(ValueError):
            EeiConfig(weights="1:2")


class TestCoercion:
    def test_bool_is_strict(self):
        with pytest.raises(ValueError, match=r"\[io\] figures must be a boolean"):
            config_from_dict({"io": {"figures": 1}})

    def test_int_accepts_integral_float(self):
        cfg = config_from_dict({"train": {"epochs": 8.0}})
        assert cfg.train.epochs == 8
        assert isinstance(cfg.train.epochs, int)

    def test_int_rejects_fractional_float(self):
        with pytest.raises(ValueError, match=r"\[train\] epochs must be an integer"):
            config_from_dict({"train": {"epochs": 8.5}})

    def test_int_rejects_bool(self):
        with pytest.raises(ValueError, match=r"\[train\] epochs must be an integer"):
            config_from_dict({"train": {"epochs": True}})

    def test_float_accepts_int(self):
        cfg = config_from_dict({"loss": {"lambda_tv": 10}})
        assert cfg.loss.lambda_tv == 10.0
        assert isinstance(cfg.loss.lambda_tv, float)

    def test_float_rejects_string(self):
        with pytest.raises(ValueError, match=r"\[loss\] lambda_tv must be a number"):
            config_from_dict({"loss": {"lambda_tv": "big"}})

    def test_str_is_strict(self):
        with pytest.raises(ValueError, match=r"\[curve\] checkpoint must be a string"):
            config_from_dict({"curve": {"checkpoint": 3}})


class TestLossFlattening:
    def test_lint_keys_live_in_loss_section(self):
        cfg = config_from_dict({"loss": {"e_dark": 0.4, "lambda_tv": 50}})
        assert cfg.loss.lint.e_dark == 0.4
        assert cfg.loss.lambda_tv == 50.0
        # untouched keys keep their defaults
        assert cfg.loss.lint.e_bright == 0.6
        assert cfg.loss.lambda_spa == 4.0

    def test_unknown_loss_key(self):
        with pytest.raises(ValueError, match=r"unknown config key 'loss\.e_mid'"):
            config_from_dict({"loss": {"e_mid": 0.5}})

    def test_dump_flattens_without_subtable(self):
        text = dump_config(AppConfig())
        assert "e_dark = 0.5" in text
        assert "[loss.lint]" not in text


class TestScalarsAndOverrides:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("true", True),
            ("false", False),
            (" 42 ", 42),
            ("-7", -7),
            ("3.5", 3.5),
            ("1e-3", 0.001),
            ("'hi'", "hi"),
            ('"a b"', "a b"),
            ("plain", "plain"),
        ],
    )
    def test_parse_scalar(self, text, expected):
        value = parse_scalar(text)
        assert value == expected
        assert type(value) is type(expected)

    def test_merge_override_creates_section(self):
        data = {}
        merge_override(data, "train.epochs=10")
        assert data == {"train": {"epochs": 10}}

    def test_merge_override_replaces_key(self):
        data = {"train": {"epochs": 3, "seed": 1}}
        merge_override(data, "train.epochs=10")
        assert data == {"train": {"epochs": 10, "seed": 1}}

    @pytest.mark.parametrize("spec", ["trainepochs=10", "train.epochs", ".epochs=1", "train.=1"])
    def test_merge_override_rejects_malformed(self, spec):
        with pytest.raises(ValueError, match="override must look like"):
            merge_override({}, spec)


class TestDumpRoundTrip:
    def test_default_round_trip(self, tmp_path):
        text = dump_config(AppConfig())
        path = tmp_path / "cfg.toml"
        path.write_text(text)
        assert load_config(path) == AppConfig()

    def test_modified_round_trip(self, tmp_path):
        cfg = config_from_dict(
            {
                "apa": {"gamma_base": 2.4, "clahe_enabled": False},
                "curve": {"iterations": 4, "checkpoint": 'we"ird\\path'},
                "loss": {"lambda_col": 0.0, "e_global": 0.55},
                "train": {"epochs": 6, "warmup_epochs": 2, "patch": 32},
                "eei": {"weights": "9:0.5:0.5"},
                "io": {"figures": False, "overlap": 0},
            }
        )
        path = tmp_path / "cfg.toml"
        path.write_text(dump_config(cfg))
        assert load_config(path) == cfg

    def test_dump_format(self):
        text = dump_config(AppConfig())
        lines = text.splitlines()
        headers = [ln for ln in lines if ln.startswith("[")]
        assert headers == [f"[{s}]" for s in SECTIONS]
        assert "figures = true" in lines
        assert 'weights = "8:1:1"' in lines

    def test_load_rejects_bad_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[train\nepochs = 3\n")
        with pytest.raises(ValueError, match="cannot parse config"):
            load_config(path)
