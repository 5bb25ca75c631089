import pytest

from aotinpaint.config import (
    RunConfig,
    TrainConfig,
    apply_overrides,
    config_hash,
    load_run_config,
    run_config_from_dict,
    run_config_to_dict,
)
from aotinpaint.errors import ConfigError
from aotinpaint.masks import RatioBucket


def test_defaults_round_trip():
    cfg = RunConfig()
    assert run_config_from_dict(run_config_to_dict(cfg)) == cfg


def test_paper_defaults():
    cfg = TrainConfig()
    assert cfg.batch_size == 8
    assert cfg.lr == 1e-4
    assert (cfg.adam_beta1, cfg.adam_beta2) == (0.0, 0.9)
    assert cfg.image_size == 512
    assert cfg.generator.num_blocks == 8
    assert cfg.generator.block.rates == (1, 2, 4, 8)
    assert cfg.mask_kernel_size == 70
    assert len(cfg.mask_buckets) == 6


def test_yaml_partial_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        "train:\n"
        "  steps: 42\n"
        "  generator:\n"
        "    base_width: 64\n"
        "    rates: [1, 2]\n"
        "serve:\n"
        "  port: 9000\n"
    )
    cfg = load_run_config(path)
    assert cfg.train.steps == 42
    assert cfg.train.generator.base_width == 64
    assert cfg.train.generator.block.rates == (1, 2)
    assert cfg.train.batch_size == 8  # untouched default
    assert cfg.serve.port == 9000


def test_yaml_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("train:\n  nonsense: 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        load_run_config(path)


def test_override_types():
    cfg = apply_overrides(
        RunConfig(),
        [
            "train.lr=5e-5",
            "train.discriminator.spectral_norm=false",
            "train.generator.rates=[2, 8]",
            "train.generator.base_width=64",
            "eval.buckets=['1-10', '50-60']",
        ],
    )
    assert cfg.train.lr == 5e-5
    assert cfg.train.discriminator.spectral_norm is False
    assert cfg.train.generator.block.rates == (2, 8)
    assert cfg.eval.buckets == (RatioBucket(0.01, 0.1), RatioBucket(0.5, 0.6))


def test_override_unknown_key():
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), ["train.generator.bogus=1"])


def test_override_requires_equals():
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), ["train.lr"])


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("train:\n  steps: 10\n")
    cfg = apply_overrides(load_run_config(path), ["train.steps=99"])
    assert cfg.train.steps == 99


def test_image_size_divisibility_enforced():
    with pytest.raises(ConfigError):
        TrainConfig(image_size=100)  # not divisible by 16


def test_config_hash_stability():
    assert config_hash(TrainConfig()) == config_hash(TrainConfig())
    assert config_hash(TrainConfig()) != config_hash(TrainConfig(seed=1))


def test_augment_crop_flag_round_trip():
    cfg = apply_overrides(RunConfig(), ["train.augment_crop=true"])
    assert cfg.train.augment_crop is True
    assert run_config_from_dict(run_config_to_dict(cfg)) == cfg


def test_desk_preset():
    cfg = TrainConfig.desk()
    assert cfg.image_size == 64
    assert cfg.generator.base_width == 64
    assert cfg.generator.num_blocks == 8
    assert cfg.lr == 1e-4
    assert cfg.losses.lambda_sty == 250.0
