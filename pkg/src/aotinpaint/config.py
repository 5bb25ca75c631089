"""Run configuration: one schema shared by train, eval and serve.

Config files are YAML mappings mirroring the dataclasses below; every field is
optional and defaults to the published training recipe. Command-line overrides
(``section.field=value``) win over the file. Unknown keys are errors, never
warnings.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .discriminator import DiscriminatorConfig
from .errors import ConfigError
from .generator import AotBlockConfig, GeneratorConfig
from .losses import LossWeights
from .masks import DEFAULT_BLUR_KERNEL, RatioBucket, paper_buckets, parse_bucket


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    batch_size: int = 8
    steps: int = 1000
    lr: float = 1e-4  # fixed for the whole run, no schedule
    adam_beta1: float = 0.0
    adam_beta2: float = 0.9
    image_size: int = 512
    checkpoint_every: int = 250
    grad_clip: float | None = None
    augment_crop: bool = False
    generator: GeneratorConfig = field(default_factory=GeneratorConfig.paper)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    losses: LossWeights = field(default_factory=LossWeights)
    mask_kernel_size: int = DEFAULT_BLUR_KERNEL
    mask_sigma: float | None = None
    mask_buckets: tuple[RatioBucket, ...] = field(default_factory=paper_buckets)
    extractor_source: str = "auto"
    extractor_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.steps < 0:
            raise ConfigError("batch_size must be >= 1 and steps >= 0")
        if self.image_size % self.discriminator.downsample_factor:
            raise ConfigError(
                f"image_size {self.image_size} not divisible by discriminator "
                f"downsampling {self.discriminator.downsample_factor}"
            )

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """CPU-friendly preset: smaller images and channels, same training recipe."""
        defaults = dict(
            image_size=64,
            steps=500,
            checkpoint_every=100,
            generator=GeneratorConfig.desk(),
        )
        defaults.update(overrides)
        return cls(**defaults)


@dataclass(frozen=True)
class EvalConfig:
    seed: int = 0
    batch_size: int = 8
    buckets: tuple[RatioBucket, ...] = field(default_factory=paper_buckets)


@dataclass(frozen=True)
class ServeConfig:
    port: int = 8000
    max_inflight: int = 4
    payload_limit_mb: int = 16
    max_side: int = 512


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    serve: ServeConfig = field(default_factory=ServeConfig)


def _buckets_to_list(buckets) -> list[str]:
    return [b.label.rstrip("%") for b in buckets]


def _buckets_from_list(items) -> tuple[RatioBucket, ...]:
    if isinstance(items, str):
        items = [items]
    return tuple(parse_bucket(str(item)) for item in items)


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return {
        "seed": cfg.seed,
        "batch_size": cfg.batch_size,
        "steps": cfg.steps,
        "lr": cfg.lr,
        "adam_beta1": cfg.adam_beta1,
        "adam_beta2": cfg.adam_beta2,
        "image_size": cfg.image_size,
        "checkpoint_every": cfg.checkpoint_every,
        "grad_clip": cfg.grad_clip,
        "augment_crop": cfg.augment_crop,
        "generator": {
            "base_width": cfg.generator.base_width,
            "num_blocks": cfg.generator.num_blocks,
            "rates": list(cfg.generator.block.rates),
            "residual_mode": cfg.generator.block.residual_mode,
            "kernel_size": cfg.generator.block.kernel_size,
        },
        "discriminator": {
            "num_layers": cfg.discriminator.num_layers,
            "base_channels": cfg.discriminator.base_channels,
            "target_mode": cfg.discriminator.target_mode,
            "spectral_norm": cfg.discriminator.spectral_norm,
        },
        "losses": {
            "lambda_adv": cfg.losses.lambda_adv,
            "lambda_rec": cfg.losses.lambda_rec,
            "lambda_per": cfg.losses.lambda_per,
            "lambda_sty": cfg.losses.lambda_sty,
        },
        "masks": {
            "kernel_size": cfg.mask_kernel_size,
            "sigma": cfg.mask_sigma,
            "buckets": _buckets_to_list(cfg.mask_buckets),
        },
        "extractor": {"source": cfg.extractor_source, "seed": cfg.extractor_seed},
    }


def train_config_from_dict(d: dict) -> TrainConfig:
    d = copy.deepcopy(d)
    gen = d.pop("generator", {})
    disc = d.pop("discriminator", {})
    losses = d.pop("losses", {})
    masks = d.pop("masks", {})
    extractor = d.pop("extractor", {})
    block = AotBlockConfig(
        width=gen.get("base_width", 256),
        rates=tuple(gen.pop("rates", (1, 2, 4, 8))),
        residual_mode=gen.pop("residual_mode", "gated"),
        kernel_size=gen.pop("kernel_size", 3),
    )
    gen_cfg = GeneratorConfig(
        base_width=gen.pop("base_width", 256),
        num_blocks=gen.pop("num_blocks", 8),
        block=block,
    )
    _reject_unknown(gen, "generator")
    disc_cfg = DiscriminatorConfig(
        num_layers=disc.pop("num_layers", 4),
        base_channels=disc.pop("base_channels", 64),
        target_mode=disc.pop("target_mode", "sm"),
        spectral_norm=disc.pop("spectral_norm", True),
    )
    _reject_unknown(disc, "discriminator")
    loss_cfg = LossWeights(
        lambda_adv=losses.pop("lambda_adv", 0.01),
        lambda_rec=losses.pop("lambda_rec", 1.0),
        lambda_per=losses.pop("lambda_per", 0.1),
        lambda_sty=losses.pop("lambda_sty", 250.0),
    )
    _reject_unknown(losses, "losses")
    mask_kernel = int(masks.pop("kernel_size", DEFAULT_BLUR_KERNEL))
    mask_sigma = masks.pop("sigma", None)
    if mask_sigma is not None:
        mask_sigma = float(mask_sigma)
    buckets = _buckets_from_list(masks.pop("buckets", _buckets_to_list(paper_buckets())))
    _reject_unknown(masks, "masks")
    ex_source = extractor.pop("source", "auto")
    ex_seed = extractor.pop("seed", 0)
    _reject_unknown(extractor, "extractor")
    grad_clip = d.pop("grad_clip", None)
    cfg = TrainConfig(
        seed=int(d.pop("seed", 0)),
        batch_size=int(d.pop("batch_size", 8)),
        steps=int(d.pop("steps", 1000)),
        lr=float(d.pop("lr", 1e-4)),
        adam_beta1=float(d.pop("adam_beta1", 0.0)),
        adam_beta2=float(d.pop("adam_beta2", 0.9)),
        image_size=int(d.pop("image_size", 512)),
        checkpoint_every=int(d.pop("checkpoint_every", 250)),
        grad_clip=None if grad_clip is None else float(grad_clip),
        augment_crop=bool(d.pop("augment_crop", False)),
        generator=gen_cfg,
        discriminator=disc_cfg,
        losses=loss_cfg,
        mask_kernel_size=mask_kernel,
        mask_sigma=mask_sigma,
        mask_buckets=buckets,
        extractor_source=ex_source,
        extractor_seed=ex_seed,
    )
    _reject_unknown(d, "train")
    return cfg


def run_config_to_dict(cfg: RunConfig) -> dict:
    return {
        "train": train_config_to_dict(cfg.train),
        "eval": {
            "seed": cfg.eval.seed,
            "batch_size": cfg.eval.batch_size,
            "buckets": _buckets_to_list(cfg.eval.buckets),
        },
        "serve": {
            "port": cfg.serve.port,
            "max_inflight": cfg.serve.max_inflight,
            "payload_limit_mb": cfg.serve.payload_limit_mb,
            "max_side": cfg.serve.max_side,
        },
    }


def run_config_from_dict(d: dict) -> RunConfig:
    d = copy.deepcopy(d)
    train = train_config_from_dict(d.pop("train", {}))
    ev = d.pop("eval", {})
    eval_cfg = EvalConfig(
        seed=ev.pop("seed", 0),
        batch_size=ev.pop("batch_size", 8),
        buckets=_buckets_from_list(ev.pop("buckets", _buckets_to_list(paper_buckets()))),
    )
    _reject_unknown(ev, "eval")
    sv = d.pop("serve", {})
    serve_cfg = ServeConfig(
        port=sv.pop("port", 8000),
        max_inflight=sv.pop("max_inflight", 4),
        payload_limit_mb=sv.pop("payload_limit_mb", 16),
        max_side=sv.pop("max_side", 512),
    )
    _reject_unknown(sv, "serve")
    _reject_unknown(d, "config")
    return RunConfig(train=train, eval=eval_cfg, serve=serve_cfg)


def _reject_unknown(leftover: dict, section: str) -> None:
    if leftover:
        raise ConfigError(f"unknown keys in {section!r} config: {sorted(leftover)}")


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(path: str | Path | None, base: RunConfig | None = None) -> RunConfig:
    """Parse a YAML config on top of `base` (or paper defaults). Strict keys."""
    tree = run_config_to_dict(base if base is not None else RunConfig())
    if path is None:
        return run_config_from_dict(tree)
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return run_config_from_dict(_deep_merge(tree, raw))


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply dotted ``key=value`` overrides on top of a config, strictly.

    Values are parsed as YAML scalars, so ``lr=1e-3``, ``spectral_norm=false``
    and ``rates=[1,2]`` all coerce naturally.
    """
    tree = run_config_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw_value = item.split("=", 1)
        keys = dotted.strip().split(".")
        node = tree
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"unknown config key {dotted!r}")
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        parsed = yaml.safe_load(raw_value)
        current = node[keys[-1]]
        # YAML 1.1 reads "5e-5" as a string; coerce to the field's numeric type
        if isinstance(parsed, str) and isinstance(current, (int, float)) and not isinstance(current, bool):
            try:
                parsed = type(current)(parsed)
            except ValueError:
                pass
        node[keys[-1]] = parsed
    return run_config_from_dict(tree)


def config_hash(cfg: TrainConfig) -> str:
    payload = json.dumps(train_config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
