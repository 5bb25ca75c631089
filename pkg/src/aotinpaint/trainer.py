"""Alternating GAN optimization with deterministic checkpoint/resume.

Each step performs one discriminator update (generator output detached) and
one generator update on the full weighted objective. All stochastic choices
(batch indices, mask buckets, mask seeds) flow from a single serialized RNG,
so restoring a checkpoint and continuing reproduces an uninterrupted run
bit-for-bit on the same platform.
"""

from __future__ import annotations

import csv
import hashlib
import os
import tempfile
import warnings
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig, config_hash, train_config_from_dict, train_config_to_dict
from .discriminator import Discriminator, build_discriminator, d_loss, discriminator_target, g_adv_loss
from .errors import CheckpointError, DataError, DivergenceError
from .features import FeatureExtractor
from .generator import Generator, build_generator, compose
from .losses import l1_rec, perceptual_and_style, total_loss
from .masks import generate_mask_batch, patch_mask_weight

CHECKPOINT_FORMAT_VERSION = 1
HISTORY_LIMIT = 10000


@dataclass
class LossReport:
    step: int
    adv_g: float
    adv_d: float
    rec: float
    per: float
    sty: float
    total: float


class TrainState:
    """Everything needed to continue training: models, optimizers, RNG, history."""

    def __init__(
        self,
        config: TrainConfig,
        gen: Generator,
        disc: Discriminator,
        opt_g: torch.optim.Adam,
        opt_d: torch.optim.Adam,
        extractor: FeatureExtractor,
        rng: np.random.Generator,
        step: int = 0,
    ):
        self.config = config
        self.gen = gen
        self.disc = disc
        self.opt_g = opt_g
        self.opt_d = opt_d
        self.extractor = extractor
        self.rng = rng
        self.step = step
        self.history: deque[LossReport] = deque(maxlen=HISTORY_LIMIT)


def init_state(config: TrainConfig) -> TrainState:
    gen = build_generator(config.generator, seed=config.seed)
    disc = build_discriminator(config.discriminator, seed=config.seed + 1)
    betas = (float(config.adam_beta1), float(config.adam_beta2))
    opt_g = torch.optim.Adam(gen.parameters(), lr=config.lr, betas=betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=config.lr, betas=betas)
    extractor = FeatureExtractor(source=config.extractor_source, seed=config.extractor_seed)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xA07]))
    return TrainState(config, gen, disc, opt_g, opt_d, extractor, rng)


def train_step(state: TrainState, images: torch.Tensor, masks: torch.Tensor) -> LossReport:
    """One discriminator update followed by one generator update."""
    cfg = state.config
    factor = state.disc.config.downsample_factor
    state.gen.train()
    state.disc.train()

    masked = images * (1.0 - masks)
    out = state.gen(masked, masks)
    z = compose(images, out, masks)

    label = discriminator_target(
        masks, cfg.discriminator.target_mode, factor, cfg.mask_kernel_size, cfg.mask_sigma
    )
    state.opt_d.zero_grad(set_to_none=True)
    loss_d = d_loss(state.disc(z.detach()), state.disc(images), label)
    if not torch.isfinite(loss_d):
        raise DivergenceError(f"discriminator loss non-finite at step {state.step + 1}")
    loss_d.backward()
    if cfg.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(state.disc.parameters(), cfg.grad_clip)
    state.opt_d.step()

    state.opt_g.zero_grad(set_to_none=True)
    adv = g_adv_loss(state.disc(z), patch_mask_weight(masks, factor))
    rec = l1_rec(images, out)
    per, sty = perceptual_and_style(images, z, state.extractor)
    total = total_loss(adv, rec, per, sty, cfg.losses)
    total.backward()
    if cfg.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(state.gen.parameters(), cfg.grad_clip)
    state.opt_g.step()

    state.step += 1
    report = LossReport(
        step=state.step,
        adv_g=float(adv.detach()),
        adv_d=float(loss_d.detach()),
        rec=float(rec.detach()),
        per=float(per.detach()),
        sty=float(sty.detach()),
        total=float(total.detach()),
    )
    state.history.append(report)
    return report


def train(
    config: TrainConfig,
    dataset,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
    log_every: int = 0,
) -> TrainState:
    """Run the configured number of steps with freshly sampled masks per batch."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if resume_from is not None:
        state = load_checkpoint(resume_from, expected_config=config)
    else:
        state = init_state(config)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    run_reports: list[LossReport] = []
    size = config.image_size
    while state.step < config.steps:
        indices = state.rng.integers(0, len(dataset), size=config.batch_size)
        try:
            images = dataset.load_batch(indices.tolist(), rng=state.rng)
        except DataError as exc:
            raise DataError(f"{exc} (at step {state.step + 1})") from exc
        masks = generate_mask_batch(config.batch_size, size, size, config.mask_buckets, state.rng)
        try:
            report = train_step(state, images, masks)
        except DivergenceError as exc:
            raise DivergenceError(f"{exc} (training aborted)") from exc
        run_reports.append(report)
        if log_every and report.step % log_every == 0:
            print(
                f"step {report.step}: rec={report.rec:.4f} adv_g={report.adv_g:.4f} "
                f"adv_d={report.adv_d:.4f} total={report.total:.4f}"
            )
        if out_path is not None and config.checkpoint_every > 0:
            if report.step % config.checkpoint_every == 0:
                save_checkpoint(state, out_path / f"checkpoint-{report.step:06d}.pt")
    if out_path is not None:
        save_checkpoint(state, out_path / "checkpoint-final.pt")
        export_loss_csv(run_reports, out_path / "loss_history.csv")
    return state


def export_loss_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "adv_g", "adv_d", "rec", "per", "sty", "total"])
        for r in reports:
            writer.writerow([r.step, r.adv_g, r.adv_d, r.rec, r.per, r.sty, r.total])


def save_checkpoint(state: TrainState, path: str | Path) -> Path:
    """Atomic write: serialize to a temp file, then rename into place."""
    path = Path(path)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": train_config_to_dict(state.config),
        "config_hash": config_hash(state.config),
        "seed": state.config.seed,
        "step": state.step,
        "generator": state.gen.state_dict(),
        "discriminator": state.disc.state_dict(),
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict(),
        "rng": state.rng.bit_generator.state,
        "extractor_fingerprint": state.extractor.fingerprint(),
        "history": [asdict(r) for r in state.history],
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _read_payload(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path} is not a checkpoint archive")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format {payload['format_version']} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    return payload


def _dynamics_fields(config_dict: dict) -> dict:
    """Config minus fields that may legitimately change across a resume."""
    out = dict(config_dict)
    out.pop("steps", None)
    out.pop("checkpoint_every", None)
    return out


def load_checkpoint(path, expected_config: TrainConfig | None = None) -> TrainState:
    """Restore a full TrainState; continuing matches an uninterrupted run.

    `expected_config` may extend the step budget or change the checkpoint
    cadence; any other difference is an incompatibility.
    """
    payload = _read_payload(path)
    config = train_config_from_dict(payload["config"])
    if expected_config is not None:
        if _dynamics_fields(train_config_to_dict(expected_config)) != _dynamics_fields(
            payload["config"]
        ):
            raise CheckpointError(f"checkpoint {path} was written with a different config")
        config = expected_config
    state = init_state(config)
    try:
        state.gen.load_state_dict(payload["generator"])
        state.disc.load_state_dict(payload["discriminator"])
        state.opt_g.load_state_dict(payload["opt_g"])
        state.opt_d.load_state_dict(payload["opt_d"])
    except (RuntimeError, KeyError) as exc:
        raise CheckpointError(f"checkpoint {path} incompatible with config: {exc}") from exc
    state.rng.bit_generator.state = payload["rng"]
    state.step = payload["step"]
    for item in payload.get("history", []):
        state.history.append(LossReport(**item))
    if payload.get("extractor_fingerprint") != state.extractor.fingerprint():
        warnings.warn(
            "feature extractor differs from the one used when the checkpoint was written; "
            "resumed losses will not match the original run",
            stacklevel=2,
        )
    return state


def load_generator(path) -> tuple[Generator, TrainConfig, str]:
    """Inference-only load: (eval-mode generator, its config, file fingerprint)."""
    payload = _read_payload(path)
    config = train_config_from_dict(payload["config"])
    gen = Generator(config.generator)
    try:
        gen.load_state_dict(payload["generator"])
    except (RuntimeError, KeyError) as exc:
        raise CheckpointError(f"checkpoint {path} incompatible: {exc}") from exc
    gen.eval()
    for p in gen.parameters():
        p.requires_grad_(False)
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
    return gen, config, digest
