"""Command-line entry point: train, infer, eval, genmask, serve, export-weights.

Exit codes are stable and documented:
  0 success; 2 usage or config error; 3 missing input file;
  4 shape mismatch; 5 incompatible or corrupt checkpoint;
  6 data/corpus error; 7 training divergence.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np
import torch
import torch.nn.functional as F

from . import data as data_mod
from . import masks as masks_mod
from .config import (
    RunConfig,
    TrainConfig,
    apply_overrides,
    load_run_config,
    train_config_to_dict,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DivergenceError,
    ShapeMismatchError,
    UnreachableBucketError,
)
from .features import FeatureExtractor
from .generator import compose
from .metrics import evaluate
from .trainer import load_generator, train

EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SHAPE_MISMATCH = 4
EXIT_BAD_CHECKPOINT = 5
EXIT_DATA = 6
EXIT_DIVERGENCE = 7

_ERROR_CODES = (
    (ShapeMismatchError, EXIT_SHAPE_MISMATCH),
    (UnreachableBucketError, EXIT_USAGE),
    (ConfigError, EXIT_USAGE),
    (CheckpointError, EXIT_BAD_CHECKPOINT),
    (FileNotFoundError, EXIT_MISSING_FILE),
    (DataError, EXIT_DATA),
    (DivergenceError, EXIT_DIVERGENCE),
)


def _fail(exc: Exception) -> "click.exceptions.Exit":
    for etype, code in _ERROR_CODES:
        if isinstance(exc, etype):
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(code)
    raise exc


def _load_config(ctx, base: RunConfig | None = None) -> RunConfig:
    cfg = load_run_config(ctx.obj.get("config"), base=base)
    cfg = apply_overrides(cfg, ctx.obj.get("overrides", ()))
    seed = ctx.obj.get("seed")
    if seed is not None:
        cfg = apply_overrides(cfg, [f"train.seed={seed}", f"eval.seed={seed}"])
    return cfg


@click.group()
@click.option("--config", type=click.Path(), default=None, help="YAML config file.")
@click.option("--seed", type=int, default=None, help="Override all config seeds.")
@click.option("--device", default="cpu", show_default=True, help="Compute device.")
@click.option(
    "--override", "overrides", multiple=True, metavar="KEY=VALUE",
    help="Config override (dotted key, repeatable). Overrides win over the file.",
)
@click.pass_context
def main(ctx, config, seed, device, overrides):
    """Free-form image inpainting: training, inference, evaluation, serving."""
    if device != "cpu":
        click.echo(f"warning: device {device!r} unavailable, using cpu", err=True)
    ctx.obj = {"config": config, "seed": seed, "overrides": list(overrides)}


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Image corpus directory.")
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Checkpoint/CSV output directory.")
@click.option("--preset", type=click.Choice(["paper", "desk"]), default="paper", show_default=True)
@click.option("--resume", type=click.Path(), default=None, help="Checkpoint to resume from.")
@click.pass_context
def train_cmd(ctx, data_dir, out_dir, preset, resume):
    """Train generator and discriminator on an image corpus."""
    try:
        base = RunConfig(train=TrainConfig.desk()) if preset == "desk" else None
        tcfg = _load_config(ctx, base=base).train
        dataset = data_mod.source_from_dir(
            data_dir, target_size=tcfg.image_size, random_crop=tcfg.augment_crop
        )
        state = train(tcfg, dataset, out_dir=out_dir, resume_from=resume, log_every=25)
        click.echo(f"trained {state.step} steps; checkpoints in {out_dir}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


main.add_command(train_cmd, name="train")


def _load_image_native(path) -> torch.Tensor:
    from PIL import Image

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"image not found: {p}")
    with Image.open(p) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return (torch.from_numpy(arr).permute(2, 0, 1) / 255.0 * 2.0 - 1.0).unsqueeze(0)


@main.command()
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--image", "image_path", type=click.Path(), required=True)
@click.option("--mask", "mask_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def infer(checkpoint, image_path, mask_path, out_path):
    """Inpaint one image under a mask PNG (255 = hole) and write the result."""
    try:
        gen, _, fingerprint = load_generator(checkpoint)
        x = _load_image_native(image_path)
        if not Path(mask_path).exists():
            raise FileNotFoundError(f"mask not found: {mask_path}")
        m = masks_mod.load_mask(mask_path)
        if x.shape[-2:] != m.shape[-2:]:
            raise ShapeMismatchError(
                f"image {tuple(x.shape[-2:])} vs mask {tuple(m.shape[-2:])}"
            )
        h, w = x.shape[-2:]
        ph, pw = (-h) % 4, (-w) % 4
        with torch.no_grad():
            x_p = F.pad(x, (0, pw, 0, ph), mode="replicate") if (ph or pw) else x
            m_p = F.pad(m, (0, pw, 0, ph)) if (ph or pw) else m
            out = gen(x_p * (1.0 - m_p), m_p)[:, :, :h, :w]
            z = compose(x, out.clamp(-1.0, 1.0), m)
        data_mod.save_png(z, out_path)
        click.echo(f"wrote {out_path} (model {fingerprint})")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("eval")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--corpus", type=click.Path(), required=True)
@click.option("--buckets", default="paper", show_default=True,
              help="'paper' or comma list like '10-20,40-50'.")
@click.option("--size", type=int, default=None, help="Evaluation resolution (defaults to the trained size).")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def eval_cmd(ctx, checkpoint, corpus, buckets, size, out_dir):
    """Score a checkpoint on a corpus; writes metrics.csv and metrics.txt."""
    try:
        cfg = _load_config(ctx)
        gen, tcfg, _ = load_generator(checkpoint)
        if buckets == "paper":
            bucket_list = masks_mod.paper_buckets()
        else:
            bucket_list = tuple(masks_mod.parse_bucket(b) for b in buckets.split(","))
        dataset = data_mod.source_from_dir(corpus, target_size=size or tcfg.image_size)
        extractor = FeatureExtractor(
            source=tcfg.extractor_source, seed=tcfg.extractor_seed
        )
        report = evaluate(
            gen, dataset, bucket_list, seed=cfg.eval.seed,
            extractor=extractor, batch_size=cfg.eval.batch_size,
            mask_kernel_size=tcfg.mask_kernel_size,
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(report.to_csv())
        (out / "metrics.txt").write_text(report.format_table() + "\n")
        click.echo(report.format_table())
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@click.option("--height", type=int, default=512, show_default=True)
@click.option("--width", type=int, default=512, show_default=True)
@click.option("--bucket", default="40-50", show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output PNG (count=1) or directory.")
@click.pass_context
def genmask(ctx, height, width, bucket, count, out_path):
    """Generate free-form mask PNGs in a hole-ratio bucket."""
    try:
        seed = ctx.obj.get("seed") or 0
        b = masks_mod.parse_bucket(bucket)
        out = Path(out_path)
        if count == 1 and out.suffix.lower() == ".png":
            masks_mod.save_mask(masks_mod.generate_free_form_mask(height, width, b, seed), out)
            click.echo(f"wrote {out}")
            return
        out.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            m = masks_mod.generate_free_form_mask(height, width, b, seed + i)
            masks_mod.save_mask(m, out / f"mask-{i:04d}.png")
        click.echo(f"wrote {count} masks to {out}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--port", type=int, default=None)
@click.option("--max-inflight", type=int, default=None)
@click.pass_context
def serve(ctx, checkpoint, port, max_inflight):
    """Run the HTTP inference service."""
    try:
        cfg = _load_config(ctx).serve
        if not Path(checkpoint).exists():
            raise CheckpointError(f"checkpoint not found: {checkpoint}")
        from .service import run_server

        run_server(
            checkpoint,
            port=port if port is not None else cfg.port,
            max_inflight=max_inflight if max_inflight is not None else cfg.max_inflight,
            payload_limit_mb=cfg.payload_limit_mb,
            max_side=cfg.max_side,
        )
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("export-weights")
@click.option("--checkpoint", type=click.Path(), default=None,
              help="Source checkpoint (generator export).")
@click.option("--what", type=click.Choice(["generator", "extractor"]), default="generator",
              show_default=True)
@click.option("--extractor-seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def export_weights(checkpoint, what, extractor_seed, out_path):
    """Export named float32 tensors (.npz, little-endian) for other runtimes."""
    try:
        if what == "extractor":
            FeatureExtractor(source="fixed_random", seed=extractor_seed).save_weights(out_path)
            click.echo(f"wrote extractor weights to {out_path}")
            return
        if checkpoint is None:
            raise ConfigError("--checkpoint is required for generator export")
        gen, tcfg, fingerprint = load_generator(checkpoint)
        tensors = {
            name: p.detach().numpy().astype("<f4")
            for name, p in gen.state_dict().items()
        }
        meta = json.dumps(
            {"config": train_config_to_dict(tcfg), "fingerprint": fingerprint}
        ).encode()
        tensors["__meta_json__"] = np.frombuffer(meta, dtype=np.uint8)
        np.savez(out_path, **tensors)
        click.echo(f"wrote {len(tensors) - 1} tensors to {out_path}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


if __name__ == "__main__":
    main()
