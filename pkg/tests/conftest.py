import numpy as np
import pytest
import torch

from aotinpaint.features import FeatureExtractor


def synthetic_images(n: int, size: int, seed: int = 0) -> torch.Tensor:
    """Deterministic smooth test images: gradients plus a few soft blobs."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / max(size - 1, 1)
    imgs = np.zeros((n, 3, size, size), dtype=np.float64)
    for i in range(n):
        for c in range(3):
            a, b, phase = rng.uniform(-1, 1, size=3)
            img = a * xs + b * ys + 0.3 * np.sin(2 * np.pi * (xs + ys + phase))
            for _ in range(2):
                cy, cx = rng.uniform(0.2, 0.8, size=2)
                rad = rng.uniform(0.1, 0.3)
                blob = np.exp(-(((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * rad**2)))
                img = img + rng.uniform(-0.8, 0.8) * blob
            lo, hi = img.min(), img.max()
            imgs[i, c] = 2 * (img - lo) / max(hi - lo, 1e-9) - 1
    return torch.from_numpy(imgs).to(torch.float32)


def random_binary_mask(size: int, p: float, seed: int) -> torch.Tensor:
    rng = np.random.default_rng(seed)
    m = (rng.random((1, 1, size, size)) < p).astype(np.float32)
    return torch.from_numpy(m)


@pytest.fixture(scope="session")
def tiny_extractor() -> FeatureExtractor:
    """Small fixed-random extractor: three stages, cheap enough for grad checks."""
    return FeatureExtractor(
        source="fixed_random", stage_widths=(8, 16, 32), stage_convs=(1, 1, 2), seed=1
    )


@pytest.fixture()
def images16():
    return synthetic_images(16, 64, seed=3)


@pytest.fixture(scope="session")
def toy_checkpoint(tmp_path_factory):
    """A 2-step desk checkpoint at 32px for CLI/service tests."""
    from aotinpaint.config import TrainConfig
    from aotinpaint.data import ArraySource
    from aotinpaint.generator import GeneratorConfig
    from aotinpaint.masks import RatioBucket
    from aotinpaint.trainer import train

    out = tmp_path_factory.mktemp("toyckpt")
    cfg = TrainConfig(
        seed=0,
        batch_size=2,
        steps=2,
        image_size=32,
        checkpoint_every=0,
        generator=GeneratorConfig.desk(base_width=16, num_blocks=1, rates=(1, 2)),
        mask_buckets=(RatioBucket(0.2, 0.4),),
    )
    train(cfg, ArraySource(synthetic_images(4, 32, seed=0)), out_dir=out)
    return out / "checkpoint-final.pt"


@pytest.fixture(scope="session")
def desk_checkpoint(tmp_path_factory):
    """Untrained desk-geometry checkpoint (width 64, 8 blocks) for timing tests."""
    from aotinpaint.config import TrainConfig
    from aotinpaint.trainer import init_state, save_checkpoint

    out = tmp_path_factory.mktemp("deskckpt")
    state = init_state(TrainConfig.desk())
    return save_checkpoint(state, out / "desk.pt")
