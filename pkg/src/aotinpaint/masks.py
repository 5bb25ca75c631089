"""Free-form hole masks and patch-level discriminator targets.

Masks are (B, 1, H, W) float tensors with value 1 on missing pixels and 0 on
known pixels. The soft patch label blurs the inverted mask with a normalized
Gaussian at full resolution, then block-averages down to the discriminator's
prediction-map resolution, so a patch straddling a hole boundary gets a target
between 0 (fully synthesized) and 1 (fully real).
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
import torch
import torch.nn.functional as F

from .errors import UnreachableBucketError
from .validation import check_mask

DEFAULT_BLUR_KERNEL = 70  # pixels, in image space


@dataclass(frozen=True)
class RatioBucket:
    """Half-open hole-to-image ratio range [low, high]."""

    low: float
    high: float

    def __post_init__(self):
        if not (0.0 <= self.low < self.high <= 1.0):
            raise ValueError(f"invalid bucket [{self.low}, {self.high}]")

    @property
    def label(self) -> str:
        return f"{self.low * 100:g}-{self.high * 100:g}%"

    def contains(self, ratio: float) -> bool:
        return self.low <= ratio <= self.high


def paper_buckets() -> tuple[RatioBucket, ...]:
    """The six standard evaluation buckets, 1-10% through 50-60%."""
    edges = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    return tuple(RatioBucket(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))


def parse_bucket(text: str) -> RatioBucket:
    """Parse '40-50' or '0.4-0.5' into a RatioBucket."""
    lo, hi = (float(p) for p in text.replace("%", "").split("-"))
    if hi > 1.0:  # percent notation
        lo, hi = lo / 100.0, hi / 100.0
    return RatioBucket(lo, hi)


def compute_hole_ratio(mask: torch.Tensor) -> float:
    """Fraction of elements equal to 1."""
    check_mask(mask)
    return float(mask.double().mean())


def _paint_stroke(canvas: np.ndarray, rng: np.random.Generator, value: int, budget_px: float) -> None:
    """Draw one random-walk thick stroke (or occasionally a rectangle).

    Stroke size adapts to the remaining pixel budget so the hole ratio can
    approach a target without large overshoots.
    """
    h, w = canvas.shape
    side = min(h, w)
    scale = float(np.clip(np.sqrt(max(budget_px, 1.0)) / 4.0, 2.0, side / 8.0))
    if rng.random() < 0.2:
        rw = int(rng.integers(2, max(3, int(2 * scale))))
        rh = int(rng.integers(2, max(3, int(2 * scale))))
        x0 = int(rng.integers(0, max(1, w - rw)))
        y0 = int(rng.integers(0, max(1, h - rh)))
        cv2.rectangle(canvas, (x0, y0), (x0 + rw, y0 + rh), value, -1)
        return
    thickness = max(2, int(scale))
    x = int(rng.integers(0, w))
    y = int(rng.integers(0, h))
    angle = rng.uniform(0, 2 * np.pi)
    for _ in range(int(rng.integers(2, 6))):
        angle += rng.uniform(-1.0, 1.0)
        length = rng.uniform(scale, 4 * scale)
        x2 = int(np.clip(x + length * np.cos(angle), 0, w - 1))
        y2 = int(np.clip(y + length * np.sin(angle), 0, h - 1))
        cv2.line(canvas, (x, y), (x2, y2), value, thickness)
        x, y = x2, y2


def generate_free_form_mask(
    height: int,
    width: int,
    bucket: RatioBucket,
    seed: int,
    max_attempts: int = 64,
) -> torch.Tensor:
    """Generate a (1, 1, H, W) brush-stroke mask whose hole ratio lies in `bucket`.

    Pure function of its arguments. Strokes are accumulated until the ratio
    enters the bucket; overshooting restarts the attempt. Buckets denser than
    0.5 are painted in the complementary direction (erasing strokes from an
    all-hole canvas) so extreme ratios remain reachable.
    """
    if height < 32 or width < 32:
        raise ValueError("mask size must be at least 32x32")
    rng = np.random.default_rng(seed)
    total = height * width
    for _ in range(max_attempts):
        target = rng.uniform(bucket.low, bucket.high)
        invert = target > 0.5
        canvas = np.full((height, width), 255 if invert else 0, dtype=np.uint8)
        paint = 0 if invert else 255
        while True:
            ratio = float(np.count_nonzero(canvas)) / total
            if bucket.contains(ratio):
                mask = torch.from_numpy((canvas > 0).astype(np.float32))
                return mask.view(1, 1, height, width)
            overshot = ratio < bucket.low if invert else ratio > bucket.high
            if overshot:
                break
            _paint_stroke(canvas, rng, paint, abs(target - ratio) * total)
    raise UnreachableBucketError(
        f"could not reach bucket {bucket.label} on a {height}x{width} canvas "
        f"within {max_attempts} attempts"
    )


def generate_mask_batch(
    n: int,
    height: int,
    width: int,
    buckets: tuple[RatioBucket, ...],
    rng: np.random.Generator,
) -> torch.Tensor:
    """Sample n masks, each from a bucket drawn uniformly from `buckets`."""
    masks = []
    for _ in range(n):
        bucket = buckets[int(rng.integers(0, len(buckets)))]
        seed = int(rng.integers(0, 2**63 - 1))
        masks.append(generate_free_form_mask(height, width, bucket, seed))
    return torch.cat(masks, dim=0)


def _gaussian_kernel(kernel_size: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian; even sizes are padded up to the next odd size."""
    k = kernel_size if kernel_size % 2 == 1 else kernel_size + 1
    r = k // 2
    xs = np.arange(-r, r + 1, dtype=np.float64)
    kern = np.exp(-0.5 * (xs / sigma) ** 2)
    return kern / kern.sum()


def _reflect_pad_blur(arr: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Separable blur of (B, 1, H, W) float64 with reflect boundary handling.

    Reflect padding keeps constant inputs exactly constant, which the label
    contract relies on (an all-known mask must blur to an all-ones label).
    """
    r = len(kern) // 2
    b, c, h, w = arr.shape
    padded = np.pad(arr, ((0, 0), (0, 0), (r, r), (0, 0)), mode="reflect")
    out = np.zeros_like(arr)
    for j, kj in enumerate(kern):
        out += kj * padded[:, :, j : j + h, :]
    padded = np.pad(out, ((0, 0), (0, 0), (0, 0), (r, r)), mode="reflect")
    out = np.zeros_like(arr)
    for j, kj in enumerate(kern):
        out += kj * padded[:, :, :, j : j + w]
    return out


def _check_divisible(mask: torch.Tensor, factor: int) -> None:
    h, w = mask.shape[-2:]
    if h % factor or w % factor:
        raise ValueError(f"mask spatial size {h}x{w} not divisible by factor {factor}")


def soft_patch_label(
    mask: torch.Tensor,
    downsample_factor: int,
    kernel_size: int = DEFAULT_BLUR_KERNEL,
    sigma: float | None = None,
) -> torch.Tensor:
    """Soft patch-level target: Gaussian-blur (1 - mask), then area-downsample.

    The blur runs at full image resolution with the configured kernel size
    (default 70, matching the receptive-field growth of the four stride-2
    discriminator convolutions), so values near hole boundaries fall smoothly
    from 1 to 0.
    """
    check_mask(mask)
    _check_divisible(mask, downsample_factor)
    if sigma is None:
        sigma = kernel_size / 6.0
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    inv = (1.0 - mask).to(torch.float64).numpy()
    blurred = _reflect_pad_blur(inv, _gaussian_kernel(kernel_size, sigma))
    label = F.avg_pool2d(torch.from_numpy(blurred), downsample_factor)
    return label.clamp(0.0, 1.0).to(torch.float32)


def hard_patch_label(mask: torch.Tensor, downsample_factor: int) -> torch.Tensor:
    """Hard binary patch target: area-downsample (1 - mask), threshold at 0.5.

    A patch exactly half covered by the hole counts as fake (label 0).
    """
    check_mask(mask)
    _check_divisible(mask, downsample_factor)
    frac_known = F.avg_pool2d((1.0 - mask).to(torch.float64), downsample_factor)
    return (frac_known > 0.5).to(torch.float32)


def patch_mask_weight(mask: torch.Tensor, downsample_factor: int) -> torch.Tensor:
    """Per-patch hole coverage in [0, 1]: area-downsampled mask.

    Used to restrict the generator's adversarial loss to synthesized patches;
    cells partially covering a hole keep fractional weight.
    """
    check_mask(mask)
    _check_divisible(mask, downsample_factor)
    return F.avg_pool2d(mask.to(torch.float64), downsample_factor).to(torch.float32)


def save_mask(mask: torch.Tensor, path) -> None:
    """Write a single mask as an 8-bit single-channel PNG (255 = hole)."""
    check_mask(mask)
    if mask.shape[0] != 1:
        raise ValueError("save_mask expects a single mask (batch size 1)")
    arr = (mask[0, 0].numpy() * 255).astype(np.uint8)
    if not cv2.imwrite(str(path), arr):
        raise OSError(f"failed to write mask to {path}")


def load_mask(path, tolerance: int = 0) -> torch.Tensor:
    """Load an 8-bit single-channel PNG mask; 255 means hole.

    Pixels farther than `tolerance` from both 0 and 255 are rejected as
    ambiguous; within tolerance they snap to the nearer endpoint.
    """
    arr = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if arr is None:
        raise FileNotFoundError(f"cannot read mask file {path}")
    dist = np.minimum(arr.astype(np.int64), 255 - arr.astype(np.int64))
    bad = int((dist > tolerance).sum())
    if bad:
        raise ValueError(f"{path}: {bad} pixels are neither 0 nor 255 (tolerance {tolerance})")
    mask = (arr >= 128).astype(np.float32)
    return torch.from_numpy(mask).view(1, 1, *arr.shape)
