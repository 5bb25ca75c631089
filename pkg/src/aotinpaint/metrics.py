"""Evaluation battery: L1 error, PSNR, SSIM, FID, and the bucketed report.

PSNR and SSIM operate on [0, 1] intensities (inputs arrive in [-1, 1] and are
rescaled internally). FID fits Gaussians to feature sets and evaluates the
Fréchet distance; the matrix square root goes through eigendecompositions of
symmetric matrices with negative eigenvalues clipped at zero.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from . import masks as masks_mod
from .features import FeatureExtractor
from .generator import Generator, inpaint
from .masks import RatioBucket
from .validation import check_same_shape

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _to_unit(x: torch.Tensor) -> torch.Tensor:
    return (x + 1.0) * 0.5


def psnr(x: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """Per-sample PSNR in dB with peak 1, capped at 100 for (near-)identical pairs."""
    check_same_shape(x, z, "x/z")
    mse = ((_to_unit(x) - _to_unit(z)) ** 2).flatten(1).mean(dim=1).double()
    out = torch.full_like(mse, PSNR_CAP_DB)
    nz = mse > 0
    out[nz] = torch.clamp(10.0 * torch.log10(1.0 / mse[nz]), max=PSNR_CAP_DB)
    return out


def _ssim_window(dtype) -> torch.Tensor:
    r = SSIM_WINDOW // 2
    xs = torch.arange(-r, r + 1, dtype=torch.float64)
    k = torch.exp(-0.5 * (xs / SSIM_SIGMA) ** 2)
    k = k / k.sum()
    return (k[:, None] * k[None, :]).to(dtype).view(1, 1, SSIM_WINDOW, SSIM_WINDOW)


def ssim(x: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """Per-sample single-scale SSIM, Gaussian 11x11 window, averaged over channels."""
    check_same_shape(x, z, "x/z")
    if min(x.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    a = _to_unit(x).double()
    b = _to_unit(z).double()
    bsz, ch = a.shape[:2]
    a = a.reshape(bsz * ch, 1, *a.shape[-2:])
    b = b.reshape(bsz * ch, 1, *b.shape[-2:])
    w = _ssim_window(a.dtype)
    mu_a = F.conv2d(a, w)
    mu_b = F.conv2d(b, w)
    var_a = F.conv2d(a * a, w) - mu_a**2
    var_b = F.conv2d(b * b, w) - mu_b**2
    cov = F.conv2d(a * b, w) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + SSIM_C1) / (mu_a**2 + mu_b**2 + SSIM_C1)
    cs = (2 * cov + SSIM_C2) / (var_a + var_b + SSIM_C2)
    return (lum * cs).reshape(bsz, ch, -1).mean(dim=(1, 2))


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray
) -> float:
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 sqrt(S1^(1/2) S2 S1^(1/2)))."""
    diff = mu1 - mu2
    root1 = _sqrt_psd(sigma1)
    inner = root1 @ sigma2 @ root1
    inner = (inner + inner.T) / 2.0
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr_sqrt = float(np.sqrt(vals).sum())
    return float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * tr_sqrt)


def fid_info(real_feats, fake_feats, eps: float = 1e-6) -> tuple[float, dict]:
    """FID plus metadata about covariance regularization."""
    r = np.asarray(real_feats, dtype=np.float64)
    f = np.asarray(fake_feats, dtype=np.float64)
    if r.ndim != 2 or f.ndim != 2 or r.shape[1] != f.shape[1]:
        raise ValueError("feature sets must be rank-2 with matching dimension")
    dim = r.shape[1]
    if min(r.shape[0], f.shape[0]) <= dim:
        warnings.warn(
            f"feature set sizes ({r.shape[0]}, {f.shape[0]}) do not exceed dimension {dim}; "
            "covariance estimates will be degenerate",
            stacklevel=2,
        )
    mu_r, mu_f = r.mean(axis=0), f.mean(axis=0)
    sig_r = np.atleast_2d(np.cov(r, rowvar=False))
    sig_f = np.atleast_2d(np.cov(f, rowvar=False))
    regularized = False
    floor = 1e-10 * max(1.0, float(np.trace(sig_r) + np.trace(sig_f)))
    if (
        min(np.linalg.eigvalsh(sig_r).min(), np.linalg.eigvalsh(sig_f).min()) < floor
        or not np.isfinite(sig_r).all()
        or not np.isfinite(sig_f).all()
    ):
        sig_r = sig_r + eps * np.eye(dim)
        sig_f = sig_f + eps * np.eye(dim)
        regularized = True
    value = max(frechet_distance(mu_r, sig_r, mu_f, sig_f), 0.0)
    return value, {"regularized": regularized, "eps": eps}


def fid(real_feats, fake_feats, eps: float = 1e-6) -> float:
    """Fréchet distance between Gaussian fits of two feature sets."""
    return fid_info(real_feats, fake_feats, eps)[0]


@dataclass
class BucketRow:
    bucket: RatioBucket
    l1: float
    psnr: float
    ssim: float
    fid: float
    count: int


@dataclass
class MetricsReport:
    rows: list[BucketRow]
    extractor_fingerprint: str
    seed: int
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bucket", "l1_1e-2", "psnr", "ssim", "fid", "count"])
        for row in self.rows:
            writer.writerow(
                [
                    row.bucket.label,
                    f"{row.l1 * 100:.4f}",
                    f"{row.psnr:.4f}",
                    f"{row.ssim:.4f}",
                    f"{row.fid:.4f}",
                    row.count,
                ]
            )
        return buf.getvalue()

    def format_table(self) -> str:
        """Metric-by-bucket grid, L1 in units of 1e-2."""
        headers = ["metric"] + [row.bucket.label for row in self.rows]
        lines = [
            ["L1(1e-2)"] + [f"{row.l1 * 100:.2f}" for row in self.rows],
            ["PSNR"] + [f"{row.psnr:.2f}" for row in self.rows],
            ["SSIM"] + [f"{row.ssim:.3f}" for row in self.rows],
            ["FID"] + [f"{row.fid:.2f}" for row in self.rows],
        ]
        widths = [max(len(r[i]) for r in [headers] + lines) for i in range(len(headers))]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        out = [fmt.format(*headers), fmt.format(*["-" * w for w in widths])]
        out += [fmt.format(*line) for line in lines]
        out.append(f"extractor: {self.extractor_fingerprint}  seed: {self.seed}")
        return "\n".join(out)


def evaluate(
    gen: Generator,
    dataset,
    buckets: tuple[RatioBucket, ...],
    seed: int,
    extractor: FeatureExtractor | None = None,
    batch_size: int = 8,
    mask_kernel_size: int = masks_mod.DEFAULT_BLUR_KERNEL,
) -> MetricsReport:
    """Score composed inpaintings per bucket with deterministic image-mask pairing.

    Every image in the dataset is evaluated once per bucket, against a mask
    seeded from (seed, bucket index, image index), so repeated runs and
    different models see identical pairs.
    """
    if extractor is None:
        extractor = FeatureExtractor(source="auto")
    gen.eval()
    rows = []
    regularized = False
    for b_idx, bucket in enumerate(buckets):
        l1_vals: list[float] = []
        psnr_vals: list[float] = []
        ssim_vals: list[float] = []
        real_feats: list[np.ndarray] = []
        fake_feats: list[np.ndarray] = []
        indices = list(range(len(dataset)))
        for start in range(0, len(indices), batch_size):
            batch_idx = indices[start : start + batch_size]
            x = dataset.load_batch(batch_idx)
            mask_list = []
            for i in batch_idx:
                child_seed = int(np.random.SeedSequence([seed, b_idx, i]).generate_state(1)[0])
                mask_list.append(
                    masks_mod.generate_free_form_mask(x.shape[-2], x.shape[-1], bucket, child_seed)
                )
            m = torch.cat(mask_list, dim=0)
            with torch.no_grad():
                z = inpaint(gen, x, m)
                l1_vals += ((x - z).abs().flatten(1).mean(dim=1)).tolist()
                psnr_vals += psnr(x, z).tolist()
                ssim_vals += ssim(x, z).tolist()
                real_feats.append(extractor.pooled_features(x).numpy())
                fake_feats.append(extractor.pooled_features(z).numpy())
        fid_value, info = fid_info(np.concatenate(real_feats), np.concatenate(fake_feats))
        regularized = regularized or info["regularized"]
        rows.append(
            BucketRow(
                bucket=bucket,
                l1=float(np.mean(l1_vals)),
                psnr=float(np.mean(psnr_vals)),
                ssim=float(np.mean(ssim_vals)),
                fid=fid_value,
                count=len(l1_vals),
            )
        )
    return MetricsReport(
        rows=rows,
        extractor_fingerprint=extractor.fingerprint(),
        seed=seed,
        metadata={"fid_regularized": regularized, "mask_kernel_size": mask_kernel_size},
    )
