"""Image corpus ingestion: manifests, deterministic splits, batch loading.

A manifest is a line-delimited text file (``id<TAB>sha256<TAB>bytes``) stored
next to the corpus; entries are kept in lexicographic id order so iteration is
deterministic. Loading decodes, center-crops to square, resizes to the target
size, and rescales to [-1, 1].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import DataError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass
class ImageSource:
    root: Path
    entries: list[tuple[str, str, int]]  # (file id, sha256, byte size)
    split: str
    target_size: int
    random_crop: bool = False  # training augmentation; evaluation stays center-crop

    def __post_init__(self):
        self.root = Path(self.root)
        self.entries = sorted(self.entries, key=lambda e: e[0])

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e[0] for e in self.entries]

    def load_batch(self, indices, rng: np.random.Generator | None = None) -> torch.Tensor:
        imgs = []
        for i in indices:
            file_id = self.entries[i][0]
            offset = tuple(rng.random(2)) if (self.random_crop and rng is not None) else None
            try:
                imgs.append(load_image(self.root / file_id, self.target_size, crop_offset=offset))
            except Exception as exc:
                raise DataError(f"failed to load {file_id!r}: {exc}") from exc
        return torch.stack(imgs, dim=0)

    def manifest_path(self) -> Path:
        return self.root / f"manifest-{self.split}.txt"

    def save_manifest(self) -> Path:
        path = self.manifest_path()
        lines = [f"{fid}\t{digest}\t{size}\n" for fid, digest, size in self.entries]
        path.write_text("".join(lines))
        return path

    @classmethod
    def from_manifest(cls, root, split: str, target_size: int) -> "ImageSource":
        path = Path(root) / f"manifest-{split}.txt"
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        entries = []
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            fid, digest, size = line.split("\t")
            entries.append((fid, digest, int(size)))
        return cls(root=Path(root), entries=entries, split=split, target_size=target_size)


@dataclass
class ArraySource:
    """In-memory stand-in for a directory corpus (estimator and test inputs)."""

    images: torch.Tensor  # (N, 3, H, W) in [-1, 1]
    split: str = "train"
    target_size: int = 0

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[1] != 3:
            raise DataError(f"expected (N, 3, H, W) images, got {tuple(self.images.shape)}")
        self.target_size = int(self.images.shape[-1])

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def load_batch(self, indices, rng: np.random.Generator | None = None) -> torch.Tensor:
        return self.images[list(indices)].clone()


@dataclass
class ManifestReport:
    total_files: int = 0
    rejected: list[tuple[str, str]] = field(default_factory=list)  # (id, reason)


def _scan(root: Path) -> list[Path]:
    return sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def build_manifest(
    root,
    split_fraction: float,
    seed: int,
    target_size: int = 256,
) -> tuple[ImageSource, ImageSource, ManifestReport]:
    """Scan a directory, verify decodability, and split deterministically.

    Corrupt files are excluded and reported, not fatal. The split is a seeded
    shuffle; no file lands in both splits. Manifests are persisted next to the
    corpus.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root {root} is not a directory")
    report = ManifestReport()
    good: list[tuple[str, str, int]] = []
    for path in _scan(root):
        report.total_files += 1
        rel = path.relative_to(root).as_posix()
        try:
            with Image.open(path) as im:
                im.load()
        except Exception as exc:
            report.rejected.append((rel, str(exc)))
            continue
        payload = path.read_bytes()
        good.append((rel, hashlib.sha256(payload).hexdigest(), len(payload)))
    if len(good) < 2:
        raise DataError(f"corpus at {root} has fewer than 2 decodable images")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(good))
    n_train = int(round(split_fraction * len(good)))
    n_train = min(max(n_train, 1), len(good) - 1)
    train_entries = [good[i] for i in order[:n_train]]
    test_entries = [good[i] for i in order[n_train:]]
    train = ImageSource(root=root, entries=train_entries, split="train", target_size=target_size)
    test = ImageSource(root=root, entries=test_entries, split="test", target_size=target_size)
    train.save_manifest()
    test.save_manifest()
    return train, test, report


def source_from_dir(
    root, target_size: int, split: str = "train", random_crop: bool = False
) -> ImageSource:
    """All decodable images under a directory as one source (no split)."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root {root} is not a directory")
    entries = []
    for path in _scan(root):
        rel = path.relative_to(root).as_posix()
        try:
            with Image.open(path) as im:
                im.load()
        except Exception:
            continue
        payload = path.read_bytes()
        entries.append((rel, hashlib.sha256(payload).hexdigest(), len(payload)))
    if not entries:
        raise DataError(f"no decodable images under {root}")
    return ImageSource(
        root=root, entries=entries, split=split, target_size=target_size, random_crop=random_crop
    )


def load_image(path, target_size: int, crop_offset: tuple[float, float] | None = None) -> torch.Tensor:
    """Decode, crop to square, resize, scale to [-1, 1]. Returns (3, S, S).

    `crop_offset` places the square within the slack of the longer side as
    (vertical, horizontal) fractions in [0, 1]; None means center crop.
    """
    with Image.open(path) as im:
        im = im.convert("RGB")
        w, h = im.size
        side = min(w, h)
        if crop_offset is None:
            top = (h - side) // 2
            left = (w - side) // 2
        else:
            top = int(round(crop_offset[0] * (h - side)))
            left = int(round(crop_offset[1] * (w - side)))
        im = im.crop((left, top, left + side, top + side))
        if side != target_size:
            im = im.resize((target_size, target_size), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32)
    return torch.from_numpy(arr).permute(2, 0, 1) / 255.0 * 2.0 - 1.0


def to_uint8(batch: torch.Tensor) -> np.ndarray:
    """[-1, 1] float batch -> (B, H, W, 3) uint8."""
    arr = ((batch.detach().clamp(-1, 1) + 1.0) * 0.5 * 255.0).round()
    return arr.to(torch.uint8).permute(0, 2, 3, 1).numpy()


def save_png(image: torch.Tensor, path) -> None:
    """Write a single (3, H, W) or (1, 3, H, W) image in [-1, 1] as PNG."""
    if image.ndim == 4:
        if image.shape[0] != 1:
            raise ValueError("save_png expects a single image")
        image = image[0]
    Image.fromarray(to_uint8(image.unsqueeze(0))[0]).save(path)
