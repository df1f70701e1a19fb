"""Image corpus ingestion and the synthetic desk-scale corpus generator.

Working format: square 2-D float64 luminance arrays in [0, 1]. Files are
8-bit only at the I/O boundary. Grayscale conversion uses the standard luma
weights (0.299/0.587/0.114, Pillow mode "L"); resizing uses box/area
averaging, which preserves mean luminance for integer downsampling factors.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInput, NoImages
from .validation import derived_rng

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".pgm"}


@dataclass
class Corpus:
    """An ordered stack of same-side images with ids and optional labels."""

    images: np.ndarray  # (n, side, side) float64 in [0, 1]
    source_ids: list[str]
    labels: list[str] | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise InvalidInput(f"corpus images must be (n, side, side), got {self.images.shape}")
        if len(self.source_ids) != len(self.images):
            raise InvalidInput("source_ids length does not match image count")
        if len(set(self.source_ids)) != len(self.source_ids):
            raise InvalidInput("source_ids must be unique")
        if self.labels is not None and len(self.labels) != len(self.images):
            raise InvalidInput("labels length does not match image count")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def side(self) -> int:
        return self.images.shape[1]


def load_image(path, side: int | None = None) -> np.ndarray:
    """Load one image file as grayscale [0, 1], optionally resized to side."""
    with Image.open(path) as im:
        im = im.convert("L")
        if side is not None and im.size != (side, side):
            im = im.resize((side, side), resample=Image.BOX)
        return np.asarray(im, dtype=np.float64) / 255.0


def save_image_png(path, image) -> None:
    """Write an image as 8-bit grayscale PNG, clipping to [0, 1] at export."""
    arr = np.asarray(image, dtype=np.float64)
    arr = np.clip(arr, 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)


def load_corpus(path, side: int = 128) -> Corpus:
    """Load every decodable PNG/JPEG/PGM under ``path`` into a Corpus.

    Files are taken in sorted-filename order so loading is deterministic.
    Undecodable files are skipped with a warning; an empty result raises
    NoImages. If a ``labels.json`` file ({filename: label}) is present the
    labels are attached.
    """
    if side < 16:
        raise InvalidInput("working images must have side >= 16")
    root = Path(path)
    if not root.is_dir():
        raise NoImages(f"{path} is not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise NoImages(f"no image files found in {path}")

    label_map = {}
    labels_file = root / "labels.json"
    if labels_file.exists():
        label_map = json.loads(labels_file.read_text())

    images, ids, labels = [], [], []
    for p in files:
        try:
            images.append(load_image(p, side=side))
        except Exception as exc:  # undecodable or truncated file
            warnings.warn(f"skipping {p.name}: {exc}")
            continue
        ids.append(p.name)
        labels.append(label_map.get(p.name, ""))
    if not images:
        raise NoImages(f"no decodable images in {path}")
    return Corpus(np.stack(images), ids, labels if label_map else None)


def _texture_image(rng, side: int) -> np.ndarray:
    # band-limited 1/f^alpha noise, optionally orientation-biased
    spectrum = np.fft.fft2(rng.standard_normal((side, side)))
    fy = np.fft.fftfreq(side)[:, None]
    fx = np.fft.fftfreq(side)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    alpha = rng.uniform(0.8, 1.6)
    envelope = radius ** -alpha
    if rng.random() < 0.5:
        theta = rng.uniform(0, np.pi)
        angle = np.arctan2(fy, fx)
        envelope = envelope * (1.0 + 0.8 * np.cos(2 * (angle - theta)))
    return np.fft.ifft2(spectrum * envelope).real


def _edges_image(rng, side: int) -> np.ndarray:
    # a handful of soft oriented edges/bars on a smooth background
    ys, xs = np.mgrid[0:side, 0:side].astype(np.float64)
    img = rng.uniform(-0.3, 0.3) * (ys / side - 0.5)
    for _ in range(int(rng.integers(2, 6))):
        theta = np.deg2rad(rng.choice([0.0, 45.0, 90.0, 135.0]) + rng.uniform(-12, 12))
        cx, cy = rng.uniform(0.15, 0.85, size=2) * side
        d = (xs - cx) * np.cos(theta) + (ys - cy) * np.sin(theta)
        img = img + rng.uniform(-1.0, 1.0) * np.tanh(d / rng.uniform(1.0, side / 12))
    return img


def synthesize_test_corpus(n: int, side: int = 64, seed: int = 0) -> Corpus:
    """Generate ``n`` procedural images labelled by generator family.

    Even indices are filtered-noise textures, odd indices oriented-edge
    layouts, so any corpus with n >= 2 has both classes. Every image is
    produced from its own seed-derived stream, which makes the corpus
    deterministic in (n, side, seed) and insensitive to generation order.
    """
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if side < 16:
        raise InvalidInput("working images must have side >= 16")
    images, ids, labels = [], [], []
    for i in range(n):
        rng = derived_rng(seed, i)
        if i % 2 == 0:
            img, family = _texture_image(rng, side), "texture"
        else:
            img, family = _edges_image(rng, side), "edges"
        lo, hi = img.min(), img.max()
        img = (img - lo) / (hi - lo) if hi > lo else np.full_like(img, 0.5)
        images.append(img)
        ids.append(f"{family}-{i:05d}")
        labels.append(family)
    return Corpus(np.stack(images), ids, labels)


def corpus_mean_image(corpus: Corpus) -> np.ndarray:
    return corpus.images.mean(axis=0)


def export_corpus(corpus: Corpus, out_dir) -> None:
    """Write a corpus back to disk as PNGs plus labels.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label_map = {}
    for i, sid in enumerate(corpus.source_ids):
        name = sid if sid.lower().endswith(".png") else f"{sid}.png"
        save_image_png(out / name, corpus.images[i])
        if corpus.labels is not None:
            label_map[name] = corpus.labels[i]
    if label_map:
        (out / "labels.json").write_text(json.dumps(label_map, indent=0))


__all__ = [
    "Corpus",
    "load_corpus",
    "load_image",
    "save_image_png",
    "synthesize_test_corpus",
    "corpus_mean_image",
    "export_corpus",
]
