"""Reconstruction evaluation: nearest-neighbor retrieval, the correlation
classifier, averaged reconstructions, and the two chance analyses (bootstrap
category proportions; max-correlation-over-database noise maxima).

All retrieval runs on pixel correlation at working resolution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .corpus import Corpus, save_image_png
from .errors import InvalidInput, UndefinedCorrelation
from .noise import sample_noise
from .observer import ChanceDistribution, pixel_correlation
from .validation import as_image, as_rng, image_hash


@dataclass
class RetrievalResult:
    query_id: str
    entries: list[tuple[str, float, str]]  # (source_id, correlation, label), descending
    k: int

    @property
    def source_ids(self) -> list[str]:
        return [sid for sid, _, _ in self.entries]

    def category_fraction(self, category: str) -> float:
        return sum(1 for _, _, lab in self.entries if lab == category) / len(self.entries)


def _db_correlations(query: np.ndarray, db: Corpus) -> np.ndarray:
    """Correlations of the query to every db image; constant db images get
    -inf and a warning (they cannot be ranked)."""
    flat = db.images.reshape(len(db), -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    qc = query.ravel() - query.mean()
    qn = np.linalg.norm(qc)
    if qn == 0.0:
        raise UndefinedCorrelation("query image is constant")
    corrs = np.full(len(db), -np.inf)
    ok = norms > 0.0
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} constant database images excluded from ranking")
    corrs[ok] = centered[ok] @ qc / (norms[ok] * qn)
    return corrs


def nearest_neighbors(query, db: Corpus, k: int = 20, query_id: str = "query") -> RetrievalResult:
    """Top-k database images by pixel correlation, ties broken by source_id.

    k larger than the database yields a truncated (full) ranking.
    """
    if k < 1:
        raise InvalidInput("k must be >= 1")
    query = as_image(query, side=db.side)
    corrs = _db_correlations(query, db)
    order = sorted(range(len(db)), key=lambda i: (-corrs[i], db.source_ids[i]))
    order = [i for i in order if np.isfinite(corrs[i])][: min(k, len(db))]
    labels = db.labels if db.labels is not None else [""] * len(db)
    entries = [(db.source_ids[i], float(corrs[i]), labels[i]) for i in order]
    return RetrievalResult(query_id=query_id, entries=entries, k=k)


@dataclass
class ClassifierResult:
    accuracy: float
    assignments: list[int]  # predicted target index per classified reconstruction
    true_labels: list[int]
    p_value: float
    n_targets: int
    excluded: list[int]  # indices of reconstructions skipped as constant


def correlation_classifier(reconstructions, targets, true_labels) -> ClassifierResult:
    """Assign each reconstruction to its argmax-correlation target and score
    accuracy against ``true_labels`` with a one-sided exact binomial test
    (chance = 1/n_targets)."""
    targets = [np.asarray(t, dtype=np.float64) for t in targets]
    if len(targets) < 2:
        raise InvalidInput("need at least 2 targets")
    if len(true_labels) != len(reconstructions):
        raise InvalidInput("true_labels must match reconstructions")
    assignments, kept_truth, excluded = [], [], []
    for i, recon in enumerate(reconstructions):
        recon = np.asarray(recon, dtype=np.float64)
        if np.ptp(recon) == 0.0:
            warnings.warn(f"reconstruction {i} is constant; excluded from classification")
            excluded.append(i)
            continue
        corrs = [pixel_correlation(recon, t) for t in targets]
        assignments.append(int(np.argmax(corrs)))
        kept_truth.append(int(true_labels[i]))
    if not assignments:
        raise InvalidInput("no classifiable reconstructions")
    hits = sum(a == t for a, t in zip(assignments, kept_truth))
    test = binomtest(hits, len(assignments), p=1.0 / len(targets), alternative="greater")
    return ClassifierResult(
        accuracy=hits / len(assignments),
        assignments=assignments,
        true_labels=kept_truth,
        p_value=float(test.pvalue),
        n_targets=len(targets),
        excluded=excluded,
    )


def average_reconstructions(images) -> np.ndarray:
    """Pixel-wise mean of equally sized images."""
    if len(images) == 0:
        raise InvalidInput("need at least one image")
    stack = [np.asarray(im, dtype=np.float64) for im in images]
    shape = stack[0].shape
    if any(im.shape != shape for im in stack):
        raise InvalidInput("images must share dimensions")
    return np.mean(stack, axis=0)


@dataclass
class BootstrapChance:
    proportions: np.ndarray  # sorted ascending
    category: str
    k: int

    @property
    def mean(self) -> float:
        return float(self.proportions.mean())

    def quantile(self, pct: float) -> float:
        return float(np.percentile(self.proportions, pct))

    def percentile_of(self, value: float) -> float:
        return 100.0 * float(np.searchsorted(self.proportions, value, side="left")) / len(self.proportions)


def bootstrap_category_chance(db: Corpus, k: int, b: int, category: str, rng) -> BootstrapChance:
    """Chance level for retrieval category proportions: ``b`` bootstrap draws
    of ``k`` images (with replacement), each scored by its fraction of
    ``category`` labels."""
    if db.labels is None:
        raise InvalidInput("database must be labeled")
    if k < 1 or k > len(db):
        raise InvalidInput(f"k must be in [1, {len(db)}]")
    rng = as_rng(rng)
    is_cat = np.asarray([lab == category for lab in db.labels], dtype=np.float64)
    draws = rng.integers(0, len(db), size=(b, k))
    props = is_cat[draws].mean(axis=1)
    return BootstrapChance(np.sort(props), category, k)


def retrieval_chance_max(model, db: Corpus, m: int, rng) -> ChanceDistribution:
    """For each of ``m`` noise images, the maximum correlation over the whole
    database: a stringent chance criterion for retrieval correlations.

    Sampling mirrors build_chance (one spawned stream per noise image), so
    with a single-image database the result equals the plain chance
    distribution for that image.
    """
    if len(db) == 0:
        raise InvalidInput("database is empty")
    rng = as_rng(rng)
    streams = rng.spawn(m)
    flat = db.images.reshape(len(db), -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInput("database contains constant images")
    maxima = np.empty(m)
    for i, stream in enumerate(streams):
        noise = sample_noise(model, stream).image.ravel()
        nc = noise - noise.mean()
        maxima[i] = np.max(centered @ nc / (norms * np.linalg.norm(nc)))
    return ChanceDistribution(f"max-over-{image_hash(db.images)}", np.sort(maxima), model.model_id_)


def export_gallery(path, query, retrieval: RetrievalResult, db: Corpus, gap: int = 4) -> None:
    """Write query + retrieved images as one horizontal PNG strip."""
    query = as_image(query, side=db.side)
    index = {sid: i for i, sid in enumerate(db.source_ids)}
    side = db.side
    images = [query] + [db.images[index[sid]] for sid in retrieval.source_ids]
    strip = np.ones((side, len(images) * (side + gap) - gap))
    for i, im in enumerate(images):
        x0 = i * (side + gap)
        strip[:, x0 : x0 + side] = np.clip(im, 0.0, 1.0)
    save_image_png(path, strip)


__all__ = [
    "RetrievalResult",
    "nearest_neighbors",
    "ClassifierResult",
    "correlation_classifier",
    "average_reconstructions",
    "BootstrapChance",
    "bootstrap_category_chance",
    "retrieval_chance_max",
    "export_gallery",
]
