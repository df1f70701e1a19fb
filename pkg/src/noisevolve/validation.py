"""Input validation and RNG helpers used by the estimator-style API."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InvalidInput


def as_image(x, side: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a square 2-D float64 luminance array.

    Raises InvalidInput for non-square, non-finite or wrongly sized input.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"expected a square 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("image contains non-finite pixels")
    if side is not None and arr.shape[0] != side:
        raise InvalidInput(f"expected side {side}, got {arr.shape[0]}")
    return arr


def as_image_batch(X, side: int | None = None) -> np.ndarray:
    """Coerce ``X`` to shape (n, side, side).

    Accepts a single image, a list of images, an (n, side, side) stack or a
    flattened (n, side*side) matrix when ``side`` is given.
    """
    if isinstance(X, (list, tuple)):
        X = np.stack([as_image(im, side) for im in X])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        if side is not None and X.shape == (X.shape[0], side * side):
            X = X.reshape(X.shape[0], side, side)
        else:
            X = X[None, ...]
    if X.ndim != 3 or X.shape[1] != X.shape[2]:
        raise InvalidInput(f"expected (n, side, side) images, got shape {X.shape}")
    if side is not None and X.shape[1] != side:
        raise InvalidInput(f"expected side {side}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("image batch contains non-finite pixels")
    return X


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, a seed, or None (fresh OS entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def derived_rng(*key: int) -> np.random.Generator:
    """Deterministic stream derived from an integer key path.

    Used where reproducibility across process restarts matters (the session
    service re-derives its streams from the stored seed instead of carrying
    mutable RNG state).
    """
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def image_hash(image) -> str:
    """Short content hash of an image array (used for cache keys)."""
    arr = np.ascontiguousarray(np.asarray(image, dtype=np.float64))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]
