"""Noise individuals: random points in the model's score space.

Scores are drawn uniformly from each component's observed corpus range (or
from N(0, std_k) when the model was configured with gaussian sampling).
Rendered pixels are cached eagerly because downstream code reads images far
more often than it creates them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, RejectionStuck
from .validation import as_image, image_hash


@dataclass
class Individual:
    """One noise image: a score vector plus its cached rendering."""

    scores: np.ndarray
    image: np.ndarray
    id: str
    birth_generation: int = 1
    provenance: str = "random"
    lineage_wins: int = 0


def sample_noise(model, rng, birth_generation: int = 1, provenance: str = "random") -> Individual:
    """Draw one Individual from the model's noise distribution."""
    if model.sampling == "gaussian":
        scores = rng.normal(0.0, model.score_std_)
    else:
        scores = rng.uniform(model.score_min_, model.score_max_)
    ident = f"n{rng.integers(0, 2**63):016x}"
    return Individual(
        scores=scores,
        image=model.render_scores(scores),
        id=ident,
        birth_generation=birth_generation,
        provenance=provenance,
    )


def sample_rejecting(
    model,
    rng,
    target,
    chance,
    percentile: float = 80.0,
    max_rejections: int = 10_000,
    birth_generation: int = 1,
) -> Individual:
    """Sample until the correlation with ``target`` is below the chance
    distribution's ``percentile`` value.

    ``chance`` must have been built against the same target (checked via the
    stored target hash). A run of ``max_rejections`` consecutive rejections
    raises RejectionStuck, which signals a degenerate target.
    """
    from .observer import pixel_correlation

    target = as_image(target, side=model.side_)
    if chance.target_id != image_hash(target):
        raise InvalidInput("chance distribution was built against a different target")
    if percentile >= 100.0:
        return sample_noise(model, rng, birth_generation=birth_generation)
    threshold = chance.quantile(percentile)
    for _ in range(max_rejections):
        candidate = sample_noise(model, rng, birth_generation=birth_generation)
        if pixel_correlation(candidate.image, target) < threshold:
            return candidate
    raise RejectionStuck(
        f"{max_rejections} consecutive samples at or above the {percentile}th percentile"
    )


__all__ = ["Individual", "sample_noise", "sample_rejecting"]
