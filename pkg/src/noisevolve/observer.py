"""Similarity metric, empirical chance distributions, the ideal observer,
and the two supplemental baselines (single-trial acceptance classification
images; a pixel white-noise GA).

Chance level is established empirically: correlate many random noise images
with a fixed target and read significance thresholds off the sorted sample.
Chance distributions are target-specific, so they are keyed and cached per
(model, target, n, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import read_container, write_container
from .errors import DegenerateCriterion, InvalidInput, UndefinedCorrelation
from .evolve import GAConfig, Generation, advance_generation, initial_generation, migration_rate, schedule_pairs
from .noise import Individual, sample_noise
from .validation import as_image, as_rng, image_hash


def pixel_correlation(a, b) -> float:
    """Pearson correlation over all pixels of two equal-size images."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInput(f"image sizes differ: {a.shape} vs {b.shape}")
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.linalg.norm(ac)
    nb = np.linalg.norm(bc)
    if na == 0.0 or nb == 0.0:
        raise UndefinedCorrelation("correlation with a constant image is undefined")
    return float(np.clip(ac @ bc / (na * nb), -1.0, 1.0))


def correlations_to_target(images: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Vectorized pixel correlation of an (n, side, side) stack to a target."""
    flat = images.reshape(len(images), -1)
    tc = target.ravel() - target.mean()
    tn = np.linalg.norm(tc)
    if tn == 0.0:
        raise UndefinedCorrelation("correlation with a constant image is undefined")
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0.0):
        raise UndefinedCorrelation("correlation with a constant image is undefined")
    return np.clip(centered @ tc / (norms * tn), -1.0, 1.0)


@dataclass
class ChanceDistribution:
    """Sorted correlations of random noise images against one target.

    Significance claims should rest on at least 1000 samples; smaller
    distributions are fine for thresholds in tests and rejection sampling.
    """

    target_id: str
    samples: np.ndarray  # ascending
    model_id: str = ""

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=np.float64))
        if len(self.samples) == 0:
            raise InvalidInput("chance distribution needs at least one sample")

    @property
    def n(self) -> int:
        return len(self.samples)

    def quantile(self, pct: float) -> float:
        return float(np.percentile(self.samples, pct))

    def percentile_of(self, value: float) -> float:
        """Percentage of samples strictly below ``value``."""
        return 100.0 * float(np.searchsorted(self.samples, value, side="left")) / self.n

    def save(self, path) -> None:
        write_container(
            path, "chance", {"target_id": self.target_id, "model_id": self.model_id},
            {"samples": self.samples},
        )

    @classmethod
    def load(cls, path) -> "ChanceDistribution":
        _, meta, arrays = read_container(path, expect_kind="chance")
        return cls(meta["target_id"], arrays["samples"], meta["model_id"])


def percentile_of(chance: ChanceDistribution, value: float) -> float:
    return chance.percentile_of(value)


def build_chance(model, target, n: int = 2000, rng=None, jobs: int = 1) -> ChanceDistribution:
    """Correlate ``n`` independent noise samples with ``target``.

    Each sample uses its own stream spawned from ``rng``, so the result is
    deterministic for a given seeded generator regardless of ``jobs``.
    """
    target = as_image(target, side=model.side_)
    rng = as_rng(rng)
    streams = rng.spawn(n)

    def chunk(streams_slice):
        return [
            pixel_correlation(sample_noise(model, s).image, target) for s in streams_slice
        ]

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        size = max(1, n // (jobs * 4))
        pieces = [streams[i : i + size] for i in range(0, n, size)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = [v for piece in pool.map(chunk, pieces) for v in piece]
    else:
        values = chunk(streams)
    return ChanceDistribution(image_hash(target), np.sort(values), model.model_id_)


def chance_cache_path(cache_dir, model, target, n: int, seed) -> Path:
    return Path(cache_dir) / f"chance-{model.model_id_}-{image_hash(target)}-n{n}-s{seed}.bin"


def cached_chance(model, target, n: int, seed: int, cache_dir=None, jobs: int = 1) -> ChanceDistribution:
    """Disk-cached build_chance keyed by (model, target, n, seed)."""
    if cache_dir is None:
        return build_chance(model, target, n, as_rng(seed), jobs=jobs)
    path = chance_cache_path(cache_dir, model, target, n, seed)
    if path.exists():
        return ChanceDistribution.load(path)
    chance = build_chance(model, target, n, as_rng(seed), jobs=jobs)
    path.parent.mkdir(parents=True, exist_ok=True)
    chance.save(path)
    return chance


def ideal_choice(pair, target, rng=None) -> int:
    """Index (0 or 1) of the pair member more correlated with the target.

    Exact ties are broken uniformly at random.
    """
    a, b = pair
    ca = pixel_correlation(a.image if isinstance(a, Individual) else a, target)
    cb = pixel_correlation(b.image if isinstance(b, Individual) else b, target)
    if ca > cb:
        return 0
    if cb > ca:
        return 1
    return int(as_rng(rng).random() < 0.5)


@dataclass
class StopRule:
    """Halting criterion for simulated runs; max_generations always applies."""

    percentile: float | None = None
    correlation: float | None = None
    max_generations: int = 200

    def __post_init__(self):
        if self.max_generations < 1:
            raise InvalidInput("max_generations must be >= 1")


@dataclass
class IdealRunResult:
    mean_history: list[float] = field(default_factory=list)
    max_history: list[float] = field(default_factory=list)
    generations_to_percentile: dict[float, int] = field(default_factory=dict)
    best: Individual | None = None
    converged: bool = False
    stopped_at_generation: int = 0
    truncation_ceiling: float | None = None
    target_id: str = ""

    def write_curves(self, path) -> None:
        """Plain-text tabular export of the per-generation curves."""
        lines = ["generation\tmean\tmax"]
        for g, (m, mx) in enumerate(zip(self.mean_history, self.max_history), start=1):
            lines.append(f"{g}\t{m:.6f}\t{mx:.6f}")
        Path(path).write_text("\n".join(lines) + "\n")


def _population_stats(gen: Generation, target) -> tuple[np.ndarray, float, float]:
    images = np.stack([ind.image for ind in gen.population])
    corrs = correlations_to_target(images, target)
    return corrs, float(corrs.mean()), float(corrs.max())


def _simulate_trials(gen: Generation, corrs: np.ndarray, rng) -> None:
    """Answer every scheduled pair with the ideal choice."""
    for t in range(gen.n_trials):
        i, j = gen.schedule[t]
        if corrs[i] > corrs[j]:
            winner = i
        elif corrs[j] > corrs[i]:
            winner = j
        else:
            winner = i if rng.random() < 0.5 else j
        gen.answer(t, winner)


def run_ideal(
    model,
    target,
    config: GAConfig,
    stop: StopRule,
    rng,
    chance: ChanceDistribution | None = None,
    track_percentiles=(95.0, 99.0, 99.99),
    checkpoint_dir=None,
) -> IdealRunResult:
    """Run the GA with the ideal observer as the ranker.

    Records per-generation population mean/max correlation, the first
    generation at which each tracked chance percentile was exceeded, and
    halts at the stop criterion (converged=False if max_generations ran out).
    """
    target = as_image(target, side=model.side_)
    rng = as_rng(rng)
    needs_chance = (
        stop.percentile is not None
        or config.initial_rejection_percentile is not None
        or bool(track_percentiles)
    )
    if chance is None and needs_chance:
        chance = build_chance(model, target, config.chance_n, rng.spawn(1)[0])

    thresholds = {}
    if chance is not None:
        for pct in sorted(set(track_percentiles) | ({stop.percentile} if stop.percentile else set())):
            thresholds[float(pct)] = chance.quantile(pct)

    result = IdealRunResult(
        target_id=image_hash(target),
        truncation_ceiling=model.truncation_ceiling(target),
    )
    gen = initial_generation(model, config, rng, target=target, chance=chance)
    while True:
        corrs, mean_c, max_c = _population_stats(gen, target)
        result.mean_history.append(mean_c)
        result.max_history.append(max_c)
        for pct, thr in thresholds.items():
            if pct not in result.generations_to_percentile and max_c > thr:
                result.generations_to_percentile[pct] = gen.index
        result.best = gen.population[int(np.argmax(corrs))]
        result.stopped_at_generation = gen.index

        if stop.percentile is not None and max_c > thresholds[float(stop.percentile)]:
            result.converged = True
            break
        if stop.correlation is not None and max_c >= stop.correlation:
            result.converged = True
            break
        if gen.index >= stop.max_generations:
            break

        _simulate_trials(gen, corrs, rng)
        if checkpoint_dir is not None:
            from .evolve import save_generation

            save_generation(Path(checkpoint_dir) / f"gen-{gen.index:04d}.bin", gen, config, rng=rng)
        gen = advance_generation(gen, config, model, rng)
    return result


@dataclass
class SuperstitiousResult:
    classification_image: np.ndarray
    accepted: int
    trials: int
    correlation: float
    criterion_percentile: float


def superstitious_sim(
    model,
    target,
    trials: int,
    criterion_percentile: float,
    rng,
    chance: ChanceDistribution | None = None,
    block: int = 512,
) -> SuperstitiousResult:
    """Single-image acceptance observer: accept a noise image iff its target
    correlation exceeds the chance distribution's criterion percentile, then
    estimate the template as mean(accepted) - mean(rejected).

    With a vacuous criterion (<= 0, accept everything) the rejected-class
    mean falls back to the model's expected noise image so the two-class
    estimator stays defined; the result is then a pure Monte-Carlo null.
    """
    if trials < 100:
        raise InvalidInput("need at least 100 trials")
    target = as_image(target, side=model.side_)
    rng = as_rng(rng)
    if chance is None:
        chance = build_chance(model, target, 2000, rng.spawn(1)[0])
    threshold = chance.quantile(criterion_percentile) if criterion_percentile > 0 else -np.inf

    side = model.side_
    sum_acc = np.zeros(side * side)
    sum_rej = np.zeros(side * side)
    n_acc = 0
    n_rej = 0
    done = 0
    while done < trials:
        count = min(block, trials - done)
        if model.sampling == "gaussian":
            S = rng.normal(0.0, model.score_std_, size=(count, model.n_components_))
        else:
            S = rng.uniform(model.score_min_, model.score_max_, size=(count, model.n_components_))
        images = S @ model.pixel_components_.T + model.base_image_.ravel()
        corrs = correlations_to_target(images.reshape(count, side, side), target)
        acc = corrs > threshold
        sum_acc += images[acc].sum(axis=0)
        sum_rej += images[~acc].sum(axis=0)
        n_acc += int(acc.sum())
        n_rej += int((~acc).sum())
        done += count

    if n_acc == 0:
        raise DegenerateCriterion("criterion accepted zero trials")
    expected_noise = model.render_scores((model.score_min_ + model.score_max_) / 2.0).ravel()
    mean_acc = sum_acc / n_acc
    mean_rej = sum_rej / n_rej if n_rej > 0 else expected_noise
    ci = (mean_acc - mean_rej).reshape(side, side)
    return SuperstitiousResult(
        classification_image=ci,
        accepted=n_acc,
        trials=trials,
        correlation=pixel_correlation(ci, target),
        criterion_percentile=criterion_percentile,
    )


def run_whitenoise_baseline(
    side: int,
    target,
    config: GAConfig,
    budget: int,
    rng,
    chance: ChanceDistribution | None = None,
    track_percentiles=(),
) -> IdealRunResult:
    """Ideal-observer GA over per-pixel independent uniform noise.

    The GA loop matches run_ideal; the operators are the pixel-space
    analogues: crossover interleaves odd/even pixel indices (raster order)
    and mutation adds N(0, (mut_scale * pixel_std)^2) to every pixel, with
    pixel_std that of the Uniform(0, 1) sampler. No initial rejection is
    applied: the baseline starts from plain random images.
    """
    if budget < 1:
        raise InvalidInput("budget must be >= 1")
    target = as_image(target, side=side)
    rng = as_rng(rng)
    P = config.population
    n_px = side * side
    pixel_std = 1.0 / np.sqrt(12.0)

    thresholds = {}
    if chance is not None:
        for pct in track_percentiles:
            thresholds[float(pct)] = chance.quantile(pct)

    pop = rng.uniform(0.0, 1.0, size=(P, n_px))
    result = IdealRunResult(target_id=image_hash(target))
    for g in range(1, budget + 1):
        corrs = correlations_to_target(pop.reshape(P, side, side), target)
        result.mean_history.append(float(corrs.mean()))
        result.max_history.append(float(corrs.max()))
        for pct, thr in thresholds.items():
            if pct not in result.generations_to_percentile and corrs.max() > thr:
                result.generations_to_percentile[pct] = g
        best_slot = int(np.argmax(corrs))
        result.best = Individual(
            scores=pop[best_slot].copy(),
            image=pop[best_slot].reshape(side, side).copy(),
            id=f"white-g{g:04d}s{best_slot:03d}",
            birth_generation=g,
            provenance="white-noise",
        )
        result.stopped_at_generation = g
        if g == budget:
            break

        pairs = schedule_pairs(P, config.views, rng)
        wins = np.zeros(P, dtype=np.int64)
        for i, j in pairs:
            if corrs[i] > corrs[j]:
                wins[i] += 1
            elif corrs[j] > corrs[i]:
                wins[j] += 1
            else:
                wins[i if rng.random() < 0.5 else j] += 1
        pool = np.repeat(np.arange(P), wins)
        picks = rng.choice(pool, size=P, replace=True)
        new_pop = pop[picks].copy()
        cross_mask = rng.random(P) < config.p_cross
        partners = rng.integers(0, P, size=P)
        for i in np.where(cross_mask)[0]:
            new_pop[i, 1::2] = pop[picks[partners[i]], 1::2]
        mut_mask = rng.random(P) < config.p_mut
        for i in np.where(mut_mask)[0]:
            new_pop[i] = new_pop[i] + rng.normal(0.0, config.mut_scale * pixel_std, size=n_px)
        mig_p = migration_rate(g + 1, config.mig_initial, config.mig_decay)
        mig_mask = rng.random(P) < mig_p
        for i in np.where(mig_mask)[0]:
            new_pop[i] = rng.uniform(0.0, 1.0, size=n_px)
        pop = new_pop
    return result


__all__ = [
    "pixel_correlation",
    "correlations_to_target",
    "ChanceDistribution",
    "build_chance",
    "cached_chance",
    "chance_cache_path",
    "percentile_of",
    "ideal_choice",
    "StopRule",
    "IdealRunResult",
    "run_ideal",
    "superstitious_sim",
    "SuperstitiousResult",
    "run_whitenoise_baseline",
]
