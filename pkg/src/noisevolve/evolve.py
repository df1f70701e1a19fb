"""The genetic algorithm: pair scheduling, roulette selection, odd/even
component crossover, scaled mutation and decaying migration.

A Generation's schedule shows every population member exactly ``views``
times in randomized pairs (250 trials for the default 100 x 5). Once all
trials are answered the next generation is built in four fixed stages:
win-proportional resampling, crossover with probability p_cross, mutation
with probability p_mut, then per-slot replacement by fresh noise with the
generation's migration rate. The initial population is generation 1 and the
migration schedule starts when creating generation 2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .container import read_container, write_container
from .errors import InvalidInput, InvalidSchedule, InvalidState
from .noise import Individual, sample_noise, sample_rejecting
from .validation import as_rng


@dataclass
class GAConfig:
    population: int = 100
    views: int = 5
    p_cross: float = 0.4
    p_mut: float = 0.3
    mut_scale: float = 0.05
    mig_initial: float = 0.6
    mig_decay: float = 0.5
    initial_rejection_percentile: float | None = 80.0
    mutation_mode: str = "additive"  # "multiplicative" available for sensitivity studies
    chance_n: int = 2000

    def __post_init__(self):
        for name in ("p_cross", "p_mut", "mig_initial", "mig_decay"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInput(f"{name}={v} must be in [0, 1]")
        if self.population < 2:
            raise InvalidInput("population must be >= 2")
        if self.views < 1:
            raise InvalidInput("views must be >= 1")
        if self.mutation_mode not in ("additive", "multiplicative"):
            raise InvalidInput(f"unknown mutation_mode {self.mutation_mode!r}")

    def to_dict(self) -> dict:
        return {
            "population": self.population,
            "views": self.views,
            "p_cross": self.p_cross,
            "p_mut": self.p_mut,
            "mut_scale": self.mut_scale,
            "mig_initial": self.mig_initial,
            "mig_decay": self.mig_decay,
            "initial_rejection_percentile": self.initial_rejection_percentile,
            "mutation_mode": self.mutation_mode,
            "chance_n": self.chance_n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GAConfig":
        return cls(**d)


@dataclass
class Generation:
    index: int
    population: list[Individual]
    schedule: np.ndarray  # (n_trials, 2) population slot indices
    wins: np.ndarray  # (population,) int
    answered: np.ndarray  # (n_trials,) bool

    @property
    def n_trials(self) -> int:
        return len(self.schedule)

    @property
    def n_answered(self) -> int:
        return int(self.answered.sum())

    def all_answered(self) -> bool:
        return bool(self.answered.all())

    def answer(self, pair_index: int, winner_slot: int) -> None:
        """Record the winner of one scheduled trial."""
        if self.answered[pair_index]:
            raise InvalidState(f"trial {pair_index} already answered")
        i, j = self.schedule[pair_index]
        if winner_slot not in (i, j):
            raise InvalidInput(f"winner {winner_slot} is not in pair ({i}, {j})")
        self.wins[winner_slot] += 1
        self.answered[pair_index] = True


def schedule_pairs(population: int, views: int, rng) -> np.ndarray:
    """Randomized pairs in which every index appears exactly ``views`` times.

    Built by shuffling the index multiset and pairing consecutively, then
    locally repairing any self-pairs by swapping second elements.
    """
    if population < 2:
        raise InvalidSchedule("population must be >= 2")
    if (population * views) % 2 != 0:
        raise InvalidSchedule(f"population*views = {population * views} must be even")
    rng = as_rng(rng)
    idx = np.repeat(np.arange(population), views)
    rng.shuffle(idx)
    pairs = idx.reshape(-1, 2)
    for j in range(len(pairs)):
        attempts = 0
        while pairs[j, 0] == pairs[j, 1]:
            k = int(rng.integers(len(pairs)))
            if k == j:
                continue
            # swap second elements unless that would create a new self-pair
            if pairs[j, 0] != pairs[k, 1] and pairs[k, 0] != pairs[j, 1]:
                pairs[j, 1], pairs[k, 1] = pairs[k, 1], pairs[j, 1]
            attempts += 1
            if attempts > 10_000:
                raise InvalidSchedule("could not repair self-pairs (degenerate schedule)")
    return pairs


def select_proto(population: list[Individual], wins, rng) -> list[Individual]:
    """Roulette-wheel resampling: a pool with wins[i] copies of individual i,
    sampled with replacement down to the population size.

    Selected copies are tagged "winner" and their lineage_wins credit the
    source's wins from this generation; the input population is untouched.
    """
    wins = np.asarray(wins)
    if wins.sum() <= 0:
        raise InvalidState("cannot select from all-zero win counts")
    rng = as_rng(rng)
    pool = np.repeat(np.arange(len(population)), wins)
    picks = rng.choice(pool, size=len(population), replace=True)
    return [
        replace(
            population[i],
            provenance="winner",
            lineage_wins=population[i].lineage_wins + int(wins[i]),
        )
        for i in picks
    ]


def crossover(parent_a: Individual, parent_b: Individual, model, birth_generation: int, slot_id: str) -> Individual:
    """Child takes parent_a's odd-numbered components (1-based) and
    parent_b's even-numbered ones."""
    if parent_a.scores.shape != parent_b.scores.shape:
        raise InvalidInput("parents must have equal score length")
    scores = parent_a.scores.copy()
    scores[1::2] = parent_b.scores[1::2]  # 0-based odd slots = even component numbers
    return Individual(
        scores=scores,
        image=model.render_scores(scores),
        id=slot_id,
        birth_generation=birth_generation,
        provenance="crossover",
        lineage_wins=max(parent_a.lineage_wins, parent_b.lineage_wins),
    )


def mutate(ind: Individual, model, rng, mut_scale: float, mode: str = "additive",
           birth_generation: int | None = None, slot_id: str | None = None) -> Individual:
    """Perturb every component by noise scaled to mut_scale of its std."""
    rng = as_rng(rng)
    if mode == "additive":
        scores = ind.scores + rng.normal(0.0, mut_scale * model.score_std_)
    else:
        scores = ind.scores * (1.0 + rng.normal(0.0, mut_scale, size=ind.scores.shape))
    provenance = ind.provenance + "+mutant" if ind.provenance == "crossover" else "mutant"
    return Individual(
        scores=scores,
        image=model.render_scores(scores),
        id=slot_id if slot_id is not None else ind.id + "m",
        birth_generation=birth_generation if birth_generation is not None else ind.birth_generation,
        provenance=provenance,
        lineage_wins=ind.lineage_wins,
    )


def migration_rate(generation_index: int, initial: float = 0.6, decay: float = 0.5) -> float:
    """Replacement probability used when creating ``generation_index``:
    ``initial`` for generation 2, then multiplied by ``decay`` per generation."""
    if generation_index < 2:
        raise InvalidInput("migration applies from generation 2 onward")
    return initial * decay ** (generation_index - 2)


def initial_generation(model, config: GAConfig, rng, target=None, chance=None) -> Generation:
    """Generation 1: random noise, optionally rejection-filtered against a
    target's chance distribution (image-target runs), plus a fresh schedule."""
    rng = as_rng(rng)
    reject = (
        config.initial_rejection_percentile is not None
        and target is not None
        and chance is not None
    )
    population = []
    for _ in range(config.population):
        if reject:
            ind = sample_rejecting(
                model, rng, target, chance, percentile=config.initial_rejection_percentile
            )
        else:
            ind = sample_noise(model, rng)
        population.append(ind)
    schedule = schedule_pairs(config.population, config.views, rng)
    return Generation(
        index=1,
        population=population,
        schedule=schedule,
        wins=np.zeros(config.population, dtype=np.int64),
        answered=np.zeros(len(schedule), dtype=bool),
    )


def advance_generation(gen: Generation, config: GAConfig, model, rng) -> Generation:
    """Build the next Generation from a fully answered one.

    Stage order is fixed: selection, crossover, mutation, migration. The RNG
    draw order is documented by the code: proto picks, crossover mask,
    partner indices, per-child interleaves, mutation mask, per-mutant noise,
    migration mask, per-migrant samples, then the new schedule.
    """
    if not gen.all_answered():
        raise InvalidState(
            f"generation {gen.index} has {gen.n_trials - gen.n_answered} unanswered trials"
        )
    rng = as_rng(rng)
    P = config.population
    new_index = gen.index + 1

    proto = select_proto(gen.population, gen.wins, rng)
    next_pop = list(proto)

    cross_mask = rng.random(P) < config.p_cross
    partners = rng.integers(0, P, size=P)
    for i in np.where(cross_mask)[0]:
        next_pop[i] = crossover(
            proto[i], proto[partners[i]], model, new_index, f"g{new_index:04d}s{i:03d}c"
        )

    mut_mask = rng.random(P) < config.p_mut
    for i in np.where(mut_mask)[0]:
        next_pop[i] = mutate(
            next_pop[i], model, rng, config.mut_scale, config.mutation_mode,
            birth_generation=new_index, slot_id=f"g{new_index:04d}s{i:03d}m",
        )

    mig_p = migration_rate(new_index, config.mig_initial, config.mig_decay)
    mig_mask = rng.random(P) < mig_p
    for i in np.where(mig_mask)[0]:
        next_pop[i] = sample_noise(model, rng, birth_generation=new_index, provenance="migrant")

    schedule = schedule_pairs(P, config.views, rng)
    return Generation(
        index=new_index,
        population=next_pop,
        schedule=schedule,
        wins=np.zeros(P, dtype=np.int64),
        answered=np.zeros(len(schedule), dtype=bool),
    )


# ------------------------------------------------------------- checkpoints


def save_generation(path, gen: Generation, config: GAConfig, seed: int | None = None,
                    rng=None) -> None:
    """Checkpoint a generation (scores, wins, schedule, provenance, config).

    Rendered pixels are not stored; they are recomputed from the model on
    load. For sequential run loops, pass the loop's generator so its exact
    bit-generator state rides along; the session service instead derives all
    streams from the seed recorded here, which is what makes its recovery
    replay-exact.
    """
    meta = {
        "index": gen.index,
        "config": config.to_dict(),
        "seed": seed,
        "rng_state": None if rng is None else rng.bit_generator.state,
        "ids": [ind.id for ind in gen.population],
        "provenance": [ind.provenance for ind in gen.population],
    }
    write_container(
        path,
        "generation",
        meta,
        {
            "scores": np.stack([ind.scores for ind in gen.population]),
            "wins": gen.wins.astype(np.int64),
            "answered": gen.answered.astype(np.uint8),
            "schedule": gen.schedule.astype(np.int64),
            "birth_generations": np.array([ind.birth_generation for ind in gen.population], dtype=np.int64),
            "lineage_wins": np.array([ind.lineage_wins for ind in gen.population], dtype=np.int64),
        },
    )


def load_generation(path, model) -> tuple[Generation, GAConfig, int | None]:
    """Restore a checkpointed generation; returns (generation, config, seed).

    ``restore_rng`` rebuilds the sequential generator for checkpoints that
    carried one.
    """
    _, meta, arrays = read_container(path, expect_kind="generation")
    config = GAConfig.from_dict(meta["config"])
    scores = arrays["scores"]
    population = [
        Individual(
            scores=scores[i],
            image=model.render_scores(scores[i]),
            id=meta["ids"][i],
            birth_generation=int(arrays["birth_generations"][i]),
            provenance=meta["provenance"][i],
            lineage_wins=int(arrays["lineage_wins"][i]),
        )
        for i in range(len(scores))
    ]
    gen = Generation(
        index=int(meta["index"]),
        population=population,
        schedule=arrays["schedule"].astype(np.int64),
        wins=arrays["wins"].astype(np.int64),
        answered=arrays["answered"].astype(bool),
    )
    return gen, config, meta["seed"]


def restore_rng(path):
    """Rebuild the sequential generator stored in a checkpoint, or None."""
    _, meta, _ = read_container(path, expect_kind="generation")
    state = meta.get("rng_state")
    if state is None:
        return None
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


__all__ = [
    "GAConfig",
    "Generation",
    "schedule_pairs",
    "select_proto",
    "crossover",
    "mutate",
    "migration_rate",
    "initial_generation",
    "advance_generation",
    "save_generation",
    "load_generation",
    "restore_rng",
]
