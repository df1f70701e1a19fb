"""noisevolve: evolve natural-statistics visual noise toward a target image
or a purely mental template, one 2AFC choice at a time.

The pipeline: encode a natural-image corpus with a multi-scale Gabor bank,
PCA the weight matrix, and synthesize noise by randomizing component scores.
A genetic algorithm then evolves a noise population using pairwise choices
from either a simulated ideal observer or a live human session served over
HTTP, and the analysis/detection modules quantify how good the resulting
reconstructions are.
"""

from .corpus import Corpus, load_corpus, load_image, save_image_png, synthesize_test_corpus
from .errors import NoisevolveError
from .evolve import (
    GAConfig,
    Generation,
    advance_generation,
    crossover,
    initial_generation,
    migration_rate,
    mutate,
    schedule_pairs,
    select_proto,
)
from .featurespace import NaturalNoiseModel, fit_model
from .gabor import GaborBank, GaborBankSpec, bank_size, build_bank
from .noise import Individual, sample_noise, sample_rejecting
from .observer import (
    ChanceDistribution,
    IdealRunResult,
    StopRule,
    build_chance,
    ideal_choice,
    percentile_of,
    pixel_correlation,
    run_ideal,
    run_whitenoise_baseline,
    superstitious_sim,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "load_corpus",
    "load_image",
    "save_image_png",
    "synthesize_test_corpus",
    "GaborBankSpec",
    "GaborBank",
    "bank_size",
    "build_bank",
    "NaturalNoiseModel",
    "fit_model",
    "Individual",
    "sample_noise",
    "sample_rejecting",
    "GAConfig",
    "Generation",
    "schedule_pairs",
    "select_proto",
    "crossover",
    "mutate",
    "migration_rate",
    "initial_generation",
    "advance_generation",
    "pixel_correlation",
    "ChanceDistribution",
    "build_chance",
    "percentile_of",
    "ideal_choice",
    "StopRule",
    "IdealRunResult",
    "run_ideal",
    "superstitious_sim",
    "run_whitenoise_baseline",
    "NoisevolveError",
    "__version__",
]
