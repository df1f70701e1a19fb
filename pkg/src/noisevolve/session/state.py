"""Durable state for live 2AFC reconstruction sessions.

Every acknowledged choice is appended (and fsynced) to a line-delimited
trial log before the response goes out, and a binary generation checkpoint
is written at creation and after every advance. All randomness is derived
from the stored seed plus structural counters (generation, trial index), so
a restarted process replays the log into exactly the state an uninterrupted
process would hold, and a full log plus the seed reproduces every
generation's population bit for bit.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..corpus import save_image_png
from ..errors import AwaitAdvance, Conflict, Gone, InvalidInput, NotFound, NotReady, TooEarly
from ..evolve import GAConfig, Generation, advance_generation, initial_generation, load_generation, migration_rate, save_generation
from ..observer import build_chance
from ..validation import as_image, derived_rng, image_hash

# rng derivation salts (seed, SALT, ...counters)
_SALT_INIT = 1
_SALT_ADVANCE = 2
_SALT_PLACEMENT = 3
_SALT_CHANCE = 4

MODE_IMAGE = "image-target"
MODE_CONCEPT = "concept-target"


@dataclass
class TrialPayloadRefs:
    """What next_trial hands to the transport layer (ids only; the service
    layer attaches the encoded pixels)."""

    token: str
    generation: int
    pair_index: int
    left_slot: int
    right_slot: int
    answered: int
    scheduled: int


class SessionState:
    """One session's state machine. Callers serialize access per session."""

    def __init__(self, directory: Path, model, meta: dict, generation: Generation,
                 total_answered: int = 0):
        self.directory = Path(directory)
        self.model = model
        self.meta = meta
        self.generation = generation
        self.total_answered = total_answered
        self.config = GAConfig.from_dict(meta["config"])
        self._outstanding = None  # {"pair_index", "left_slot", "right_slot", "token", "issued_at"}
        self._log_path = self.directory / "trials.jsonl"
        self._status_path = self.directory / "status.json"

    # ------------------------------------------------------------ creation

    @classmethod
    def create(cls, root, model, mode: str, seed: int, config: GAConfig,
               target=None, label: str = "", session_id: str | None = None,
               min_trials_to_terminate: int = 750) -> "SessionState":
        if model is None:
            raise NotReady("no feature model loaded")
        if mode not in (MODE_IMAGE, MODE_CONCEPT):
            raise InvalidInput(f"unknown session mode {mode!r}")
        if mode == MODE_IMAGE and target is None:
            raise InvalidInput("image-target sessions require a target image")

        session_id = session_id or uuid.uuid4().hex[:12]
        directory = Path(root) / session_id
        if directory.exists():
            raise Conflict(f"session {session_id} already exists")
        directory.mkdir(parents=True)
        (directory / "checkpoints").mkdir()

        chance = None
        if mode == MODE_IMAGE:
            target = as_image(target, side=model.side_)
            save_image_png(directory / "target.png", target)
            if config.initial_rejection_percentile is not None:
                chance = build_chance(
                    model, target, config.chance_n, derived_rng(seed, _SALT_CHANCE)
                )
        generation = initial_generation(
            model, config, derived_rng(seed, _SALT_INIT),
            target=target if mode == MODE_IMAGE else None, chance=chance,
        )
        meta = {
            "session_id": session_id,
            "mode": mode,
            "label": label,
            "seed": int(seed),
            "side": int(model.side_),
            "model_id": model.model_id_,
            "target_id": image_hash(target) if mode == MODE_IMAGE else None,
            "config": config.to_dict(),
            "min_trials_to_terminate": int(min_trials_to_terminate),
            "created_at": time.time(),
        }
        (directory / "meta.json").write_text(json.dumps(meta, indent=2))
        save_generation(directory / "checkpoints" / "gen-0001.bin", generation, config, seed=seed)
        state = cls(directory, model, meta, generation)
        state._write_status("active")
        return state

    # ------------------------------------------------------------ recovery

    @classmethod
    def open(cls, directory, model) -> "SessionState":
        """Recover a session from its directory: newest checkpoint plus a
        replay of the current generation's logged choices."""
        directory = Path(directory)
        meta_path = directory / "meta.json"
        if not meta_path.exists():
            raise NotFound(f"no session at {directory}")
        meta = json.loads(meta_path.read_text())
        if model is None:
            raise NotReady("no feature model loaded")
        if meta.get("model_id") != model.model_id_:
            raise InvalidInput(
                f"session {meta['session_id']} was created under model {meta.get('model_id')}, "
                f"not {model.model_id_}"
            )
        checkpoints = sorted((directory / "checkpoints").glob("gen-*.bin"))
        if not checkpoints:
            raise NotFound(f"session {meta['session_id']} has no checkpoints")
        generation, _, _ = load_generation(checkpoints[-1], model)
        state = cls(directory, model, meta, generation)
        state._replay_log()
        return state

    def _replay_log(self) -> None:
        self.total_answered = 0
        if not self._log_path.exists():
            return
        for line in self._log_path.read_text().splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            self.total_answered += 1
            if record["generation"] != self.generation.index:
                continue  # earlier generations are baked into the checkpoint
            winner = record["left_slot"] if record["choice"] == "left" else record["right_slot"]
            self.generation.answer(record["pair_index"], winner)

    # -------------------------------------------------------------- status

    @property
    def session_id(self) -> str:
        return self.meta["session_id"]

    @property
    def seed(self) -> int:
        return self.meta["seed"]

    def _write_status(self, status: str, extra: dict | None = None) -> None:
        payload = {"status": status}
        if extra:
            payload.update(extra)
        self._status_path.write_text(json.dumps(payload, indent=2))

    def _read_status(self) -> dict:
        if self._status_path.exists():
            return json.loads(self._status_path.read_text())
        return {"status": "active"}

    @property
    def terminated(self) -> bool:
        return self._read_status().get("status") == "terminated"

    def status(self) -> dict:
        gen = self.generation
        state = "terminated" if self.terminated else (
            "awaiting-advance" if gen.all_answered() else "active"
        )
        return {
            "session_id": self.session_id,
            "mode": self.meta["mode"],
            "label": self.meta["label"],
            "status": state,
            "generation": gen.index,
            "answered": gen.n_answered,
            "scheduled": gen.n_trials,
            "total_answered": self.total_answered,
            "population": self.config.population,
            "views": self.config.views,
            "min_trials_to_terminate": self.meta["min_trials_to_terminate"],
        }

    # -------------------------------------------------------------- trials

    def _placement_left_first(self, pair_index: int) -> bool:
        rng = derived_rng(self.seed, _SALT_PLACEMENT, self.generation.index, pair_index)
        return bool(rng.random() < 0.5)

    def next_trial(self) -> TrialPayloadRefs:
        """Issue (or re-issue) the next scheduled pair with randomized
        left/right placement. Idempotent until the trial is answered."""
        if self.terminated:
            raise Gone(f"session {self.session_id} is terminated")
        gen = self.generation
        if self._outstanding is None:
            unanswered = np.flatnonzero(~gen.answered)
            if len(unanswered) == 0:
                raise AwaitAdvance(f"generation {gen.index} complete; advance the session")
            pair_index = int(unanswered[0])
            i, j = (int(x) for x in gen.schedule[pair_index])
            left, right = (i, j) if self._placement_left_first(pair_index) else (j, i)
            self._outstanding = {
                "pair_index": pair_index,
                "left_slot": left,
                "right_slot": right,
                "token": f"g{gen.index}-p{pair_index}",
                "issued_at": time.time(),
            }
        out = self._outstanding
        return TrialPayloadRefs(
            token=out["token"],
            generation=gen.index,
            pair_index=out["pair_index"],
            left_slot=out["left_slot"],
            right_slot=out["right_slot"],
            answered=gen.n_answered,
            scheduled=gen.n_trials,
        )

    def submit_choice(self, token: str, choice: str) -> dict:
        """Tally a winner; the trial record is durable before this returns."""
        if self.terminated:
            raise Gone(f"session {self.session_id} is terminated")
        if choice not in ("left", "right"):
            raise InvalidInput(f"choice must be 'left' or 'right', got {choice!r}")
        try:
            gen_part, pair_part = token.split("-p")
            token_gen = int(gen_part.lstrip("g"))
            pair_index = int(pair_part)
        except (ValueError, AttributeError):
            raise NotFound(f"malformed trial token {token!r}") from None

        gen = self.generation
        if token_gen < gen.index or (
            token_gen == gen.index
            and 0 <= pair_index < gen.n_trials
            and gen.answered[pair_index]
        ):
            raise Conflict(f"trial {token} was already answered")
        out = self._outstanding
        if out is None and token_gen == gen.index and not gen.all_answered():
            # a restart dropped the in-memory issue record; accept the token
            # if it names the trial next_trial would (re-)issue
            next_pair = int(np.flatnonzero(~gen.answered)[0])
            if pair_index == next_pair:
                left_first = self._placement_left_first(next_pair)
                i, j = (int(x) for x in gen.schedule[next_pair])
                out = {
                    "pair_index": next_pair,
                    "left_slot": i if left_first else j,
                    "right_slot": j if left_first else i,
                    "token": token,
                    "issued_at": None,
                }
        if out is None or out["token"] != token:
            raise NotFound(f"trial {token} was never issued")

        winner = out["left_slot"] if choice == "left" else out["right_slot"]
        record = {
            "session_id": self.session_id,
            "generation": gen.index,
            "pair_index": pair_index,
            "left_slot": out["left_slot"],
            "right_slot": out["right_slot"],
            "left_id": gen.population[out["left_slot"]].id,
            "right_id": gen.population[out["right_slot"]].id,
            "choice": choice,
            "issued_at": out["issued_at"],
            "answered_at": time.time(),
        }
        with open(self._log_path, "a") as fh:
            fh.write(json.dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        gen.answer(pair_index, winner)
        self.total_answered += 1
        self._outstanding = None
        return {
            "answered": gen.n_answered,
            "scheduled": gen.n_trials,
            "generation_complete": gen.all_answered(),
            "total_answered": self.total_answered,
        }

    # ------------------------------------------------------------- advance

    def advance(self) -> dict:
        if self.terminated:
            raise Gone(f"session {self.session_id} is terminated")
        gen = self.generation
        if not gen.all_answered():
            raise Conflict(
                f"generation {gen.index} still has {gen.n_trials - gen.n_answered} open trials"
            )
        new_index = gen.index + 1
        rng = derived_rng(self.seed, _SALT_ADVANCE, new_index)
        self.generation = advance_generation(gen, self.config, self.model, rng)
        self._outstanding = None
        save_generation(
            self.directory / "checkpoints" / f"gen-{new_index:04d}.bin",
            self.generation, self.config, seed=self.seed,
        )
        counts: dict[str, int] = {}
        for ind in self.generation.population:
            counts[ind.provenance] = counts.get(ind.provenance, 0) + 1
        return {
            "generation": new_index,
            "migration_rate": migration_rate(new_index, self.config.mig_initial, self.config.mig_decay),
            "provenance": counts,
        }

    # ----------------------------------------------------- reconstructions

    def _last_complete_generation(self) -> Generation:
        if self.generation.all_answered():
            return self.generation
        if self.generation.index <= 1:
            raise Conflict("no completed generation yet")
        path = self.directory / "checkpoints" / f"gen-{self.generation.index - 1:04d}.bin"
        prev, _, _ = load_generation(path, self.model)
        for line in self._log_path.read_text().splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            if record["generation"] != prev.index:
                continue
            winner = record["left_slot"] if record["choice"] == "left" else record["right_slot"]
            prev.answer(record["pair_index"], winner)
        return prev

    def reconstruction(self) -> dict:
        """Best-ranked individual of the last completed generation (most
        wins, then lineage wins, then id) plus the population mean image."""
        gen = self._last_complete_generation()
        best_slot = max(
            range(len(gen.population)),
            key=lambda i: (gen.wins[i], gen.population[i].lineage_wins, gen.population[i].id),
        )
        best = gen.population[best_slot]
        mean_image = np.mean([ind.image for ind in gen.population], axis=0)
        return {
            "generation": gen.index,
            "best_slot": int(best_slot),
            "best_id": best.id,
            "best_wins": int(gen.wins[best_slot]),
            "best_image": best.image,
            "mean_image": mean_image,
        }

    def terminate(self, force: bool = False) -> dict:
        """Close the session and export the final reconstruction.

        Guarded by the configured minimum trial count (premature quits make
        for junk reconstructions); ``force`` overrides the guard."""
        existing = self._read_status()
        if existing.get("status") == "terminated":
            return existing
        minimum = self.meta["min_trials_to_terminate"]
        if not force and self.total_answered < minimum:
            raise TooEarly(
                f"{self.total_answered} trials answered; minimum is {minimum} (use force to override)"
            )
        recon = self.reconstruction()
        save_image_png(self.directory / "reconstruction-best.png", recon["best_image"])
        save_image_png(self.directory / "reconstruction-mean.png", recon["mean_image"])
        summary = {
            "status": "terminated",
            "generation": recon["generation"],
            "best_id": recon["best_id"],
            "best_slot": recon["best_slot"],
            "best_wins": recon["best_wins"],
            "total_answered": self.total_answered,
            "terminated_at": time.time(),
        }
        self._write_status("terminated", summary)
        return summary

    # -------------------------------------------------------------- images

    def individual_image(self, image_id: str) -> np.ndarray:
        for ind in self.generation.population:
            if ind.id == image_id:
                return ind.image
        raise NotFound(f"no image {image_id} in the current generation")

    def target_image_path(self) -> Path:
        if self.meta["mode"] != MODE_IMAGE:
            raise NotFound("concept-target sessions have no target image")
        return self.directory / "target.png"

    def gallery_image(self, columns: int = 10, gap: int = 2) -> np.ndarray:
        """Current generation as one image grid (row-major by slot)."""
        side = self.meta["side"]
        pop = self.generation.population
        rows = (len(pop) + columns - 1) // columns
        grid = np.ones((rows * (side + gap) - gap, columns * (side + gap) - gap))
        for slot, ind in enumerate(pop):
            r, c = divmod(slot, columns)
            y0, x0 = r * (side + gap), c * (side + gap)
            grid[y0 : y0 + side, x0 : x0 + side] = np.clip(ind.image, 0.0, 1.0)
        return grid
