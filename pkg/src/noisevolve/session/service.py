"""HTTP surface for live 2AFC sessions (see docs/api.md, version v1).

The service owns one feature model and any number of sessions under a
storage root. Session state transitions are serialized with a per-session
lock; unknown-but-on-disk sessions are recovered lazily, which is what makes
kill-and-restart transparent to clients.
"""

from __future__ import annotations

import base64
import io
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from PIL import Image

from ..errors import (
    AwaitAdvance,
    Conflict,
    Gone,
    InvalidInput,
    NoisevolveError,
    NotFound,
    NotReady,
    TooEarly,
)
from ..evolve import GAConfig
from .state import MODE_CONCEPT, MODE_IMAGE, SessionState

API_VERSION = "v1"

_STATUS_CODES = {
    AwaitAdvance: 409,
    Conflict: 409,
    TooEarly: 409,
    Gone: 410,
    NotFound: 404,
    InvalidInput: 400,
    NotReady: 503,
}


def _png_bytes(image: np.ndarray) -> bytes:
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    buf = io.BytesIO()
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _png_base64(image: np.ndarray) -> str:
    return base64.b64encode(_png_bytes(image)).decode("ascii")


class SessionService:
    """Model + storage root + lazily recovered sessions."""

    def __init__(self, model, root):
        self.model = model
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def get(self, session_id: str) -> SessionState:
        with self._registry_lock:
            state = self._sessions.get(session_id)
        if state is not None:
            return state
        directory = self.root / session_id
        if not directory.exists():
            raise NotFound(f"no session {session_id}")
        state = SessionState.open(directory, self.model)
        with self._registry_lock:
            self._sessions.setdefault(session_id, state)
        return self._sessions[session_id]

    def create(self, mode, seed, config, target=None, label="", session_id=None,
               min_trials_to_terminate=750) -> SessionState:
        state = SessionState.create(
            self.root, self.model, mode, seed, config,
            target=target, label=label, session_id=session_id,
            min_trials_to_terminate=min_trials_to_terminate,
        )
        with self._registry_lock:
            self._sessions[state.session_id] = state
        return state


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="noisevolve session service", version=API_VERSION)
    prefix = f"/api/{API_VERSION}"

    @app.exception_handler(NoisevolveError)
    async def _domain_error(request: Request, exc: NoisevolveError):
        code = 500
        for klass, status in _STATUS_CODES.items():
            if isinstance(exc, klass):
                code = status
                break
        return JSONResponse(
            status_code=code,
            content={"error": {"category": exc.category, "message": str(exc)}},
        )

    @app.get(prefix + "/healthz")
    def healthz():
        return {"status": "ok", "model_id": service.model.model_id_, "api_version": API_VERSION}

    @app.post(prefix + "/sessions", status_code=201)
    def create_session(body: dict):
        mode = body.get("mode", MODE_CONCEPT)
        seed = body.get("seed")
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])
        config = GAConfig.from_dict({**GAConfig().to_dict(), **body.get("config", {})})
        target = None
        if mode == MODE_IMAGE:
            encoded = body.get("target_png_base64")
            if encoded is None:
                raise InvalidInput("image-target sessions require target_png_base64")
            with Image.open(io.BytesIO(base64.b64decode(encoded))) as im:
                im = im.convert("L")
                if im.size != (service.model.side_, service.model.side_):
                    im = im.resize((service.model.side_, service.model.side_), Image.BOX)
                target = np.asarray(im, dtype=np.float64) / 255.0
        state = service.create(
            mode, int(seed), config,
            target=target,
            label=body.get("label", ""),
            session_id=body.get("session_id"),
            min_trials_to_terminate=int(body.get("min_trials_to_terminate", 750)),
        )
        return state.status()

    @app.get(prefix + "/sessions/{session_id}")
    def session_status(session_id: str):
        state = service.get(session_id)
        with service.lock(session_id):
            return state.status()

    @app.get(prefix + "/sessions/{session_id}/trial")
    def next_trial(session_id: str):
        state = service.get(session_id)
        with service.lock(session_id):
            refs = state.next_trial()
            left = state.generation.population[refs.left_slot]
            right = state.generation.population[refs.right_slot]
            if state.meta["mode"] == MODE_IMAGE:
                target = {"kind": "image", "url": f"{prefix}/sessions/{session_id}/target"}
            else:
                target = {"kind": "label", "text": state.meta["label"]}
            return {
                "token": refs.token,
                "generation": refs.generation,
                "pair_index": refs.pair_index,
                "progress": {"answered": refs.answered, "scheduled": refs.scheduled},
                "left": {"image_id": left.id, "png_base64": _png_base64(left.image)},
                "right": {"image_id": right.id, "png_base64": _png_base64(right.image)},
                "target": target,
            }

    @app.post(prefix + "/sessions/{session_id}/choices")
    def submit_choice(session_id: str, body: dict):
        token = body.get("token")
        choice = body.get("choice")
        if token is None or choice is None:
            raise InvalidInput("body must include token and choice")
        state = service.get(session_id)
        with service.lock(session_id):
            return state.submit_choice(token, choice)

    @app.post(prefix + "/sessions/{session_id}/advance")
    def advance(session_id: str):
        state = service.get(session_id)
        with service.lock(session_id):
            return state.advance()

    @app.post(prefix + "/sessions/{session_id}/terminate")
    def terminate(session_id: str, body: dict | None = None):
        force = bool((body or {}).get("force", False))
        state = service.get(session_id)
        with service.lock(session_id):
            return state.terminate(force=force)

    @app.get(prefix + "/sessions/{session_id}/reconstruction")
    def reconstruction(session_id: str):
        state = service.get(session_id)
        with service.lock(session_id):
            recon = state.reconstruction()
            return {
                "generation": recon["generation"],
                "best_id": recon["best_id"],
                "best_slot": recon["best_slot"],
                "best_wins": recon["best_wins"],
                "best_png_base64": _png_base64(recon["best_image"]),
                "mean_png_base64": _png_base64(recon["mean_image"]),
            }

    @app.get(prefix + "/sessions/{session_id}/gallery")
    def gallery(session_id: str):
        state = service.get(session_id)
        with service.lock(session_id):
            return Response(content=_png_bytes(state.gallery_image()), media_type="image/png")

    @app.get(prefix + "/sessions/{session_id}/images/{image_id}")
    def image_by_id(session_id: str, image_id: str):
        state = service.get(session_id)
        with service.lock(session_id):
            return Response(content=_png_bytes(state.individual_image(image_id)), media_type="image/png")

    @app.get(prefix + "/sessions/{session_id}/target")
    def target_image(session_id: str):
        state = service.get(session_id)
        path = state.target_image_path()
        if not path.exists():
            raise NotFound("target image not found")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.post(prefix + "/detection-logs", status_code=201)
    def upload_detection_log(body: dict):
        lines = body.get("trials")
        if not isinstance(lines, list) or not lines:
            raise InvalidInput("body must include a non-empty trials list")
        from ..detect import DetectionTrial, analyze_detection_log

        trials = [DetectionTrial.from_dict(d) for d in lines]
        log_dir = service.root / "detection-logs"
        log_dir.mkdir(exist_ok=True)
        name = body.get("name") or f"detection-{len(list(log_dir.glob('*.jsonl'))):04d}"
        path = log_dir / f"{name}.jsonl"
        from ..detect import write_detection_log

        write_detection_log(path, trials)
        return {"stored": path.name, "summary": analyze_detection_log(trials)}

    return app


__all__ = ["SessionService", "create_app", "API_VERSION"]
