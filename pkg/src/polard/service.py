"""HTTP+JSON session API for live human-in-the-loop sessions.

Each session is event-sourced: every engine event is appended to a
JSON-lines transcript under the data directory, and on startup the server
rebuilds all sessions by replaying those files.  Mutations (feedback,
advance) hold a per-session lock; distinct sessions proceed in parallel.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import engine
from .actions import ActionSpace
from .config import ConfigError, session_config_from_document
from .engine import (
    CoactiveAnswer,
    ComparisonAnswer,
    OrdinalAnswer,
    PhaseError,
    QueryResponses,
    SessionError,
    SessionState,
)


@dataclass
class ManagedSession:
    id: str
    state: SessionState
    created_at: float
    config_digest: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    flushed: int = 0  # transcript events already written to disk


class SessionStore:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, ManagedSession] = {}
        self._registry_lock = threading.Lock()

    def transcript_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.jsonl"

    def restore_all(self) -> int:
        count = 0
        for path in sorted(self.data_dir.glob("*.jsonl")):
            session_id = path.stem
            try:
                events = engine.parse_transcript(path.read_text())
                state = engine.replay_transcript(events, clock=time.perf_counter)
            except Exception:  # noqa: BLE001 - a bad file must not kill the server
                continue
            digest = _config_digest(events[0]["config"])
            meta = self.data_dir / f"{session_id}.meta.json"
            created = time.time()
            if meta.exists():
                created = json.loads(meta.read_text()).get("created_at", created)
            self.sessions[session_id] = ManagedSession(
                id=session_id, state=state, created_at=created, config_digest=digest,
                flushed=len(state.transcript))
            count += 1
        return count

    def create(self, state: SessionState) -> ManagedSession:
        with self._registry_lock:
            session_id = uuid.uuid4().hex[:12]
            while session_id in self.sessions:
                session_id = uuid.uuid4().hex[:12]
            managed = ManagedSession(
                id=session_id, state=state, created_at=time.time(),
                config_digest=_config_digest(state.config.to_dict()))
            self.sessions[session_id] = managed
        meta = {"created_at": managed.created_at, "config_digest": managed.config_digest}
        (self.data_dir / f"{session_id}.meta.json").write_text(json.dumps(meta))
        self.flush(managed)
        return managed

    def flush(self, managed: ManagedSession) -> None:
        events = managed.state.transcript[managed.flushed:]
        if not events:
            return
        with self.transcript_path(managed.id).open("a") as fh:
            for event in events:
                fh.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")
        managed.flushed = len(managed.state.transcript)

    def get(self, session_id: str) -> ManagedSession:
        managed = self.sessions.get(session_id)
        if managed is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return managed


def _config_digest(config_dict: dict) -> str:
    return hashlib.sha256(json.dumps(config_dict, sort_keys=True).encode()).hexdigest()[:16]


def _action_payload(space: ActionSpace, index: int) -> dict:
    return {"index": int(index), "coords": [float(c) for c in space.coords_at(index)]}


def _state_payload(managed: ManagedSession) -> dict:
    state = managed.state
    space = state.config.space
    return {
        "id": managed.id,
        "phase": state.phase,
        "iteration": state.iteration,
        "total_iterations": state.config.iterations,
        "feedback_types": list(state.config.feedback_types),
        "dimensions": [
            {"name": d.name, "min": d.lower, "max": d.upper, "step": d.step}
            for d in space.dims
        ],
        "ordinal_categories": _category_names(state),
        "counts": {
            "preferences": len(state.datasets.preferences),
            "coactive": len(state.datasets.coactive),
            "ordinal": len(state.datasets.ordinal),
        },
        "visited_count": len(state.visited),
        "optimum_estimate": (_action_payload(space, state.optimum_estimate)
                             if state.optimum_estimate is not None else None),
        "config_digest": managed.config_digest,
    }


def _category_names(state: SessionState) -> list[str]:
    scale = state.config.scale
    if scale.names:
        return list(scale.names)
    return [f"Category {i}" for i in range(1, scale.num_categories + 1)]


def _query_payload(state: SessionState) -> dict:
    bundle = engine.build_queries(state)
    space = state.config.space
    return {
        "iteration": bundle.iteration,
        "comparisons": [
            {"pair": [int(i), int(j)],
             "actions": [_action_payload(space, i), _action_payload(space, j)]}
            for i, j in bundle.comparisons
        ],
        "coactive_prompts": [_action_payload(space, a) for a in bundle.coactive_prompts],
        "ordinal_prompts": [_action_payload(space, a) for a in bundle.ordinal_prompts],
        "ordinal_categories": _category_names(state),
    }


def _projections(state: SessionState) -> list[dict]:
    """Posterior mean per dimension pair, averaged over the remaining
    dimensions (over actions in S) and normalized to [0, 1]."""
    post = state.posterior
    space = state.config.space
    indices = post.subset.actions.indices
    digits = np.array([space.digits_of(i) for i in indices], dtype=int)
    out = []
    for di in range(space.ndim):
        for dj in range(di + 1, space.ndim):
            shape = (space.counts[di], space.counts[dj])
            sums = np.zeros(shape)
            counts = np.zeros(shape)
            np.add.at(sums, (digits[:, di], digits[:, dj]), post.mean)
            np.add.at(counts, (digits[:, di], digits[:, dj]), 1.0)
            defined = counts > 0
            avg = np.divide(sums, counts, out=np.zeros(shape), where=defined)
            if defined.any():
                lo, hi = avg[defined].min(), avg[defined].max()
                norm = (avg - lo) / (hi - lo) if hi > lo else np.full(shape, 0.5)
            else:
                norm = np.full(shape, 0.5)
            values = [[float(norm[r, c]) if defined[r, c] else None
                       for c in range(shape[1])] for r in range(shape[0])]
            out.append({
                "dims": [di, dj],
                "dim_names": [space.dims[di].name or f"dim{di}",
                              space.dims[dj].name or f"dim{dj}"],
                "row_values": [float(v) for v in space.dims[di].values()],
                "col_values": [float(v) for v in space.dims[dj].values()],
                "values": values,
            })
    return out


def _posterior_payload(state: SessionState) -> dict:
    post = state.posterior
    space = state.config.space
    return {
        "subset": [int(i) for i in post.subset.actions.indices],
        "coords": [[float(c) for c in space.coords_at(i)]
                   for i in post.subset.actions.indices],
        "mean": [float(v) for v in post.mean],
        "std": [float(v) for v in post.std()],
        "diagnostics": post.map_diagnostics.to_dict(),
        "optimum_estimate": (_action_payload(space, state.optimum_estimate)
                             if state.optimum_estimate is not None else None),
        "visited": [_action_payload(space, a) for a in state.visited.indices],
        "projections": _projections(state),
    }


def _parse_responses(body: dict) -> QueryResponses:
    try:
        comparisons = [
            ComparisonAnswer(pair=(int(c["pair"][0]), int(c["pair"][1])),
                             winner=None if c.get("winner") is None else int(c["winner"]))
            for c in body.get("comparisons", [])
        ]
        coactive = [
            CoactiveAnswer(action=int(c["action"]),
                           suggestion=None if c.get("suggestion") is None
                           else [float(x) for x in c["suggestion"]])
            for c in body.get("coactive", [])
        ]
        ordinal = [
            OrdinalAnswer(action=int(o["action"]),
                          label=None if o.get("label") is None else int(o["label"]))
            for o in body.get("ordinal", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"malformed feedback body: {exc}")
    return QueryResponses(comparisons=comparisons, coactive=coactive, ordinal=ordinal)


def create_app(data_dir: Path | str = "polard_data",
               default_document: dict | None = None,
               ui_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="polard session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(Path(data_dir))
    store.restore_all()
    app.state.store = store

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict[str, Any] = Body(...)) -> dict:
        doc = body.get("config")
        if doc is None and default_document is not None:
            doc = default_document
        if not isinstance(doc, dict):
            raise HTTPException(status_code=400, detail="body must carry a 'config' object")
        try:
            config = session_config_from_document(doc, seed=body.get("seed"))
        except ConfigError as exc:
            return JSONResponse(status_code=400, content={"errors": exc.errors})
        state = engine.start_session(config, clock=time.perf_counter)
        managed = store.create(state)
        return {"id": managed.id, "state": _state_payload(managed)}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _state_payload(store.get(session_id))

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str) -> dict:
        managed = store.get(session_id)
        if managed.state.phase != "awaiting_feedback":
            raise HTTPException(status_code=409,
                                detail=f"no query pending in phase {managed.state.phase!r}")
        return _query_payload(managed.state)

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: dict[str, Any] = Body(...)) -> dict:
        managed = store.get(session_id)
        synthetic = bool(body.get("synthetic"))
        if synthetic:
            if managed.state.config.source != "synthetic" or managed.state.config.oracle is None:
                raise HTTPException(status_code=400,
                                    detail="synthetic feedback requires a synthetic-source session")
            responses = None
        else:
            responses = _parse_responses(body)
            scale = managed.state.config.scale
            for o in responses.ordinal:
                if o.label is not None and not (1 <= o.label <= scale.num_categories):
                    raise HTTPException(
                        status_code=422,
                        detail=f"ordinal label {o.label} out of range [1, {scale.num_categories}]")
        with managed.lock:
            if managed.state.phase != "awaiting_feedback":
                raise HTTPException(status_code=409,
                                    detail=f"cannot accept feedback in phase {managed.state.phase!r}")
            try:
                if synthetic:
                    state = managed.state
                    rng = engine.feedback_rng(state.config.seed, state.iteration)
                    records = engine.synthesize_responses(state, state.config.oracle, rng)
                    engine.submit_records(state, records)
                else:
                    engine.submit_feedback(managed.state, responses)
            except PhaseError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except SessionError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            store.flush(managed)
        return {"state": _state_payload(managed)}

    @app.post("/sessions/{session_id}/advance")
    def post_advance(session_id: str) -> dict:
        managed = store.get(session_id)
        with managed.lock:
            if managed.state.phase != "ready_to_advance":
                raise HTTPException(status_code=409,
                                    detail=f"cannot advance in phase {managed.state.phase!r}")
            before = len(managed.state.transcript)
            t0 = time.perf_counter()
            try:
                engine.advance(managed.state)  # rolls itself back on failure
            except Exception as exc:  # noqa: BLE001 - surface solver diagnostics
                raise HTTPException(status_code=500,
                                    detail=f"posterior update failed: {exc}")
            store.flush(managed)
            updates = [e for e in managed.state.transcript[before:]
                       if e["event"] == "posterior_updated"]
            new_actions = managed.state.current_actions if managed.state.phase != "finished" else []
        space = managed.state.config.space
        return {
            "state": _state_payload(managed),
            "new_actions": [_action_payload(space, a) for a in new_actions],
            "timing": {
                "posterior_updates": [
                    {"stage": e["stage"], "subset_size": e["subset_size"],
                     "duration_s": e["duration_s"]} for e in updates
                ],
                "posterior_update_seconds": sum(e["duration_s"] for e in updates),
                "total_seconds": time.perf_counter() - t0,
            },
        }

    @app.get("/sessions/{session_id}/posterior")
    def get_posterior(session_id: str) -> dict:
        managed = store.get(session_id)
        if managed.state.posterior is None:
            raise HTTPException(status_code=409, detail="no posterior update has run yet")
        return _posterior_payload(managed.state)

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str) -> dict:
        managed = store.get(session_id)
        return {"events": managed.state.transcript,
                "digest": engine.state_digest(managed.state)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
