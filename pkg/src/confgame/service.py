"""Local session API: upload systems, create game sessions, play moves.

All request and response bodies use the same JSON conventions as the
system-description files; rationals travel as "p/q" strings.  Sessions are
kept in memory for the lifetime of the process, and the moves of one
session are serialized by a per-session lock.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .coalgebra import Model, ModelFormatError, ModelInvariantError, model_from_dict, model_to_dict
from .game import (
    GameError,
    IllegalMoveError,
    IncompleteCarrierError,
    OutOfTurnError,
    SessionState,
    session_move,
    session_new,
)
from .graded import (
    DetSystem,
    DeterminizationCapError,
    InstanceError,
    instance_by_name,
    predeterminize,
)
from .wire import (
    WireError,
    claim_to_json,
    claim_to_text,
    json_to_claim,
    json_to_move,
    point_to_json,
)


@dataclass
class _Session:
    id: str
    system_id: str
    state: SessionState
    lock: threading.Lock


class ServiceState:
    def __init__(self) -> None:
        self.systems: dict[str, Model] = {}
        self.sessions: dict[str, _Session] = {}
        self.dets: dict[tuple[str, str], DetSystem] = {}
        self._counter = itertools.count(1)
        self.lock = threading.Lock()

    def fresh_id(self, prefix: str) -> str:
        return f"{prefix}{next(self._counter)}"

    def det_for(self, system_id: str, semantics: str) -> DetSystem:
        key = (system_id, semantics)
        with self.lock:
            if key not in self.dets:
                inst = instance_by_name(semantics)
                self.dets[key] = predeterminize(self.systems[system_id], inst)
            return self.dets[key]


def _error(status: int, message: str, **payload) -> JSONResponse:
    return JSONResponse({"error": message, **payload}, status_code=status)


def session_view(sess: _Session, include_history: bool = False) -> dict:
    s = sess.state
    det = s.det
    view = {
        "sessionId": sess.id,
        "systemId": sess.system_id,
        "semantics": det.instance.name,
        "role": s.human_role,
        "rounds": "inf" if s.rounds is None else s.rounds,
        "roundsLeft": "inf" if s.rounds_left is None else s.rounds_left,
        "status": s.status,
        "phase": s.phase,
        "position": claim_to_json(det, s.position),
        "positionText": claim_to_text(det, s.position),
        "pendingMoves": [claim_to_json(det, c) for c in s.pending] if s.pending else None,
        "explanation": s.explanation,
        "yourTurn": s.human_turn(),
        "legalMoves": _legal_moves(s),
    }
    if include_history:
        view["history"] = [_history_entry(det, h) for h in s.history]
    return view


def _legal_moves(s: SessionState) -> dict:
    if not s.human_turn():
        return {"kinds": []}
    if s.phase == "witness":
        return {
            "kinds": ["witness", "concede"],
            "targets": [point_to_json(s.det, t) for t in (s.position.targets or ())],
        }
    if s.phase == "duplicator":
        return {"kinds": ["claims", "concede"]}
    return {
        "kinds": ["pick", "concede"],
        "pending": [claim_to_json(s.det, c) for c in (s.pending or ())],
    }


def _history_entry(det: DetSystem, entry: dict) -> dict:
    out = {}
    for key, value in entry.items():
        if key == "claim" or key == "position":
            out[key] = claim_to_json(det, value)
        elif key == "target":
            out[key] = point_to_json(det, value)
        else:
            out[key] = value
    return out


def build_app(state: Optional[ServiceState] = None) -> FastAPI:
    app = FastAPI(title="confgame session service")
    store = state or ServiceState()
    app.state.store = store

    async def read_json(request: Request):
        try:
            body = await request.body()
            return json.loads(body.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise WireError(f"malformed JSON body: {exc}") from None

    @app.exception_handler(WireError)
    async def _wire_error(_req, exc):
        return _error(400, str(exc))

    @app.exception_handler(ModelFormatError)
    async def _fmt_error(_req, exc):
        return _error(400, str(exc))

    @app.exception_handler(ModelInvariantError)
    async def _inv_error(_req, exc):
        return _error(400, str(exc))

    @app.exception_handler(InstanceError)
    async def _inst_error(_req, exc):
        return _error(400, str(exc))

    @app.exception_handler(GameError)
    async def _game_error(_req, exc):
        return _error(400, str(exc))

    @app.exception_handler(IncompleteCarrierError)
    async def _cap_error(_req, exc):
        return _error(422, str(exc))

    @app.exception_handler(DeterminizationCapError)
    async def _det_cap_error(_req, exc):
        return _error(422, str(exc))

    @app.post("/systems")
    async def upload_system(request: Request):
        doc = await read_json(request)
        if not isinstance(doc, dict):
            return _error(400, "the system document must be a JSON object")
        model = model_from_dict(doc)
        system_id = store.fresh_id("sys")
        store.systems[system_id] = model
        return {"id": system_id, "kind": model.kind, "states": list(model.states.elements)}

    @app.get("/systems")
    async def list_systems():
        return [
            {"id": sid, "kind": m.kind, "states": list(m.states.elements)}
            for sid, m in sorted(store.systems.items())
        ]

    @app.get("/systems/{system_id}")
    async def get_system(system_id: str):
        if system_id not in store.systems:
            return _error(404, f"unknown system {system_id!r}")
        return model_to_dict(store.systems[system_id])

    @app.post("/sessions")
    async def create_session(request: Request):
        doc = await read_json(request)
        if not isinstance(doc, dict):
            return _error(400, "the session request must be a JSON object")
        system_id = doc.get("systemId")
        if system_id not in store.systems:
            return _error(404, f"unknown system {system_id!r}")
        semantics = doc.get("semantics")
        role = doc.get("role")
        rounds_raw = doc.get("rounds", "inf")
        if rounds_raw == "inf":
            rounds = None
        elif isinstance(rounds_raw, int) and rounds_raw >= 0 and not isinstance(rounds_raw, bool):
            rounds = rounds_raw
        else:
            return _error(400, f"rounds must be a non-negative integer or 'inf', got {rounds_raw!r}")
        if role not in ("spoiler", "duplicator"):
            return _error(400, f"role must be 'spoiler' or 'duplicator', got {role!r}")
        det = store.det_for(system_id, semantics)
        claim = json_to_claim(det, doc.get("claim"))
        session_state = session_new(det, claim, role, rounds)
        sess = _Session(store.fresh_id("game"), system_id, session_state, threading.Lock())
        store.sessions[sess.id] = sess
        return session_view(sess)

    @app.get("/sessions")
    async def list_sessions():
        return [session_view(s) for _, s in sorted(store.sessions.items())]

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        sess = store.sessions.get(session_id)
        if sess is None:
            return _error(404, f"unknown session {session_id!r}")
        return session_view(sess, include_history=True)

    @app.post("/sessions/{session_id}/moves")
    async def post_move(session_id: str, request: Request):
        sess = store.sessions.get(session_id)
        if sess is None:
            return _error(404, f"unknown session {session_id!r}")
        doc = await read_json(request)
        if not isinstance(doc, dict):
            return _error(400, "the move must be a JSON object")
        move_obj = doc.get("move", doc)
        with sess.lock:
            state = sess.state
            move = json_to_move(state.det, move_obj)
            before = len(state.history)
            try:
                session_move(state, move)
            except OutOfTurnError as exc:
                return _error(409, str(exc), gameStatus=state.status)
            except IllegalMoveError as exc:
                return _error(422, str(exc), gameStatus=state.status)
            engine_reply = [
                _history_entry(state.det, h)
                for h in state.history[before:]
                if h.get("actor") == "engine"
            ]
            view = session_view(sess)
            response = {
                "engineReply": engine_reply,
                "position": view["position"],
                "status": state.status,
                "explanation": state.explanation,
                "session": view,
            }
            if state.status == "spoilerWins" and state.explanation and "inadmissible" in state.explanation:
                return JSONResponse(response, status_code=422)
            return response

    @app.delete("/sessions/{session_id}")
    async def delete_session(session_id: str):
        if session_id not in store.sessions:
            return _error(404, f"unknown session {session_id!r}")
        del store.sessions[session_id]
        return {"deleted": session_id}

    return app
