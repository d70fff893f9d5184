"""HTTP session service exposing the chat agent.

Endpoints
    POST   /sessions                    {room | preset, backend, fixture?} -> {session_id}
    POST   /sessions/{id}/message       {text} -> turn result (scene, actions, warnings, renders)
    GET    /sessions/{id}/scene         canonical scene JSON
    GET    /sessions/{id}/render        ?view=topdown | wall:<wall_id> -> PNG
    GET    /sessions/{id}/transcript    JSONL, one exchange per line
    DELETE /sessions/{id}

Turns run synchronously; a second message to a session mid-turn gets 409.
The in-memory table is a cache over the sessions directory — a restarted
service answers GETs identically for any persisted session, though messages
need a session created in this process (the replay queue is not persisted).

Every error body has the shape {"code", "message", "detail"}.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .agent import (
    AgentConfig,
    AgentDeps,
    Session,
    TurnResult,
    handle_turn,
    load_reference_banks,
    load_session,
    new_session,
)
from .assets import MockProvider
from .backend import LiveBackend, ReplayBackend
from .errors import (
    BusySession,
    ReplayMiss,
    RetryBudgetExhausted,
    RoomsmithError,
    UserClarificationNeeded,
)
from .grids import DEFAULT_CELL_SIZE, build_wall_grid
from .render import RenderSpec, TopDown, WallElevation, render
from .scene import (
    Action3D,
    Add,
    Remove,
    Rotate,
    Scale,
    Scene,
    Translate,
    make_rectangular_room,
    scene_canonical_bytes,
    scene_to_json,
)

PRESET_ROOMS = {
    "bedroom": (4.0, 4.0, 2.6),
    "study": (3.5, 3.0, 2.7),
    "lounge": (5.0, 4.0, 2.8),
}


def room_from_spec(spec: dict) -> Scene:
    """Empty scene from a wire-format room spec or preset name."""
    if "preset" in spec:
        name = spec["preset"]
        if name not in PRESET_ROOMS:
            raise UnknownPreset(f"unknown preset {name!r}; have {sorted(PRESET_ROOMS)}")
        w, d, h = PRESET_ROOMS[name]
        return Scene(room=make_rectangular_room(w, d, h))
    room = spec.get("room", spec)
    try:
        w, d = float(room["width"]), float(room["depth"])
    except KeyError as exc:
        raise InvalidRequest(f"room spec needs width and depth ({exc} missing)") from exc
    h = float(room.get("height", 2.8))
    tagged = tuple(room.get("tagged", ("top", "left")))
    return Scene(room=make_rectangular_room(w, d, h, tagged=tagged))


def action_to_json(action: Action3D) -> dict:
    if isinstance(action, Add):
        return {"type": "Add", "objkey": action.objkey, "text": action.text}
    if isinstance(action, Remove):
        return {"type": "Remove", "objkey": action.objkey}
    if isinstance(action, Translate):
        p = action.position
        return {"type": "Translate", "objkey": action.objkey, "position": [p.x, p.y, p.z]}
    if isinstance(action, Scale):
        f = action.factors
        return {"type": "Scale", "objkey": action.objkey, "factors": [f.x, f.y, f.z]}
    if isinstance(action, Rotate):
        return {"type": "Rotate", "objkey": action.objkey, "angle": action.angle}
    raise TypeError(f"unknown action {type(action).__name__}")


def turn_result_to_json(session_id: str, result: TurnResult) -> dict:
    return {
        "session_id": session_id,
        "scene": scene_to_json(result.scene),
        "actions": [action_to_json(a) for a in result.actions],
        "warnings": list(result.warnings),
        "renders": [
            {
                "digest": img.digest,
                "url": f"/sessions/{session_id}/render?view=topdown",
            }
            for img in result.renders
        ],
    }


class InvalidRequest(RoomsmithError):
    """Request body is structurally wrong for the endpoint."""


class UnknownPreset(InvalidRequest):
    pass


class UnknownSession(RoomsmithError):
    pass


class BackendUnavailable(RoomsmithError):
    """The session exists but cannot take messages in this process."""


_STATUS = {
    InvalidRequest: 400,
    UnknownSession: 404,
    BusySession: 409,
    BackendUnavailable: 409,
    UserClarificationNeeded: 422,
    ReplayMiss: 422,
    RetryBudgetExhausted: 502,
}


def _error_response(exc: RoomsmithError) -> JSONResponse:
    status = 400
    for klass, code in _STATUS.items():
        if isinstance(exc, klass):
            status = code
            break
    return JSONResponse(
        status_code=status,
        content={
            "code": _snake(type(exc).__name__),
            "message": str(exc),
            "detail": {"type": type(exc).__name__},
        },
    )


def _snake(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


@dataclass
class _Entry:
    session: Session
    deps: Optional[AgentDeps]  # None for sessions restored from disk
    lock: threading.Lock


def create_app(
    sessions_root: Optional[Path] = None,
    fixtures_dir: Optional[Path] = None,
    live: bool = False,
    assets=None,
    k: int = 8,
) -> FastAPI:
    app = FastAPI(title="roomsmith", docs_url=None, redoc_url=None)
    sessions_root = Path(sessions_root) if sessions_root else None
    fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
    references = load_reference_banks(k=k)
    provider = assets or MockProvider(seed=0)
    table: dict[str, _Entry] = {}
    table_lock = threading.Lock()
    app.state.sessions = table  # introspection hook for tests and debugging

    def _deps(backend) -> AgentDeps:
        return AgentDeps(
            backend=backend,
            assets=provider,
            references=references,
            session_root=sessions_root,
        )

    def _backend_for(body: dict):
        kind = body.get("backend", "replay")
        if kind == "live":
            if not live:
                raise InvalidRequest("live backend is disabled; start the service with --live")
            return LiveBackend.from_env(os.environ)
        if kind == "replay":
            fixture = body.get("fixture")
            if not fixture:
                raise InvalidRequest("replay sessions need a 'fixture' file name")
            if fixtures_dir is None:
                raise InvalidRequest("service has no fixtures directory configured")
            path = (fixtures_dir / fixture).resolve()
            if fixtures_dir.resolve() not in path.parents:
                raise InvalidRequest("fixture must live under the fixtures directory")
            if not path.is_file():
                raise InvalidRequest(f"fixture {fixture!r} not found")
            return ReplayBackend(path)
        raise InvalidRequest(f"backend must be 'live' or 'replay', not {kind!r}")

    def _entry(session_id: str) -> _Entry:
        with table_lock:
            entry = table.get(session_id)
            if entry is not None:
                return entry
        # cache miss: restore a persisted session read-only
        if sessions_root is not None and (sessions_root / session_id / "scene.json").is_file():
            session = load_session(sessions_root / session_id)
            entry = _Entry(session=session, deps=None, lock=threading.Lock())
            with table_lock:
                return table.setdefault(session_id, entry)
        raise UnknownSession(f"no session {session_id!r}")

    @app.exception_handler(RoomsmithError)
    async def roomsmith_error(request: Request, exc: RoomsmithError):
        return _error_response(exc)

    @app.post("/sessions")
    def create_session(body: dict):
        scene = room_from_spec(body)
        backend = _backend_for(body)
        config = AgentConfig() if "config" not in body else AgentConfig.from_json(body["config"])
        session = new_session(scene, config=config, session_id=body.get("session_id"))
        entry = _Entry(session=session, deps=_deps(backend), lock=threading.Lock())
        with table_lock:
            if session.id in table:
                raise InvalidRequest(f"session {session.id!r} already exists")
            table[session.id] = entry
        return {"session_id": session.id}

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, body: dict):
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise InvalidRequest("message body needs non-empty 'text'")
        entry = _entry(session_id)
        if entry.deps is None:
            raise BackendUnavailable(
                f"session {session_id!r} was restored from disk and has no backend"
            )
        if not entry.lock.acquire(blocking=False):
            raise BusySession(f"session {session_id} is already processing a turn")
        try:
            result = handle_turn(text, entry.session, entry.deps)
        finally:
            entry.lock.release()
        return turn_result_to_json(session_id, result)

    @app.get("/sessions/{session_id}/scene")
    def get_scene(session_id: str):
        entry = _entry(session_id)
        return Response(
            content=scene_canonical_bytes(entry.session.scene),
            media_type="application/json",
        )

    @app.get("/sessions/{session_id}/render")
    def get_render(session_id: str, view: str = "topdown"):
        entry = _entry(session_id)
        scene = entry.session.scene
        config = entry.session.config
        if view == "topdown":
            spec = RenderSpec(view=TopDown(), resolution=config.capture_resolution)
            img = render(scene, None, spec)
        elif view.startswith("wall:"):
            wall_id = view.split(":", 1)[1]
            if all(w.id != wall_id for w in scene.room.walls):
                raise InvalidRequest(f"room has no wall {wall_id!r}")
            grid = build_wall_grid(scene.room, wall_id, config.cell_size or DEFAULT_CELL_SIZE)
            spec = RenderSpec(view=WallElevation(wall_id), resolution=config.capture_resolution)
            img = render(scene, grid, spec)
        else:
            raise InvalidRequest("view must be 'topdown' or 'wall:<wall_id>'")
        return Response(content=img.to_png_bytes(), media_type="image/png")

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        entry = _entry(session_id)
        return Response(
            content=entry.session.transcript.to_jsonl(),
            media_type="application/x-ndjson",
        )

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        entry = _entry(session_id)  # 404 if it never existed
        with table_lock:
            table.pop(session_id, None)
        if sessions_root is not None:
            d = sessions_root / session_id
            if d.is_dir():
                for child in d.iterdir():
                    child.unlink()
                d.rmdir()
        return {"deleted": session_id}

    return app
