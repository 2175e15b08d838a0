"""HTTP service exposing environment sessions to external agents.

Every JSON body carries ``protocol_version``. Errors use
``{"error": {"code": ..., "message": ...}}`` with status 400 (bad request),
404 (unknown session) or 409 (session no longer running).
"""

from __future__ import annotations

import os
import threading
import uuid
from typing import Dict, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .actions import UnknownProfile, get_profile, signature_manifest
from .config import layout_catalog, popular_catalog, shipped_catalog
from .env import ENGINE_VERSION, Env, EnvRequest, RequestError, SessionTerminal, observation_payload
from .state import canonicalize
from .tasks import DEFAULT_HORIZON, all_tasks

PROTOCOL_VERSION = 1
DEFAULT_PORT = 8765


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status, self.code, self.message = status, code, message


class _Session:
    __slots__ = ("id", "env", "lock")

    def __init__(self, sid: str, env: Env):
        self.id = sid
        self.env = env
        self.lock = threading.Lock()


class SessionStore:
    """In-memory sessions; one lock per session serializes its actions."""

    def __init__(self, horizon: int = DEFAULT_HORIZON):
        self.horizon = horizon
        self._sessions: Dict[str, _Session] = {}
        self._lock = threading.Lock()

    def create(self, body) -> _Session:
        try:
            request = EnvRequest.from_dict(_strip_version(body), default_horizon=self.horizon)
            env = Env(request)
        except RequestError as exc:
            raise ApiError(400, exc.code, exc.message) from None
        session = _Session(str(uuid.uuid4()), env)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, sid: str) -> _Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {sid!r}")
        return session

    def delete(self, sid: str) -> None:
        with self._lock:
            if self._sessions.pop(sid, None) is None:
                raise ApiError(404, "unknown_session", f"no session {sid!r}")

    def __len__(self) -> int:
        return len(self._sessions)


def _strip_version(body) -> dict:
    if not isinstance(body, dict):
        raise ApiError(400, "bad_request", "request body must be an object")
    version = body.get("protocol_version", PROTOCOL_VERSION)
    if version != PROTOCOL_VERSION:
        raise ApiError(400, "protocol_version", f"unsupported protocol_version {version!r}")
    return {k: v for k, v in body.items() if k != "protocol_version"}


def _envelope(**fields) -> dict:
    return {"protocol_version": PROTOCOL_VERSION, **fields}


def _session_view(session: _Session) -> dict:
    env = session.env
    return {
        "session_id": session.id,
        "status": env.status,
        "step_count": env.step_count,
        "horizon": env.horizon,
    }


async def _json_body(request: Request):
    try:
        return await request.json()
    except ValueError:
        raise ApiError(400, "bad_request", "body is not valid JSON") from None


def create_app(horizon: int = DEFAULT_HORIZON) -> FastAPI:
    app = FastAPI(title="varapps", version=ENGINE_VERSION)
    store = SessionStore(horizon)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return JSONResponse(_envelope(error={"code": exc.code, "message": exc.message}), status_code=exc.status)

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await _json_body(request)
        session = store.create(body)
        env = session.env
        with session.lock:
            obs = observation_payload(env.observe())
            return _envelope(
                **_session_view(session),
                request=env.request.to_dict(),
                goal=env.goal,
                observation=obs,
            )

    @app.get("/sessions/{sid}/observation")
    def get_observation(sid: str, mode: str = "axtree"):
        session = store.get(sid)
        with session.lock:
            try:
                payload = observation_payload(session.env.observe(), mode)
            except RequestError as exc:
                raise ApiError(400, exc.code, exc.message) from None
        if mode == "html":
            return Response(payload["text"], media_type="text/html; charset=utf-8")
        return _envelope(session_id=sid, observation=payload)

    @app.post("/sessions/{sid}/actions")
    async def post_action(sid: str, request: Request):
        session = store.get(sid)
        body = _strip_version(await _json_body(request))
        action = body.get("action")
        if not isinstance(action, str):
            raise ApiError(400, "bad_request", "field 'action' must be a string")
        with session.lock:
            env = session.env
            try:
                step = env.step(action)
            except SessionTerminal as exc:
                raise ApiError(409, "session_terminal", str(exc)) from None
            return _envelope(
                **_session_view(session),
                step=step.to_dict(),
                reward_so_far=env.best.reward,
                observation=observation_payload(env.observe()),
            )

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str):
        session = store.get(sid)
        with session.lock:
            text = canonicalize(session.env.state).text
        return PlainTextResponse(text, media_type="application/yaml; charset=utf-8")

    @app.get("/sessions/{sid}/result")
    def get_result(sid: str):
        session = store.get(sid)
        with session.lock:
            env = session.env
            return _envelope(**_session_view(session), result=env.result().to_dict(), s0_digest=env.s0_digest())

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        store.delete(sid)
        return Response(status_code=204)

    @app.get("/meta/tasks")
    def meta_tasks():
        tasks = [
            {
                "id": t.id,
                "relevant_apps": sorted(t.relevant_apps),
                "total_steps": t.total_steps,
                "prompts": list(t.prompts),
            }
            for t in all_tasks().values()
        ]
        return _envelope(tasks=tasks)

    @app.get("/meta/variations")
    def meta_variations():
        def rows(catalog):
            return [{"id": v.id, "kind": v.kind, "description": v.description} for v in catalog.values()]

        return _envelope(
            shipped=rows(shipped_catalog()), popular=rows(popular_catalog()), layout=rows(layout_catalog())
        )

    @app.get("/meta/actions")
    def meta_actions(profile: str = "full"):
        try:
            get_profile(profile)
        except UnknownProfile:
            raise ApiError(400, "unknown_profile", f"unknown action profile {profile!r}") from None
        return _envelope(**signature_manifest(profile))

    return app


def serve(host: str = "127.0.0.1", port: Optional[int] = None, horizon: int = DEFAULT_HORIZON) -> None:
    import uvicorn

    if port is None:
        port = int(os.environ.get("VARAPPS_PORT", DEFAULT_PORT))
    uvicorn.run(create_app(horizon), host=host, port=port, log_level="info")
