"""HTTP surface: sessions, mutations, data reads, and a delta event stream.

Every mutating endpoint returns the SessionDelta it caused and broadcasts
the identical payload on the session's server-sent event stream, so a
client can treat the response and the stream interchangeably.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .filters import FilterError
from .schema import SchemaDef, serialize_schema
from .session import (
    SelectionMismatchError,
    Session,
    SessionBusyError,
    UnknownViewError,
)
from .store import DatasetStore, summarize_fields

KEEPALIVE_SECONDS = 15.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, path: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.path = path
        super().__init__(message)

    def response(self) -> JSONResponse:
        body = {"code": self.code, "message": self.message}
        if self.path is not None:
            body["path"] = self.path
        return JSONResponse(status_code=self.status, content=body)


class SessionHub:
    """Session registry plus per-session event fan-out."""

    def __init__(self, schema: SchemaDef, store: DatasetStore,
                 router_backend, viz_backend):
        self.schema = schema
        self.store = store
        self.router_backend = router_backend
        self.viz_backend = viz_backend
        self.sessions: dict[str, Session] = {}
        self.subscribers: dict[str, list[asyncio.Queue]] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self.loop: asyncio.AbstractEventLoop | None = None

    def create(self) -> Session:
        with self._lock:
            sid = f"s{next(self._ids)}"
        session = Session(sid, self.schema, self.store,
                          self.router_backend, self.viz_backend)
        session.on_delta = lambda delta: self._broadcast(sid, delta.to_wire())
        self.sessions[sid] = session
        self.subscribers[sid] = []
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise ApiError(404, "session_not_found", f"no session {sid!r}")
        return session

    def subscribe(self, sid: str) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self.subscribers[sid].append(queue)
        return queue

    def unsubscribe(self, sid: str, queue: asyncio.Queue) -> None:
        try:
            self.subscribers[sid].remove(queue)
        except (KeyError, ValueError):
            pass

    def _broadcast(self, sid: str, wire: dict) -> None:
        # runs inside the session write lock, possibly on a worker thread;
        # queue puts are handed to the loop so stream order matches seq order
        loop = self.loop
        if loop is None:
            return
        for queue in list(self.subscribers.get(sid, ())):
            loop.call_soon_threadsafe(queue.put_nowait, wire)


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except ValueError:
        raise ApiError(400, "invalid_request", "request body must be JSON")
    if not isinstance(body, dict):
        raise ApiError(400, "invalid_request", "request body must be an object")
    return body


def create_app(schema: SchemaDef, store: DatasetStore, router_backend,
               viz_backend, ui_dir: str | Path | None = None) -> FastAPI:
    hub = SessionHub(schema, store, router_backend, viz_backend)

    @asynccontextmanager
    async def lifespan(app):
        hub.loop = asyncio.get_running_loop()
        yield

    app = FastAPI(title="udi", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.hub = hub

    @app.exception_handler(ApiError)
    async def api_error_handler(request, exc: ApiError):
        return exc.response()

    @app.get("/api/schema")
    async def get_schema():
        return {
            "schema": serialize_schema(schema),
            "summaries": [s.to_wire() for s in summarize_fields(store)],
        }

    @app.post("/api/sessions", status_code=201)
    async def create_session():
        session = hub.create()
        return {"session_id": session.id, "seq": session.seq}

    @app.get("/api/sessions/{sid}")
    async def get_session(sid: str):
        return hub.get(sid).snapshot()

    @app.post("/api/sessions/{sid}/messages")
    async def post_message(sid: str, request: Request):
        session = hub.get(sid)
        body = await _json_body(request)
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ApiError(400, "invalid_request", "\"text\" must be a non-empty string",
                           path="/text")
        try:
            delta = await asyncio.to_thread(session.handle_message, text)
        except SessionBusyError:
            raise ApiError(409, "busy", "a message pipeline is already running")
        return delta.to_wire()

    @app.patch("/api/sessions/{sid}/filters/{fid}")
    async def patch_filter(sid: str, fid: str, request: Request):
        session = hub.get(sid)
        body = await _json_body(request)
        if session.filter_state.get(fid) is None:
            raise ApiError(404, "filter_not_found", f"no filter {fid!r}")
        try:
            delta = await asyncio.to_thread(session.update_filter, fid, body)
        except FilterError as e:
            raise ApiError(400, "invalid_filter", str(e))
        return delta.to_wire()

    @app.delete("/api/sessions/{sid}/filters/{fid}")
    async def delete_filter(sid: str, fid: str):
        session = hub.get(sid)
        if session.filter_state.get(fid) is None:
            raise ApiError(404, "filter_not_found", f"no filter {fid!r}")
        delta = await asyncio.to_thread(session.remove_filter, fid)
        return delta.to_wire()

    @app.post("/api/sessions/{sid}/views/{vid}/selection")
    async def post_selection(sid: str, vid: str, request: Request):
        session = hub.get(sid)
        body = await _json_body(request)
        try:
            delta = await asyncio.to_thread(session.apply_selection, vid, body)
        except UnknownViewError:
            raise ApiError(404, "view_not_found", f"no view {vid!r}")
        except SelectionMismatchError as e:
            raise ApiError(400, "selection_mismatch", str(e))
        except FilterError as e:
            raise ApiError(400, "invalid_filter", str(e))
        return delta.to_wire()

    @app.delete("/api/sessions/{sid}/views/{vid}/selection")
    async def delete_selection(sid: str, vid: str):
        session = hub.get(sid)
        try:
            delta = await asyncio.to_thread(session.clear_selection, vid)
        except UnknownViewError:
            raise ApiError(404, "view_not_found", f"no view {vid!r}")
        return delta.to_wire()

    @app.get("/api/sessions/{sid}/views/{vid}/data")
    async def get_view_data(sid: str, vid: str):
        session = hub.get(sid)
        try:
            table = await asyncio.to_thread(session.view_data, vid)
        except UnknownViewError:
            raise ApiError(404, "view_not_found", f"no view {vid!r}")
        return table.to_wire()

    @app.get("/api/sessions/{sid}/entities/{entity}/rows")
    async def get_rows(sid: str, entity: str, offset: int = 0, limit: int | None = None):
        session = hub.get(sid)
        if offset < 0 or (limit is not None and limit < 0):
            raise ApiError(400, "invalid_request", "offset and limit must be non-negative")
        try:
            table = await asyncio.to_thread(session.visible_rows, entity, offset, limit)
        except KeyError:
            raise ApiError(404, "entity_not_found", f"no entity {entity!r}")
        return table.to_wire()

    @app.get("/api/sessions/{sid}/export")
    async def export(sid: str, entity: str | None = None, format: str = "json"):
        session = hub.get(sid)
        if format not in ("json", "text"):
            raise ApiError(400, "invalid_request", "format must be json or text",
                           path="/format")
        try:
            ids = await asyncio.to_thread(session.export_visible, entity)
        except KeyError:
            raise ApiError(404, "entity_not_found", f"no entity {entity!r}")
        name = entity or schema.dataset_entity().name
        if format == "text":
            return PlainTextResponse("".join(f"{i}\n" for i in ids))
        return {"entity": name, "ids": ids}

    @app.get("/api/sessions/{sid}/events")
    async def events(sid: str, limit: int | None = None):
        hub.get(sid)
        queue = hub.subscribe(sid)

        async def stream():
            sent = 0
            try:
                while limit is None or sent < limit:
                    try:
                        wire = await asyncio.wait_for(queue.get(), KEEPALIVE_SECONDS)
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
                        continue
                    yield f"id: {wire['seq']}\ndata: {json.dumps(wire)}\n\n"
                    sent += 1
            finally:
                hub.unsubscribe(sid, queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
