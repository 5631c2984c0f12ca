"""HTTP gateway: sessions, uploads, streamed turn events, RAG ingestion.

The gateway is a thin fan-out layer over a Runtime.  A message POST
answers 202 immediately and runs the turn on a worker thread; progress
arrives on the session's event stream as server-sent events, one frame
per trace event plus exactly one terminal done/error frame per turn.
Frames carry a session-scoped seq so a client can reconnect with
``from_seq`` and miss nothing.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse

from .errors import AlreadyRunning, DecodeError, UnsupportedMediaType
from .model import Author, BlobRef, ModalPayload, PayloadKind, SessionStatus
from .rag import TEXT_MEDIA_TYPES
from .runtime import Runtime

MAX_UPLOAD_BYTES = 25 * 1024 * 1024
HEARTBEAT_SECONDS = 15.0

# frame types suppressed when a workflow opts out of trace exposure
TRACE_FRAME_TYPES = {"decision", "tool_call", "backend_call"}

_UPLOAD_KINDS = {"image": PayloadKind.IMAGE, "audio": PayloadKind.AUDIO}


@dataclass
class SessionStream:
    """Append-only frame log with a condition for live followers."""

    frames: list[dict] = field(default_factory=list)
    cond: threading.Condition = field(default_factory=threading.Condition)

    def append(self, type_: str, turn_id: str, body: dict) -> None:
        with self.cond:
            frame = {
                "type": type_,
                "turn_id": turn_id,
                "seq": len(self.frames) + 1,
                "body": body,
            }
            self.frames.append(frame)
            self.cond.notify_all()


class Metrics:
    def __init__(self):
        self._lock = threading.Lock()
        self._counters: dict[str, int] = {}

    def bump(self, name: str, by: int = 1) -> None:
        with self._lock:
            self._counters[name] = self._counters.get(name, 0) + by

    def render(self) -> str:
        with self._lock:
            return "".join(f"{k} {v}\n" for k, v in sorted(self._counters.items()))


def _error(status: int, detail, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail, **extra})


def create_app(
    runtime: Runtime | None = None,
    token: str | None = None,
    heartbeat_seconds: float = HEARTBEAT_SECONDS,
) -> FastAPI:
    rt = runtime or Runtime.bundled()
    app = FastAPI(title="maestro gateway")
    streams: dict[str, SessionStream] = {}
    metrics = Metrics()
    app.state.runtime = rt

    @app.middleware("http")
    async def bearer_auth(request, call_next):
        if token and request.url.path != "/healthz":
            if request.headers.get("authorization") != f"Bearer {token}":
                return _error(401, "missing or invalid bearer token")
        return await call_next(request)

    # -- sessions ----------------------------------------------------------

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: dict):
        workflow_id = body.get("workflow_id", "")
        wf = rt.workflows.get(workflow_id)
        if wf is None:
            return _error(404, f"unknown workflow {workflow_id!r}")
        diagnostics = [d for d in rt.validate(wf) if d.is_error]
        if diagnostics:
            return _error(
                422,
                "workflow does not validate",
                diagnostics=[json.loads(d.to_json()) for d in diagnostics],
            )
        session = rt.create_session(workflow_id)
        streams[session.id] = SessionStream()
        metrics.bump("maestro_sessions_created")
        return {"session_id": session.id}

    @app.get("/v1/workflows")
    def list_workflows():
        return {
            "workflows": [
                {"id": wf.id, "name": wf.name, "workers": wf.team_members()}
                for wf in rt.workflows.values()
            ]
        }

    # -- messages ----------------------------------------------------------

    @app.post("/v1/sessions/{session_id}/messages", status_code=202)
    def post_message(
        session_id: str,
        text: str | None = Form(default=None),
        files: list[UploadFile] = File(default=[]),
    ):
        session = rt.sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        if session.status is not SessionStatus.OPEN:
            return _error(409, f"session {session_id} is {session.status.value}")

        payloads: list[ModalPayload] = []
        if text:
            payloads.append(ModalPayload.from_text(text))
        for f in files:
            media_type = (f.content_type or "").split(";")[0].strip()
            kind = _UPLOAD_KINDS.get(media_type.partition("/")[0])
            if kind is None:
                return _error(415, f"unsupported media type {media_type!r}")
            data = f.file.read()
            if len(data) > MAX_UPLOAD_BYTES:
                return _error(413, f"file exceeds {MAX_UPLOAD_BYTES} bytes")
            digest = rt.blobs.put(data, media_type)
            ref = BlobRef(digest=digest, media_type=media_type, size=len(data))
            payloads.append(ModalPayload.from_blob(kind, ref))
        if not payloads:
            return _error(400, "message needs text or at least one file")

        try:
            rt.reserve_turn(session_id)
        except AlreadyRunning as err:
            return _error(409, str(err))

        turn_no = sum(1 for m in session.messages if m.author == Author.USER) + 1
        turn_id = f"{session_id}-t{turn_no}"
        stream = streams.setdefault(session_id, SessionStream())
        metrics.bump("maestro_turns_started")

        def work() -> None:
            def on_event(ev) -> None:
                stream.append(ev.type, turn_id, ev.data)
                metrics.bump("maestro_frames_total")

            try:
                result = rt.run_turn(session_id, payloads, on_event=on_event, reserved=True)
                metrics.bump(
                    "maestro_turns_failed"
                    if result.final_message is None
                    else "maestro_turns_completed"
                )
            except Exception as err:  # noqa: BLE001 - stream must still terminate
                stream.append("error", turn_id, {"error": type(err).__name__, "detail": str(err)})
                metrics.bump("maestro_turns_failed")

        threading.Thread(target=work, name=f"turn-{turn_id}", daemon=True).start()
        return {"turn_id": turn_id}

    # -- event stream --------------------------------------------------------

    @app.get("/v1/sessions/{session_id}/events")
    def events(session_id: str, from_seq: int = 1):
        session = rt.sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        stream = streams.setdefault(session_id, SessionStream())
        expose_trace = rt.workflows[session.workflow_id].expose_trace

        def sse():
            next_idx = max(from_seq - 1, 0)
            while True:
                with stream.cond:
                    if len(stream.frames) <= next_idx:
                        stream.cond.wait(timeout=heartbeat_seconds)
                batch = stream.frames[next_idx:]
                if not batch:
                    yield ": heartbeat\n\n"
                    continue
                for frame in batch:
                    next_idx = frame["seq"]
                    if not expose_trace and frame["type"] in TRACE_FRAME_TYPES:
                        continue
                    data = json.dumps(frame, ensure_ascii=False)
                    yield f"event: {frame['type']}\nid: {frame['seq']}\ndata: {data}\n\n"

        return StreamingResponse(
            sse(),
            media_type="text/event-stream",
            headers={"cache-control": "no-cache", "x-accel-buffering": "no"},
        )

    # -- retrieval ----------------------------------------------------------

    @app.post("/v1/rag/documents")
    def ingest(file: UploadFile = File(...)):
        media_type = (file.content_type or "").split(";")[0].strip()
        if media_type not in TEXT_MEDIA_TYPES:
            return _error(415, f"unsupported media type {media_type!r}")
        try:
            doc_id, chunks = rt.ingest(file.file.read(), media_type)
        except UnsupportedMediaType as err:
            return _error(415, str(err))
        except DecodeError as err:
            return _error(400, str(err))
        metrics.bump("maestro_documents_ingested")
        return {"doc_id": doc_id, "chunks": chunks}

    # -- blobs and plumbing ---------------------------------------------------

    @app.get("/v1/blobs/{digest}")
    def get_blob(digest: str):
        try:
            data = rt.blobs.get(digest)
        except KeyError:
            return _error(404, f"no blob {digest!r}")
        return Response(content=data, media_type=rt.blobs.media_type(digest))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/metrics")
    def metrics_endpoint():
        return PlainTextResponse(metrics.render())

    return app
