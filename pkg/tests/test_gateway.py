"""Gateway HTTP contract: sessions, uploads, SSE streams, ingestion.

The SSE endpoints stream forever, so these tests run against a real
uvicorn server on an ephemeral port instead of the buffering TestClient.
"""

import json
import socket
import threading
import time
from contextlib import contextmanager

import httpx
import pytest
import uvicorn

from maestro.backends import BackendResponse
from maestro.gateway import MAX_UPLOAD_BYTES, create_app
from maestro.model import SessionStatus
from maestro.runtime import Runtime
from maestro.workflow import parse_workflow


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@contextmanager
def serve(app):
    port = _free_port()
    config = uvicorn.Config(
        app, host="127.0.0.1", port=port, log_level="critical", access_log=False
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline or not thread.is_alive():
            raise RuntimeError("gateway server failed to start")
        time.sleep(0.01)
    client = httpx.Client(base_url=f"http://127.0.0.1:{port}", timeout=30.0)
    try:
        yield client
    finally:
        client.close()
        server.should_exit = True
        server.force_exit = True
        thread.join(timeout=5)


@pytest.fixture(scope="module")
def bundled_client():
    with serve(create_app(heartbeat_seconds=0.05)) as client:
        yield client


def read_stream(client, session_id, from_seq=1, until=("done", "error"), max_frames=500):
    frames, comments = [], []
    with client.stream(
        "GET", f"/v1/sessions/{session_id}/events", params={"from_seq": from_seq}
    ) as resp:
        assert resp.status_code == 200
        current = {}
        for line in resp.iter_lines():
            if line.startswith(":"):
                comments.append(line)
                continue
            if line.startswith("event: "):
                current["event"] = line[len("event: "):]
            elif line.startswith("id: "):
                current["id"] = int(line[len("id: "):])
            elif line.startswith("data: "):
                current["data"] = json.loads(line[len("data: "):])
            elif line == "" and current:
                frames.append(current)
                if current["event"] in until or len(frames) >= max_frames:
                    break
                current = {}
    return frames, comments


def open_session(client, workflow_id):
    resp = client.post("/v1/sessions", json={"workflow_id": workflow_id})
    assert resp.status_code == 201, resp.text
    return resp.json()["session_id"]


class TestSessions:
    def test_create(self, bundled_client):
        sid = open_session(bundled_client, "rag")
        assert sid.startswith("s")

    def test_unknown_workflow_404(self, bundled_client):
        resp = bundled_client.post("/v1/sessions", json={"workflow_id": "ghost"})
        assert resp.status_code == 404

    def test_invalid_workflow_422_with_codes(self):
        rt = Runtime.bundled()
        bad = parse_workflow(json.dumps({
            "id": "bad", "name": "bad", "entry": "ghost",
            "nodes": [{"name": "boss", "kind": "supervisor", "system": "x {team_members}"},
                      {"name": "w", "kind": "worker", "system": "y"}],
        }))
        rt.workflows["bad"] = bad
        with serve(create_app(rt)) as client:
            resp = client.post("/v1/sessions", json={"workflow_id": "bad"})
            assert resp.status_code == 422
            codes = {d["code"] for d in resp.json()["diagnostics"]}
            assert "W006" in codes

    def test_workflow_listing(self, bundled_client):
        resp = bundled_client.get("/v1/workflows")
        ids = {w["id"] for w in resp.json()["workflows"]}
        assert {"code_review", "rag", "image_gen", "video_gen"} <= ids


class TestMessages:
    def test_turn_streams_to_done(self, bundled_client):
        sid = open_session(bundled_client, "rag")
        resp = bundled_client.post(
            f"/v1/sessions/{sid}/messages",
            data={"text": "What is the men's dress code?"},
        )
        assert resp.status_code == 202
        turn_id = resp.json()["turn_id"]
        assert turn_id == f"{sid}-t1"

        frames, _ = read_stream(bundled_client, sid)
        assert frames[-1]["event"] == "done"
        types = [f["event"] for f in frames]
        assert "decision" in types and "tool_call" in types
        finals = [
            f for f in frames
            if f["event"] == "message"
            and f["data"]["body"].get("meta", {}).get("source") == "rag"
        ]
        assert finals, types
        assert "collared shirts" in finals[-1]["data"]["body"]["text"]
        assert all(f["data"]["turn_id"] == turn_id for f in frames)
        seqs = [f["id"] for f in frames]
        assert seqs == sorted(seqs)

    def test_unknown_session_404(self, bundled_client):
        resp = bundled_client.post("/v1/sessions/ghost/messages", data={"text": "x"})
        assert resp.status_code == 404

    def test_empty_message_400(self, bundled_client):
        sid = open_session(bundled_client, "rag")
        resp = bundled_client.post(f"/v1/sessions/{sid}/messages", data={})
        assert resp.status_code == 400

    def test_closed_session_409(self):
        rt = Runtime.bundled()
        with serve(create_app(rt)) as client:
            sid = open_session(client, "rag")
            rt.sessions[sid].status = SessionStatus.CLOSED
            resp = client.post(f"/v1/sessions/{sid}/messages", data={"text": "x"})
            assert resp.status_code == 409

    def test_oversized_upload_413(self, bundled_client):
        sid = open_session(bundled_client, "code_review")
        big = b"\0" * (MAX_UPLOAD_BYTES + 1)
        resp = bundled_client.post(
            f"/v1/sessions/{sid}/messages",
            files={"files": ("big.png", big, "image/png")},
        )
        assert resp.status_code == 413

    def test_unsupported_upload_415(self, bundled_client):
        sid = open_session(bundled_client, "code_review")
        resp = bundled_client.post(
            f"/v1/sessions/{sid}/messages",
            files={"files": ("doc.pdf", b"%PDF-", "application/pdf")},
        )
        assert resp.status_code == 415

    def test_second_post_while_running_409(self):
        release = threading.Event()

        class GateAdapter:
            def invoke(self, req):
                release.wait(timeout=10)
                return BackendResponse(text="FINISH")

        rt = Runtime.bundled(adapters={"chat": GateAdapter(), "media": GateAdapter()})
        with serve(create_app(rt)) as client:
            sid = open_session(client, "rag")
            first = client.post(f"/v1/sessions/{sid}/messages", data={"text": "one"})
            assert first.status_code == 202
            second = client.post(f"/v1/sessions/{sid}/messages", data={"text": "two"})
            assert second.status_code == 409
            release.set()
            frames, _ = read_stream(client, sid)
            assert frames[-1]["event"] == "done"


class TestImageTurnAndBlobs:
    def test_code_review_with_image_upload(self, bundled_client):
        from importlib import resources

        png = (
            resources.files("maestro.data.scenarios") / "media" / "sample_code.png"
        ).read_bytes()
        sid = open_session(bundled_client, "code_review")
        resp = bundled_client.post(
            f"/v1/sessions/{sid}/messages",
            data={"text": "Analyze the image and complete the code"},
            files={"files": ("sample_code.png", png, "image/png")},
        )
        assert resp.status_code == 202
        frames, _ = read_stream(bundled_client, sid)
        workers = [
            f["data"]["body"]["author"]
            for f in frames
            if f["event"] == "message" and f["data"]["body"]["author"].startswith("worker:")
        ]
        assert workers == [
            "worker:Senior Programmer", "worker:Quality Assurance Engineer"
        ]
        user_media = next(
            f["data"]["body"]["media"]
            for f in frames
            if f["event"] == "message" and f["data"]["body"]["author"] == "user"
        )
        digest = user_media[0]["digest"]

        # uploaded bytes must round-trip through the blob store unchanged
        blob = bundled_client.get(f"/v1/blobs/{digest}")
        assert blob.status_code == 200
        assert blob.content == png
        assert blob.headers["content-type"].startswith("image/png")

    def test_generated_media_is_downloadable(self, bundled_client):
        sid = open_session(bundled_client, "video_gen")
        resp = bundled_client.post(
            f"/v1/sessions/{sid}/messages",
            data={"text": "A dog walks on the grass, realistic style video"},
        )
        assert resp.status_code == 202
        frames, _ = read_stream(bundled_client, sid)
        final = [
            f for f in frames
            if f["event"] == "message" and f["data"]["body"].get("media")
            and f["data"]["body"]["author"].startswith("worker:")
        ][-1]
        media = final["data"]["body"]["media"][0]
        assert media["media_type"] == "video/mp4"
        blob = bundled_client.get(f"/v1/blobs/{media['digest']}")
        assert blob.status_code == 200
        assert blob.content[4:8] == b"ftyp"

    def test_missing_blob_404(self, bundled_client):
        assert bundled_client.get("/v1/blobs/" + "0" * 64).status_code == 404


class TestEventStream:
    def test_unknown_session_404(self, bundled_client):
        resp = bundled_client.get("/v1/sessions/ghost/events")
        assert resp.status_code == 404

    def test_replay_matches_live_and_resume_has_no_gaps(self):
        entered = threading.Event()
        release = threading.Event()

        class StepAdapter:
            def invoke(self, req):
                entered.set()
                release.wait(timeout=10)
                return BackendResponse(text="FINISH")

        rt = Runtime.bundled(adapters={"chat": StepAdapter(), "media": StepAdapter()})
        with serve(create_app(rt, heartbeat_seconds=0.05)) as client:
            sid = open_session(client, "rag")
            client.post(f"/v1/sessions/{sid}/messages", data={"text": "hello"})
            assert entered.wait(timeout=5)

            # mid-turn subscriber sees the user message frame, then we drop
            early, _ = read_stream(client, sid, until=("message",), max_frames=2)
            assert early
            last_seen = early[-1]["id"]
            release.set()

            resumed, _ = read_stream(client, sid, from_seq=last_seen + 1)
            assert resumed[-1]["event"] == "done"
            early_ids = {f["id"] for f in early}
            resumed_ids = {f["id"] for f in resumed}
            assert not early_ids & resumed_ids
            assert early_ids | resumed_ids == set(range(1, max(resumed_ids) + 1))

            # full replay after the fact equals the union, in order
            replay, _ = read_stream(client, sid)
            assert [f["id"] for f in replay] == sorted(early_ids | resumed_ids)

    def test_heartbeat_comments_flow_when_idle(self, bundled_client):
        sid = open_session(bundled_client, "rag")
        with bundled_client.stream("GET", f"/v1/sessions/{sid}/events") as resp:
            for line in resp.iter_lines():
                if line.startswith(":"):
                    break

    def test_trace_frames_suppressed_when_workflow_opts_out(self):
        from importlib import resources

        rt = Runtime.bundled()
        quiet = json.loads(
            (resources.files("maestro.data.workflows") / "rag.json")
            .read_text(encoding="utf-8")
        )
        quiet["id"] = "rag_quiet"
        quiet["expose_trace"] = False
        rt.register_workflow(parse_workflow(json.dumps(quiet)))
        with serve(create_app(rt)) as client:
            sid = open_session(client, "rag_quiet")
            client.post(
                f"/v1/sessions/{sid}/messages",
                data={"text": "What is the men's dress code?"},
            )
            frames, _ = read_stream(client, sid)
            types = {f["event"] for f in frames}
            assert types & {"decision", "tool_call", "backend_call"} == set()
            assert "message" in types and "done" in types


class TestIngestion:
    def test_document_round_trip(self, bundled_client):
        body = b"Ingested paragraph one.\n\nIngested paragraph two."
        resp = bundled_client.post(
            "/v1/rag/documents",
            files={"file": ("doc.txt", body, "text/plain")},
        )
        assert resp.status_code == 200
        first = resp.json()
        assert set(first) == {"doc_id", "chunks"}
        again = bundled_client.post(
            "/v1/rag/documents", files={"file": ("doc.txt", body, "text/plain")}
        )
        assert again.json() == first

    def test_pdf_415(self, bundled_client):
        resp = bundled_client.post(
            "/v1/rag/documents", files={"file": ("d.pdf", b"%PDF-", "application/pdf")}
        )
        assert resp.status_code == 415

    def test_bad_utf8_400(self, bundled_client):
        resp = bundled_client.post(
            "/v1/rag/documents", files={"file": ("d.txt", b"\xff\xfe\xff", "text/plain")}
        )
        assert resp.status_code == 400


class TestAuthAndPlumbing:
    def test_bearer_token_enforced(self):
        with serve(create_app(Runtime.bundled(), token="sesame")) as client:
            assert client.get("/v1/workflows").status_code == 401
            ok = client.get(
                "/v1/workflows", headers={"authorization": "Bearer sesame"}
            )
            assert ok.status_code == 200
            # liveness probe stays open
            assert client.get("/healthz").status_code == 200

    def test_healthz(self, bundled_client):
        resp = bundled_client.get("/healthz")
        assert resp.json() == {"status": "ok"}

    def test_metrics_plaintext(self, bundled_client):
        open_session(bundled_client, "rag")
        resp = bundled_client.get("/metrics")
        assert resp.headers["content-type"].startswith("text/plain")
        lines = dict(
            line.split(" ", 1) for line in resp.text.splitlines() if line
        )
        assert int(lines["maestro_sessions_created"]) >= 1

    def test_concurrent_sessions_stay_disjoint(self):
        # fresh app: turns must not bleed into each other's streams
        with serve(create_app(heartbeat_seconds=0.05)) as client:
            a = open_session(client, "rag")
            b = open_session(client, "video_gen")
            client.post(
                f"/v1/sessions/{a}/messages",
                data={"text": "What is the men's dress code?"},
            )
            client.post(
                f"/v1/sessions/{b}/messages",
                data={"text": "A dog walks on the grass, realistic style video"},
            )
            frames_a, _ = read_stream(client, a)
            frames_b, _ = read_stream(client, b)
            assert all(f["data"]["turn_id"].startswith(a) for f in frames_a)
            assert all(f["data"]["turn_id"].startswith(b) for f in frames_b)
            assert frames_a[-1]["event"] == "done"
            assert frames_b[-1]["event"] == "done"
