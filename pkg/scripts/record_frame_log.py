"""Record the code-review scenario's gateway frame log for UI replay tests.

Boots the real HTTP server, runs the S1 turn (code image + prompt), reads
the SSE stream to its done frame, and writes the parsed frames to
frontend/tests/data/s1_frames.json.  The UI's replay-determinism test
renders this log; regenerate it whenever the frame contract changes.
"""

import json
import socket
import threading
import time
from importlib import resources
from pathlib import Path

import httpx
import uvicorn

from maestro.gateway import create_app

OUT = Path(__file__).parent.parent / "frontend" / "tests" / "data" / "s1_frames.json"


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def read_frames(client: httpx.Client, session_id: str) -> list[dict]:
    frames = []
    with client.stream("GET", f"/v1/sessions/{session_id}/events") as resp:
        event, data, frame_id = None, [], None
        for line in resp.iter_lines():
            if line.startswith(":"):
                continue
            if line == "":
                if event is not None:
                    frames.append(
                        {"event": event, "id": frame_id, "data": json.loads("\n".join(data))}
                    )
                    if event in ("done", "error"):
                        break
                event, data, frame_id = None, [], None
                continue
            field, _, value = line.partition(":")
            value = value.removeprefix(" ")
            if field == "event":
                event = value
            elif field == "id":
                frame_id = int(value)
            elif field == "data":
                data.append(value)
    return frames


def main() -> None:
    port = free_port()
    config = uvicorn.Config(
        create_app(heartbeat_seconds=5.0),
        host="127.0.0.1",
        port=port,
        log_level="critical",
        access_log=False,
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    while not server.started:
        time.sleep(0.01)

    png = (resources.files("maestro.data") / "scenarios" / "media" / "sample_code.png").read_bytes()
    with httpx.Client(base_url=f"http://127.0.0.1:{port}", timeout=30.0) as client:
        sid = client.post("/v1/sessions", json={"workflow_id": "code_review"}).json()["session_id"]
        resp = client.post(
            f"/v1/sessions/{sid}/messages",
            data={"text": "Analyze the image and complete the code"},
            files={"files": ("sample_code.png", png, "image/png")},
        )
        assert resp.status_code == 202, resp.text
        frames = read_frames(client, sid)

    server.should_exit = True
    server.force_exit = True

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(frames, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(frames)} frames to {OUT}")


if __name__ == "__main__":
    main()
