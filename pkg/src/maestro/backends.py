"""Model-backend bindings: one request shape, three adapters.

Every call is a BackendRequest; adapters differ only in how they satisfy it.
The mock adapter replays canned responses keyed by a canonical request
digest, which keeps the entire engine test surface hermetic and offline.
Wire adapters translate to the two dominant HTTP shapes (chat-completions
and create-then-poll prediction endpoints) through an injectable transport.

Credential hygiene: bindings carry the *name* of an environment variable,
never the secret itself, and nothing in this module logs header values.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

from .blobs import BlobStore, sha256_hex
from .errors import (
    AuthError,
    FixtureMiss,
    FixtureParseError,
    ProviderError,
    Timeout,
    TransportFailure,
)
from .model import ModalPayload, PayloadKind

CHAT_TIMEOUT_SECONDS = 60.0
VIDEO_TIMEOUT_SECONDS = 300.0
BINDING_MAX_CONCURRENCY = 8
POLL_DELAYS = (1.0, 2.0, 4.0)  # then 5.0 forever


class BackendKind(str, Enum):
    CHAT_COMPLETION = "chat_completion"
    VISION_COMPLETION = "vision_completion"
    TRANSCRIPTION = "transcription"
    IMAGE_GENERATION = "image_generation"
    VIDEO_GENERATION = "video_generation"


GENERATION_KINDS = {BackendKind.IMAGE_GENERATION, BackendKind.VIDEO_GENERATION}


@dataclass(frozen=True)
class BackendRequest:
    kind: BackendKind
    model: str
    system: str | None = None
    messages: tuple[tuple[str, tuple[ModalPayload, ...]], ...] = ()
    params: tuple[tuple[str, str], ...] = ()

    def first_blob(self, kind: PayloadKind) -> str | None:
        for _, payloads in self.messages:
            for p in payloads:
                if p.kind is kind and p.blob is not None:
                    return p.blob.digest
        return None

    def joined_text(self) -> str:
        parts = [p.text for _, payloads in self.messages for p in payloads
                 if p.kind is PayloadKind.TEXT and p.text]
        return "\n".join(parts)


@dataclass(frozen=True)
class BackendResponse:
    text: str | None = None
    data: bytes | None = None
    media_type: str | None = None


def payload_token(p: ModalPayload) -> str:
    if p.kind is PayloadKind.TEXT:
        return f"text:{p.text}"
    assert p.blob is not None
    return f"{p.kind.value}:{p.blob.digest}"


def canonical_key(req: BackendRequest) -> str:
    """Canonical digest of a request; the mock fixture key for text calls.

    Transcription and vision requests key on the media blob instead so one
    recorded fixture covers every conversation that includes that blob.
    """
    if req.kind is BackendKind.TRANSCRIPTION:
        digest = req.first_blob(PayloadKind.AUDIO)
        if digest:
            return digest
    if req.kind is BackendKind.VISION_COMPLETION:
        digest = req.first_blob(PayloadKind.IMAGE)
        if digest:
            return digest
    doc = {
        "kind": req.kind.value,
        "model": req.model,
        "system": req.system,
        "messages": [[role, [payload_token(p) for p in payloads]]
                     for role, payloads in req.messages],
        "params": dict(req.params),
    }
    return sha256_hex(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode())


class Adapter(Protocol):
    def invoke(self, req: BackendRequest) -> BackendResponse: ...


class MockAdapter:
    """Replay adapter: canonical request key -> canned response.

    Fixture files map hex digests to ``{"text": ...}`` or
    ``{"blob_b64": ..., "media_type": ...}`` objects.  Unknown keys fail
    loudly with FixtureMiss; a test must never silently invent a reply.
    ``on_miss`` turns the adapter into a recorder for fixture freezing.
    """

    def __init__(
        self,
        fixtures: dict[str, dict] | None = None,
        on_miss: Callable[[BackendRequest, str], BackendResponse] | None = None,
    ):
        self.fixtures = dict(fixtures or {})
        self.on_miss = on_miss
        self.calls: list[tuple[str, BackendRequest]] = []

    @staticmethod
    def load_fixture_file(path) -> dict[str, dict]:
        try:
            raw = json.loads(open(path, encoding="utf-8").read())
        except (OSError, json.JSONDecodeError) as err:
            raise FixtureParseError(f"{path}: {err}") from err
        if not isinstance(raw, dict):
            raise FixtureParseError(f"{path}: fixture root must be an object")
        return raw

    def merge(self, fixtures: dict[str, dict]) -> None:
        self.fixtures.update(fixtures)

    def invoke(self, req: BackendRequest) -> BackendResponse:
        key = canonical_key(req)
        self.calls.append((key, req))
        entry = self.fixtures.get(key)
        if entry is None:
            if self.on_miss is not None:
                resp = self.on_miss(req, key)
                self.fixtures[key] = response_to_fixture(req, resp)
                return resp
            raise FixtureMiss(key)
        if "text" in entry:
            return BackendResponse(text=entry["text"])
        if "blob_b64" in entry:
            return BackendResponse(
                data=base64.b64decode(entry["blob_b64"]),
                media_type=entry.get("media_type", "application/octet-stream"),
            )
        raise FixtureParseError(f"fixture {key} has neither text nor blob_b64")


def response_to_fixture(req: BackendRequest, resp: BackendResponse) -> dict:
    entry: dict = {"kind": req.kind.value}
    if resp.text is not None:
        entry["text"] = resp.text
    if resp.data is not None:
        entry["blob_b64"] = base64.b64encode(resp.data).decode("ascii")
        entry["media_type"] = resp.media_type or "application/octet-stream"
    return entry


# --- wire adapters -----------------------------------------------------------


class Transport(Protocol):
    """Minimal HTTP hook so wire adapters are testable without sockets."""

    def request(
        self,
        method: str,
        url: str,
        headers: dict[str, str],
        json_body: dict | None,
        timeout: float,
    ) -> tuple[int, bytes]: ...


class HttpxTransport:
    def request(self, method, url, headers, json_body, timeout):
        import httpx

        try:
            resp = httpx.request(method, url, headers=headers, json=json_body, timeout=timeout)
        except httpx.TimeoutException as err:
            raise Timeout(str(err)) from err
        except httpx.HTTPError as err:
            raise TransportFailure(str(err)) from err
        return resp.status_code, resp.content


def _raise_for_status(status: int, body: bytes) -> None:
    if status in (401, 403):
        raise AuthError(f"provider returned {status}")
    if status >= 400:
        raise ProviderError(status, sha256_hex(body))


def _data_url(blob_b64: str, media_type: str) -> str:
    return f"data:{media_type};base64,{blob_b64}"


class ChatCompletionsWire:
    """OpenAI-style chat completions endpoint, media inlined as data URLs."""

    def __init__(self, base_url: str, api_key: str | None, transport: Transport,
                 blobs: BlobStore):
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self.transport = transport
        self.blobs = blobs

    def build_body(self, req: BackendRequest) -> dict:
        messages: list[dict] = []
        if req.system:
            messages.append({"role": "system", "content": req.system})
        for role, payloads in req.messages:
            content: list[dict] = []
            for p in payloads:
                if p.kind is PayloadKind.TEXT:
                    content.append({"type": "text", "text": p.text})
                    continue
                assert p.blob is not None
                b64 = base64.b64encode(self.blobs.get(p.blob.digest)).decode("ascii")
                if p.kind is PayloadKind.IMAGE:
                    content.append({
                        "type": "image_url",
                        "image_url": {"url": _data_url(b64, p.blob.media_type)},
                    })
                elif p.kind is PayloadKind.AUDIO:
                    fmt = p.blob.media_type.partition("/")[2] or "wav"
                    content.append({
                        "type": "input_audio",
                        "input_audio": {"data": b64, "format": fmt},
                    })
                else:
                    content.append({
                        "type": "video_url",
                        "video_url": {"url": _data_url(b64, p.blob.media_type)},
                    })
            messages.append({"role": role, "content": content})
        body = {"model": req.model, "messages": messages}
        body.update({k: _maybe_number(v) for k, v in req.params})
        return body

    def invoke(self, req: BackendRequest) -> BackendResponse:
        headers = {"content-type": "application/json"}
        if self._api_key:
            headers["authorization"] = f"Bearer {self._api_key}"
        status, body = self.transport.request(
            "POST",
            f"{self.base_url}/v1/chat/completions",
            headers,
            self.build_body(req),
            timeout=CHAT_TIMEOUT_SECONDS,
        )
        _raise_for_status(status, body)
        try:
            text = json.loads(body)["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as err:
            raise ProviderError(status, sha256_hex(body)) from err
        return BackendResponse(text=text)


class PredictionWire:
    """Create-then-poll prediction endpoint for long-running generation.

    Polls at 1s, 2s, 4s, then every 5s until the prediction settles or the
    kind's timeout budget is spent.
    """

    def __init__(self, base_url: str, api_key: str | None, transport: Transport,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic,
                 blobs: BlobStore | None = None):
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self.transport = transport
        self.sleep = sleep
        self.clock = clock
        self.blobs = blobs

    def build_create_body(self, req: BackendRequest) -> dict:
        inputs: dict = {"prompt": req.joined_text()}
        image = self._first_image(req)
        if image is not None:
            inputs["image"] = image
        inputs.update({k: _maybe_number(v) for k, v in req.params})
        return {"model": req.model, "input": inputs}

    def _first_image(self, req: BackendRequest) -> str | None:
        """Data URL of the request's first image payload, if any."""
        for _, payloads in req.messages:
            for p in payloads:
                if p.kind is PayloadKind.IMAGE and p.blob is not None:
                    if self.blobs is None:
                        raise TransportFailure(
                            f"no blob store to resolve image {p.blob.digest[:12]}"
                        )
                    b64 = base64.b64encode(self.blobs.get(p.blob.digest)).decode("ascii")
                    return _data_url(b64, p.blob.media_type)
        return None

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        if self._api_key:
            headers["authorization"] = f"Bearer {self._api_key}"
        return headers

    def invoke(self, req: BackendRequest) -> BackendResponse:
        budget = VIDEO_TIMEOUT_SECONDS if req.kind in GENERATION_KINDS else CHAT_TIMEOUT_SECONDS
        deadline = self.clock() + budget
        status, body = self.transport.request(
            "POST", f"{self.base_url}/v1/predictions", self._headers(),
            self.build_create_body(req), timeout=budget,
        )
        _raise_for_status(status, body)
        prediction = json.loads(body)
        poll = 0
        while prediction.get("status") not in ("succeeded", "failed", "canceled"):
            if self.clock() >= deadline:
                raise Timeout(f"prediction {prediction.get('id')} unfinished after {budget}s")
            self.sleep(POLL_DELAYS[poll] if poll < len(POLL_DELAYS) else 5.0)
            poll += 1
            status, body = self.transport.request(
                "GET", f"{self.base_url}/v1/predictions/{prediction['id']}",
                self._headers(), None, timeout=budget,
            )
            _raise_for_status(status, body)
            prediction = json.loads(body)
        if prediction["status"] != "succeeded":
            raise ProviderError(502, sha256_hex(body))
        return self._decode_output(prediction.get("output"))

    def _decode_output(self, output) -> BackendResponse:
        if isinstance(output, list):
            output = output[0] if output else None
        if isinstance(output, str) and output.startswith("data:"):
            head, _, b64 = output.partition(",")
            media_type = head[len("data:"):].split(";")[0] or "application/octet-stream"
            return BackendResponse(data=base64.b64decode(b64), media_type=media_type)
        if isinstance(output, str):
            status, body = self.transport.request(
                "GET", output, {}, None, timeout=CHAT_TIMEOUT_SECONDS
            )
            _raise_for_status(status, body)
            media_type = "video/mp4" if output.endswith(".mp4") else "image/png"
            return BackendResponse(data=body, media_type=media_type)
        raise ProviderError(502, sha256_hex(json.dumps(output).encode()))


def _maybe_number(v: str):
    """Params travel as strings; wire bodies want real numbers where possible."""
    try:
        return int(v)
    except (TypeError, ValueError):
        try:
            return float(v)
        except (TypeError, ValueError):
            return v


# --- the hub -----------------------------------------------------------------


@dataclass(frozen=True)
class Binding:
    """A named backend: which adapter, which model, where, and what secret."""

    name: str
    adapter: str  # "mock" | "chat_completions" | "prediction"
    model: str = ""
    base_url: str = ""
    api_key_env: str | None = None
    max_concurrency: int = BINDING_MAX_CONCURRENCY

    def resolve_key(self) -> str | None:
        if not self.api_key_env:
            return None
        value = os.environ.get(self.api_key_env)
        if value is None:
            raise AuthError(f"environment variable {self.api_key_env} is not set")
        return value


@dataclass
class _Bound:
    binding: Binding
    adapter: Adapter
    gate: threading.BoundedSemaphore


class BackendHub:
    """Registry of bindings; every invoke passes the binding's concurrency gate."""

    def __init__(self, blobs: BlobStore | None = None):
        self.blobs = blobs or BlobStore()
        self._bound: dict[str, _Bound] = {}
        self.invocations: list[str] = []

    def register(self, binding: Binding, adapter: Adapter | None = None,
                 transport: Transport | None = None) -> None:
        if adapter is None:
            adapter = self._build_adapter(binding, transport)
        self._bound[binding.name] = _Bound(
            binding=binding,
            adapter=adapter,
            gate=threading.BoundedSemaphore(binding.max_concurrency),
        )

    def _build_adapter(self, binding: Binding, transport: Transport | None) -> Adapter:
        if binding.adapter == "mock":
            return MockAdapter()
        transport = transport or HttpxTransport()
        if binding.adapter == "chat_completions":
            return ChatCompletionsWire(
                binding.base_url, binding.resolve_key(), transport, self.blobs
            )
        if binding.adapter == "prediction":
            return PredictionWire(
                binding.base_url, binding.resolve_key(), transport, blobs=self.blobs
            )
        raise ValueError(f"unknown adapter kind: {binding.adapter}")

    def adapter(self, name: str) -> Adapter:
        return self._bound[name].adapter

    def model_of(self, name: str) -> str:
        bound = self._bound.get(name)
        return bound.binding.model if bound else ""

    def names(self) -> list[str]:
        return sorted(self._bound)

    def invoke(self, name: str, req: BackendRequest) -> BackendResponse:
        if name not in self._bound:
            raise KeyError(f"no backend binding named {name!r}")
        bound = self._bound[name]
        with bound.gate:
            self.invocations.append(name)
            return bound.adapter.invoke(req)
