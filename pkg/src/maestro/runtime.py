"""Assembly of the full system: workflows, backends, tools, state, sessions.

``Runtime.bundled()`` builds the hermetic configuration that ships with the
package: four workflows, a mock backend replaying frozen fixtures, the
sample policy corpus pre-ingested, and canned web-search results.  Nothing
in it touches the network, so every run is reproducible byte for byte.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from importlib import resources

from .backends import BackendHub, Binding, MockAdapter
from .blobs import BlobStore
from .engine import EngineOptions, SupervisorEngine, TurnEvent, TurnResult
from .errors import AlreadyRunning
from .model import ModalPayload, Session
from .rag import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_OVERLAP,
    DEFAULT_TAU,
    DEFAULT_TOP_K,
    LetterFrequencyEmbedder,
    VectorIndex,
    answer_with_fallback,
    ingest_document,
)
from .resilience import HealthMonitor
from .store import StateStore
from .tools import RagSearchTool, SubflowTool, ToolContext, ToolRegistry, WebSearchTool
from .workflow import Workflow, parse_workflow, validate_workflow

BUNDLED_WORKFLOWS = ("code_review", "rag", "image_gen", "video_gen")
CHAT_BINDING = "chat"
MEDIA_BINDING = "media"


class RagAnswerTool:
    """One-shot grounded answer: retrieve, gate, generate or fall back.

    The extractive generator answers with the best chunk's text; the web
    fallback reuses the registered web-search tool.
    """

    def __init__(self, index: VectorIndex, embedder, web: WebSearchTool):
        self.index = index
        self.embedder = embedder
        self.web = web

    def invoke(self, args: dict, ctx: ToolContext) -> dict:
        query = str(args.get("query", "")).strip()
        tau = float(ctx.node.config_get("tau", DEFAULT_TAU))
        k = int(ctx.node.config_get("k", DEFAULT_TOP_K))
        answer = answer_with_fallback(
            query,
            self.index,
            tau=tau,
            embedder=self.embedder,
            generate=lambda q, hits: hits[0].chunk.text,
            web_search=lambda q: self.web.invoke({"query": q}, ctx),
            k=k,
        )
        return {
            "text": answer.text,
            "source": answer.source,
            "top_score": round(answer.top_score, 6),
            "citation": answer.citation,
        }


@dataclass
class Runtime:
    blobs: BlobStore = field(default_factory=BlobStore)
    store: StateStore = field(default_factory=StateStore)
    hub: BackendHub = field(default_factory=BackendHub)
    tools: ToolRegistry = field(default_factory=ToolRegistry)
    index: VectorIndex = field(default_factory=VectorIndex)
    embedder: LetterFrequencyEmbedder = field(default_factory=LetterFrequencyEmbedder)
    monitor: HealthMonitor = field(default_factory=HealthMonitor)
    options: EngineOptions = field(default_factory=EngineOptions)
    workflows: dict[str, Workflow] = field(default_factory=dict)
    sessions: dict[str, Session] = field(default_factory=dict)
    web_tool: WebSearchTool | None = None
    _session_seq: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _busy: set[str] = field(default_factory=set)

    # -- construction -----------------------------------------------------

    @classmethod
    def bundled(cls, adapters: dict[str, MockAdapter] | None = None) -> Runtime:
        """The packaged hermetic runtime: mock backends and frozen fixtures.

        ``adapters`` swaps in caller-supplied mocks (scripted or recording)
        for the named bindings while keeping the rest of the wiring.
        """
        rt = cls()
        rt.hub = BackendHub(blobs=rt.blobs)
        data = resources.files("maestro.data")

        adapters = adapters or {}
        for name in (CHAT_BINDING, MEDIA_BINDING):
            adapter = adapters.get(name)
            if adapter is None:
                adapter = MockAdapter()
                fixture_path = data / "fixtures" / f"{name}.json"
                if fixture_path.is_file():
                    adapter.merge(MockAdapter.load_fixture_file(fixture_path))
            rt.hub.register(
                Binding(name=name, adapter="mock", model="gpt-4o" if name == CHAT_BINDING else ""),
                adapter=adapter,
            )
        rt.options = EngineOptions(transcribe_binding=CHAT_BINDING)

        web_rows = (data / "web" / "web_results.json").read_text(encoding="utf-8")
        rt.web_tool = WebSearchTool(json.loads(web_rows))
        rt.tools.register("google-custom-search", rt.web_tool)
        rt.tools.register("search_dress_code", RagSearchTool(rt.index, rt.embedder))
        rt.tools.register("rag_answer", RagAnswerTool(rt.index, rt.embedder, rt.web_tool))

        for wf_id in BUNDLED_WORKFLOWS:
            text = (data / "workflows" / f"{wf_id}.json").read_text(encoding="utf-8")
            rt.register_workflow(parse_workflow(text))

        corpus = (data / "corpus" / "dress_code.txt").read_bytes()
        rt.ingest(corpus, "text/plain")
        return rt

    # -- workflows ---------------------------------------------------------

    def register_workflow(self, wf: Workflow) -> None:
        self.workflows[wf.id] = wf
        self.tools.register(f"subflow:{wf.id}", SubflowTool(wf.id))

    def validate(self, wf: Workflow):
        return validate_workflow(wf, known_tools=self.tools.names())

    # -- sessions ------------------------------------------------------------

    def create_session(self, workflow_id: str) -> Session:
        if workflow_id not in self.workflows:
            raise KeyError(f"no workflow named {workflow_id!r}")
        with self._lock:
            self._session_seq += 1
            session = Session(id=f"s{self._session_seq}", workflow_id=workflow_id)
            self.sessions[session.id] = session
        return session

    def engine_for(self, workflow_id: str) -> SupervisorEngine:
        return SupervisorEngine(
            workflow=self.workflows[workflow_id],
            hub=self.hub,
            store=self.store,
            blobs=self.blobs,
            tools=self.tools,
            monitor=self.monitor,
            options=self.options,
            runtime=self,
        )

    def reserve_turn(self, session_id: str) -> None:
        """Claim the session's single turn slot, for callers that run the
        turn on another thread but must refuse conflicts synchronously."""
        with self._lock:
            if session_id in self._busy:
                raise AlreadyRunning(f"session {session_id} has a turn in flight")
            self._busy.add(session_id)

    def run_turn(self, session_id: str, payloads, on_event=None, reserved: bool = False) -> TurnResult:
        """One turn on one session; concurrent turns on a session are refused."""
        session = self.sessions[session_id]
        if not reserved:
            self.reserve_turn(session_id)
        try:
            engine = self.engine_for(session.workflow_id)
            return engine.run_turn(session, payloads, on_event=on_event)
        finally:
            with self._lock:
                self._busy.discard(session_id)

    def run_subflow(self, workflow_id: str, query: str) -> str:
        """Nested workflow on a private session; its memory stays isolated."""
        session = self.create_session(workflow_id)
        result = self.run_turn(session.id, [ModalPayload.from_text(query)])
        if result.final_message is None:
            errors = [e for e in result.events if e.type == "error"]
            detail = errors[0].data.get("detail", "") if errors else ""
            raise RuntimeError(f"subflow {workflow_id} failed: {detail}")
        return result.final_message.text()

    # -- retrieval -------------------------------------------------------------

    def ingest(
        self,
        data: bytes,
        media_type: str,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap: int = DEFAULT_OVERLAP,
        metadata: dict | None = None,
    ) -> tuple[str, int]:
        return ingest_document(
            data,
            media_type,
            self.index,
            self.embedder,
            chunk_size=chunk_size,
            overlap=overlap,
            metadata=metadata,
        )
