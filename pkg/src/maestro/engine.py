"""The supervisor routing loop.

One turn: preprocess the user's payloads (audio becomes text via a
transcription backend, the original blob kept as message metadata), then
alternate supervisor decisions and worker executions until the supervisor
answers FINISH or the hop budget runs out.  Hop exhaustion produces a
result flagged degraded, never a silent partial answer.

Every externally visible step is appended to the turn trace; stream
consumers map trace events one-to-one onto frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .backends import BackendHub, BackendKind, BackendRequest, BackendResponse, canonical_key
from .blobs import BlobStore
from .errors import (
    HopLimitExceeded,
    MaestroError,
    NoTranscriptionBackend,
    RouteParseError,
    ToolFailure,
)
from .model import (
    Author,
    BlobRef,
    ChatMessage,
    ModalPayload,
    PayloadKind,
    PromptTemplate,
    Session,
    append_message,
    render_template,
)
from .resilience import FallbackRoute, HealthMonitor, RetryPolicy, route_with_fallback, with_retry
from .store import StateStore
from .tools import (
    TOOL_ROUND_LIMIT,
    ToolContext,
    ToolRegistry,
    format_tool_result,
    parse_tool_call,
)
from .workflow import FINISH_TOKEN, NodeDef, Workflow

CONTEXT_WINDOW_MESSAGES = 32

CORRECTIVE_PROMPT = "Respond with exactly one of: {team_members} or FINISH"


@dataclass(frozen=True)
class RouteDecision:
    """What the supervisor chose: a worker to act next, or FINISH."""

    kind: str  # "worker" | "finish"
    worker: str | None
    raw: str

    @staticmethod
    def finish(raw: str) -> RouteDecision:
        return RouteDecision(kind="finish", worker=None, raw=raw)

    @staticmethod
    def next_worker(name: str, raw: str) -> RouteDecision:
        return RouteDecision(kind="worker", worker=name, raw=raw)


def parse_route_decision(raw: str, team_members: list[str]) -> RouteDecision:
    """Map a supervisor reply onto the routing protocol.

    Exact matching is case-insensitive after stripping whitespace and quote
    characters.  As a salvage, a reply mentioning exactly one routing token
    (one worker name, or FINISH) resolves to that token; anything else is a
    parse error the caller may correct once.
    """
    cleaned = raw.strip().strip("\"'`").strip()
    if cleaned.casefold() == FINISH_TOKEN.casefold():
        return RouteDecision.finish(raw)
    for name in team_members:
        if cleaned.casefold() == name.casefold():
            return RouteDecision.next_worker(name, raw)
    folded = raw.casefold()
    mentioned = [name for name in team_members if name.casefold() in folded]
    finish_mentioned = FINISH_TOKEN.casefold() in folded
    if len(mentioned) == 1 and not finish_mentioned:
        return RouteDecision.next_worker(mentioned[0], raw)
    if not mentioned and finish_mentioned:
        return RouteDecision.finish(raw)
    raise RouteParseError(raw)


@dataclass
class TurnEvent:
    type: str  # message|decision|tool_call|backend_call|alert|degraded|done|error
    data: dict
    seq: int = 0


@dataclass
class TurnResult:
    turn_id: str
    final_message: ChatMessage | None
    events: list[TurnEvent]
    degraded: bool = False


@dataclass
class EngineOptions:
    retry_policy: RetryPolicy = field(default_factory=RetryPolicy)
    transcribe_binding: str | None = None
    # per-binding failover routes; bindings not listed fail after retries
    fallbacks: dict[str, FallbackRoute] = field(default_factory=dict)
    sleep: Callable[[float], None] = lambda _: None


class SupervisorEngine:
    """Runs turns of one workflow against a backend hub and shared state."""

    def __init__(
        self,
        workflow: Workflow,
        hub: BackendHub,
        store: StateStore,
        blobs: BlobStore,
        tools: ToolRegistry,
        monitor: HealthMonitor | None = None,
        options: EngineOptions | None = None,
        runtime: object | None = None,
    ):
        self.workflow = workflow
        self.hub = hub
        self.store = store
        self.blobs = blobs
        self.tools = tools
        self.monitor = monitor or HealthMonitor()
        self.options = options or EngineOptions()
        self.runtime = runtime

    # -- public entry -------------------------------------------------------

    def run_turn(
        self,
        session: Session,
        payloads: list[ModalPayload],
        on_event: Callable[[TurnEvent], None] | None = None,
    ) -> TurnResult:
        turn_no = sum(1 for m in session.messages if m.author == Author.USER) + 1
        turn_id = f"{session.id}-t{turn_no}"
        events: list[TurnEvent] = []

        def emit(type_: str, **data) -> None:
            ev = TurnEvent(type=type_, data=data, seq=len(events) + 1)
            events.append(ev)
            if on_event is not None:
                on_event(ev)

        try:
            final, degraded = self._run(session, payloads, turn_id, emit)
        except MaestroError as err:
            emit("error", error=type(err).__name__, detail=str(err))
            return TurnResult(turn_id=turn_id, final_message=None, events=events, degraded=False)
        degraded = degraded or any(ev.type == "degraded" for ev in events)
        emit(
            "done",
            message_id=final.id if final else "",
            degraded=degraded,
            turn_id=turn_id,
        )
        return TurnResult(turn_id=turn_id, final_message=final, events=events, degraded=degraded)

    # -- turn body ------------------------------------------------------------

    def _run(self, session, payloads, turn_id, emit):
        wf = self.workflow
        team = wf.team_members()
        incoming, user_meta = self._preprocess(payloads, emit)
        self._append(session, Author.USER, incoming, emit, meta=user_meta)
        vision_cache: dict[str, str] = {}

        executions = 0
        last_worker_msg: ChatMessage | None = None
        while True:
            decision = self._decide(session, team, emit)
            if decision.kind == "finish":
                break
            if executions >= wf.max_hops:
                limit = HopLimitExceeded(wf.max_hops)
                emit("degraded", reason=f"hop budget of {wf.max_hops} exhausted",
                     error=type(limit).__name__)
                final = self._finalize(session, turn_id, last_worker_msg, degraded=True, emit=emit)
                return final, True
            node = wf.node(decision.worker)
            last_worker_msg = self._execute_worker(
                session, node, turn_id, executions + 1, vision_cache, emit
            )
            executions += 1
        final = self._finalize(session, turn_id, last_worker_msg, degraded=False, emit=emit)
        return final, False

    def _finalize(self, session, turn_id, last_worker_msg, degraded, emit):
        if last_worker_msg is None:
            final = self._append(
                session, Author.SUPERVISOR, [ModalPayload.from_text("")], emit,
                meta=(("degraded", "true"),) if degraded else (),
            )
        elif degraded:
            final = self._append(
                session,
                last_worker_msg.author,
                list(last_worker_msg.payloads),
                emit,
                meta=last_worker_msg.meta + (("degraded", "true"),),
            )
        else:
            final = last_worker_msg
        self.store.put(
            f"session/{session.id}", f"turn/{turn_id}/final", final.text(), author="engine"
        )
        return final

    # -- pre-processing --------------------------------------------------------

    def _preprocess(self, payloads, emit):
        """Audio payloads become text; the source blob digest rides in meta.

        Metadata never reaches a backend, so a transcribed turn and a typed
        turn with the same words produce identical downstream requests.
        """
        out = []
        meta: tuple[tuple[str, str], ...] = ()
        for p in payloads:
            if p.kind is not PayloadKind.AUDIO:
                out.append(p)
                continue
            binding = self.options.transcribe_binding
            if binding is None:
                raise NoTranscriptionBackend("no transcription binding configured")
            req = BackendRequest(
                kind=BackendKind.TRANSCRIPTION,
                model=self._model_for(binding, None),
                messages=(("user", (p,)),),
            )
            resp = self._invoke(binding, req, emit)
            out.append(ModalPayload.from_text(resp.text or ""))
            meta = meta + (("transcribed_from", p.blob.digest),)  # type: ignore[union-attr]
        return out, meta

    # -- supervisor ---------------------------------------------------------------

    def _decide(self, session, team, emit) -> RouteDecision:
        node = self.workflow.supervisor()
        system = self._render_system(node, team)
        view = self._conversation_view(session, with_blobs=False)
        req = BackendRequest(
            kind=BackendKind.CHAT_COMPLETION,
            model=self._model_for(node.backend, node),
            system=system,
            messages=view,
        )
        raw = (self._invoke(node.backend, req, emit).text or "").strip()
        try:
            decision = parse_route_decision(raw, team)
        except RouteParseError:
            corrective = CORRECTIVE_PROMPT.format(team_members=", ".join(team))
            retry_req = BackendRequest(
                kind=BackendKind.CHAT_COMPLETION,
                model=req.model,
                system=system,
                messages=view
                + (
                    ("assistant", (ModalPayload.from_text(raw),)),
                    ("user", (ModalPayload.from_text(corrective),)),
                ),
            )
            raw2 = (self._invoke(node.backend, retry_req, emit).text or "").strip()
            decision = parse_route_decision(raw2, team)  # second failure propagates
            emit("decision", decision=decision.kind, worker=decision.worker,
                 raw=raw2, corrected=True)
            return decision
        emit("decision", decision=decision.kind, worker=decision.worker, raw=raw)
        return decision

    # -- workers ---------------------------------------------------------------------

    def _execute_worker(self, session, node: NodeDef, turn_id, ordinal, vision_cache, emit):
        task = str(node.config_get("task", "chat"))
        if task == "generate_image":
            payloads, meta = self._generate(node, session, BackendKind.IMAGE_GENERATION, emit)
        elif task == "generate_video":
            payloads, meta = self._generate(node, session, BackendKind.VIDEO_GENERATION, emit)
        else:
            payloads, meta = self._chat_worker(session, node, turn_id, vision_cache, emit)
        msg = self._append(session, Author.worker(node.name), payloads, emit, meta=meta)
        self.store.put(
            f"session/{session.id}",
            f"turn/{turn_id}/worker/{node.name}/{ordinal}",
            msg.text(),
            author=msg.author,
        )
        return msg

    def _chat_worker(self, session, node: NodeDef, turn_id, vision_cache, emit):
        system = self._render_system(node, self.workflow.team_members())
        view = list(self._worker_view(session, node, vision_cache, emit))
        meta: tuple[tuple[str, str], ...] = ()
        for _ in range(TOOL_ROUND_LIMIT + 1):
            req = BackendRequest(
                kind=BackendKind.CHAT_COMPLETION,
                model=self._model_for(node.backend, node),
                system=system,
                messages=tuple(view),
            )
            reply = (self._invoke(node.backend, req, emit).text or "").strip()
            call = parse_tool_call(reply)
            if call is None:
                return [ModalPayload.from_text(reply)], meta
            name, args = call
            ctx = ToolContext(
                node=node, session_id=session.id, turn_id=turn_id, runtime=self.runtime
            )
            result = self.tools.invoke(name, args, ctx)
            source = result.get("source")
            emit("tool_call", worker=node.name, tool=name, args=args,
                 source=source or "none")
            if source and source != "none":
                meta = (("source", source),)
            view.append(("assistant", (ModalPayload.from_text(reply),)))
            view.append(("user", (ModalPayload.from_text(format_tool_result(result)),)))
        raise ToolFailure(node.name, f"tool round limit of {TOOL_ROUND_LIMIT} exceeded")

    def _generate(self, node: NodeDef, session, kind: BackendKind, emit):
        query = self._latest_user_text(session)
        suffix = str(node.config_get("query_suffix", ""))
        prompt = f"{query}\n{suffix}" if suffix else query
        # an uploaded image rides along so image-to-video requests carry it
        images = tuple(
            p for p in self._latest_user_payloads(session)
            if p.kind is PayloadKind.IMAGE
        )
        req = BackendRequest(
            kind=kind,
            model=self._model_for(node.backend, node),
            messages=(("user", (ModalPayload.from_text(prompt), *images)),),
            params=tuple(
                (k, str(v)) for k, v in node.config
                if k not in ("task", "model", "query_suffix", "company")
            ),
        )
        resp = self._invoke(node.backend, req, emit)
        if resp.data is None:
            raise ToolFailure(node.name, "generation backend returned no media")
        digest = self.blobs.put(resp.data, resp.media_type or "application/octet-stream")
        payload_kind = (
            PayloadKind.IMAGE if kind is BackendKind.IMAGE_GENERATION else PayloadKind.VIDEO
        )
        blob = BlobRef(digest=digest, media_type=resp.media_type or "", size=len(resp.data))
        caption = f"Generated {payload_kind.value} for: {query}"
        return (
            [ModalPayload.from_text(caption), ModalPayload.from_blob(payload_kind, blob)],
            (("source", "generation"),),
        )

    # -- conversation rendering ---------------------------------------------------

    def _conversation_view(self, session, with_blobs: bool):
        """Newest messages as backend (role, payloads) pairs.

        Worker replies are labeled with the worker's name so the supervisor
        can attribute results.  Without ``with_blobs``, media payloads render
        as short text markers; message metadata never reaches a backend.
        """
        msgs = session.messages[-CONTEXT_WINDOW_MESSAGES:]
        view = []
        for m in msgs:
            role = "user" if m.author == Author.USER else "assistant"
            label = f"{Author.name_of(m.author)}: " if Author.is_worker(m.author) else ""
            rendered = []
            for i, p in enumerate(m.payloads):
                if p.kind is PayloadKind.TEXT:
                    text = p.text or ""
                    if label and i == 0:
                        text = label + text
                    rendered.append(ModalPayload.from_text(text))
                elif with_blobs:
                    rendered.append(p)
                else:
                    assert p.blob is not None
                    marker = f"[{p.kind.value}:{p.blob.digest[:12]}]"
                    rendered.append(ModalPayload.from_text(marker))
            if label and not any(p.kind is PayloadKind.TEXT for p in m.payloads):
                rendered.insert(0, ModalPayload.from_text(label.rstrip()))
            view.append((role, tuple(rendered)))
        return tuple(view)

    def _worker_view(self, session, node: NodeDef, vision_cache, emit):
        """Worker-facing view; images are analyzed once then shown as text.

        The analysis pass calls a vision backend keyed on the image blob; its
        text replaces the image for this and every later worker in the turn.
        """
        view = []
        shared = self.workflow.shared_memory
        for role, payloads in self._conversation_view(session, with_blobs=True):
            if not shared and role != "user":
                continue
            rendered = []
            for p in payloads:
                if p.kind is PayloadKind.IMAGE and p.blob is not None:
                    analysis = vision_cache.get(p.blob.digest)
                    if analysis is None:
                        analysis = self._analyze_image(node, p, emit)
                        vision_cache[p.blob.digest] = analysis
                    rendered.append(ModalPayload.from_text(f"[image] {analysis}"))
                elif p.kind is not PayloadKind.TEXT:
                    assert p.blob is not None
                    rendered.append(
                        ModalPayload.from_text(f"[{p.kind.value}:{p.blob.digest[:12]}]")
                    )
                else:
                    rendered.append(p)
            view.append((role, tuple(rendered)))
        return tuple(view)

    def _analyze_image(self, node: NodeDef, payload: ModalPayload, emit) -> str:
        req = BackendRequest(
            kind=BackendKind.VISION_COMPLETION,
            model=self._model_for(node.backend, node),
            system="Describe the image content exactly, including any code or text.",
            messages=(("user", (payload,)),),
        )
        return self._invoke(node.backend, req, emit).text or ""

    # -- plumbing ----------------------------------------------------------------

    def _append(self, session, author, payloads, emit, meta=()):
        msg = ChatMessage(
            id=f"{session.id}-m{session.last_seq + 1}",
            session_id=session.id,
            author=author,
            payloads=tuple(payloads),
            meta=tuple(meta),
        )
        stored = append_message(session, msg)
        emit(
            "message",
            message_id=stored.id,
            author=stored.author,
            seq=stored.seq,
            text=stored.text(),
            media=[
                {"kind": p.kind.value, "digest": p.blob.digest, "media_type": p.blob.media_type}
                for p in stored.payloads
                if p.blob is not None
            ],
            meta=dict(stored.meta),
        )
        return stored

    def _render_system(self, node: NodeDef, team) -> str:
        tpl = PromptTemplate(node.system)
        bindings = {}
        if "team_members" in tpl.declared_vars:
            bindings["team_members"] = ", ".join(team)
        for key, value in node.config:
            if key in tpl.declared_vars:
                bindings[key] = str(value)
        return render_template(tpl, bindings)

    def _model_for(self, binding: str, node: NodeDef | None) -> str:
        if node is not None:
            configured = node.config_get("model")
            if configured:
                return str(configured)
        return self.hub.model_of(binding)

    def _latest_user_text(self, session) -> str:
        for m in reversed(session.messages):
            if m.author == Author.USER:
                return m.text()
        return ""

    def _latest_user_payloads(self, session) -> tuple:
        for m in reversed(session.messages):
            if m.author == Author.USER:
                return m.payloads
        return ()

    def _invoke(self, binding: str, req: BackendRequest, emit) -> BackendResponse:
        emit(
            "backend_call",
            binding=binding,
            kind=req.kind.value,
            model=req.model,
            key=canonical_key(req),
        )
        route = self.options.fallbacks.get(binding)
        try:
            if route is not None:
                outcome = route_with_fallback(
                    route, lambda b: self.hub.invoke(b, req), sleep=self.options.sleep
                )
                if outcome.degraded:
                    emit("degraded", reason=f"binding {binding} degraded",
                         text=outcome.degradation_text)
                    return BackendResponse(text=outcome.degradation_text)
                return outcome.value  # type: ignore[return-value]
            return with_retry(
                self.options.retry_policy,
                lambda: self.hub.invoke(binding, req),
                sleep=self.options.sleep,
            )
        except Exception:
            alert = self.monitor.record_failure(binding)
            if alert is not None:
                emit("alert", binding=binding, count=alert.count)
            raise
