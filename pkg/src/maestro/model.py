"""Core domain vocabulary: payloads, messages, sessions, profiles, templates.

These are immutable value types shared by every other module.  Sessions are
the one mutable structure and are only ever appended to, under a
single-writer-per-session discipline enforced by the runtime.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum

from .errors import MissingVariable, SessionClosed, UnknownVariable

PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class PayloadKind(str, Enum):
    TEXT = "text"
    IMAGE = "image"
    AUDIO = "audio"
    VIDEO = "video"


@dataclass(frozen=True)
class BlobRef:
    """Reference to content-addressed bytes."""

    digest: str  # lowercase hex sha-256 of the bytes
    media_type: str
    size: int


@dataclass(frozen=True)
class ModalPayload:
    """One typed unit of content flowing through the system.

    Text payloads carry inline text and no blob; every other kind carries
    exactly one blob reference and no inline text.
    """

    kind: PayloadKind
    text: str | None = None
    blob: BlobRef | None = None
    media_type: str = "text/plain"

    def __post_init__(self):
        if self.kind is PayloadKind.TEXT:
            if self.text is None or self.blob is not None:
                raise ValueError("text payloads carry inline text and no blob")
        else:
            if self.blob is None or self.text is not None:
                raise ValueError(f"{self.kind.value} payloads carry exactly one blob reference")

    @staticmethod
    def from_text(text: str) -> ModalPayload:
        return ModalPayload(kind=PayloadKind.TEXT, text=text)

    @staticmethod
    def from_blob(kind: PayloadKind, blob: BlobRef) -> ModalPayload:
        return ModalPayload(kind=kind, blob=blob, media_type=blob.media_type)


class Author:
    """Message author tag: user, supervisor, system, or a named worker/tool."""

    USER = "user"
    SUPERVISOR = "supervisor"
    SYSTEM = "system"

    @staticmethod
    def worker(name: str) -> str:
        if not name:
            raise ValueError("worker author name must be non-empty")
        return f"worker:{name}"

    @staticmethod
    def tool(name: str) -> str:
        if not name:
            raise ValueError("tool author name must be non-empty")
        return f"tool:{name}"

    @staticmethod
    def is_worker(author: str) -> bool:
        return author.startswith("worker:")

    @staticmethod
    def name_of(author: str) -> str:
        """The worker/tool name, or the tag itself for built-in authors."""
        _, _, name = author.partition(":")
        return name or author


@dataclass(frozen=True)
class ChatMessage:
    id: str
    session_id: str
    author: str
    payloads: tuple[ModalPayload, ...]
    seq: int = 0
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    # Non-content annotations (original-audio attachment refs, answer source).
    # Excluded from backend request canonicalization on purpose.
    meta: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.author.startswith(("worker:", "tool:")) and not self.author.partition(":")[2]:
            raise ValueError("worker/tool author names must be non-empty")

    def text(self) -> str:
        """Concatenated inline text of all text payloads."""
        return "\n".join(p.text for p in self.payloads if p.kind is PayloadKind.TEXT and p.text)

    def meta_get(self, key: str) -> str | None:
        for k, v in self.meta:
            if k == key:
                return v
        return None


class SessionStatus(str, Enum):
    OPEN = "open"
    CLOSED = "closed"
    FAILED = "failed"


@dataclass
class Session:
    id: str
    workflow_id: str
    messages: list[ChatMessage] = field(default_factory=list)
    status: SessionStatus = SessionStatus.OPEN

    @property
    def last_seq(self) -> int:
        return self.messages[-1].seq if self.messages else 0


def append_message(session: Session, msg: ChatMessage) -> ChatMessage:
    """Append ``msg`` with the next seq; returns the message as stored.

    The messages list is append-only; prior entries are never touched.
    """
    if session.status is not SessionStatus.OPEN:
        raise SessionClosed(session.id)
    stamped = replace(msg, session_id=session.id, seq=session.last_seq + 1)
    session.messages.append(stamped)
    return stamped


class AgentKind(str, Enum):
    SUPERVISOR = "supervisor"
    WORKER = "worker"


@dataclass(frozen=True)
class PromptTemplate:
    """UTF-8 text with zero or more {name} placeholders.

    declared_vars always equals the set of placeholders syntactically present
    in the text; it is derived, never supplied.
    """

    text: str
    declared_vars: frozenset[str] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "declared_vars", frozenset(PLACEHOLDER_RE.findall(self.text)))


@dataclass(frozen=True)
class AgentProfile:
    name: str
    kind: AgentKind
    system_template: PromptTemplate
    tools: tuple[str, ...] = ()
    backend: str = ""

    def __post_init__(self):
        if self.kind is AgentKind.SUPERVISOR and self.tools:
            raise ValueError("supervisor profiles carry no tools; tools belong to workers")


def render_template(tpl: PromptTemplate, bindings: dict[str, str], strict: bool = True) -> str:
    """Substitute every {name} placeholder with its binding.

    Substitution is single-pass: substituted text is never re-expanded, so a
    binding value containing ``{other}`` survives verbatim.  In strict mode
    (the default) bindings that name no declared placeholder are errors,
    surfacing workflow misconfiguration early.
    """
    for name in tpl.declared_vars:
        if name not in bindings:
            raise MissingVariable(name)
    if strict:
        for name in bindings:
            if name not in tpl.declared_vars:
                raise UnknownVariable(name)
    return PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], tpl.text)
