"""Worker-side tools and the wire protocol workers use to call them.

A worker backend requests a tool by starting its reply with a single line:

    TOOL <name> <json-args>

The engine executes the tool and feeds the result back as a user-role line:

    TOOL_RESULT <json>

then re-invokes the backend, up to TOOL_ROUND_LIMIT rounds per worker turn.
Tool handlers return JSON-serializable dicts; a "source" field ("rag",
"web", "subflow") tags where an answer came from and flows into message
metadata and the turn trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol

from .errors import ToolFailure
from .rag import DEFAULT_TAU, DEFAULT_TOP_K, Embedder, VectorIndex, retrieve
from .workflow import NodeDef

TOOL_ROUND_LIMIT = 4
TOOL_PREFIX = "TOOL "
TOOL_RESULT_PREFIX = "TOOL_RESULT "


@dataclass
class ToolContext:
    """What a tool handler may touch: node config plus runtime services."""

    node: NodeDef
    session_id: str
    turn_id: str
    runtime: object  # duck-typed: .index, .embedder, .web_results, .run_subflow


class ToolHandler(Protocol):
    def invoke(self, args: dict, ctx: ToolContext) -> dict: ...


class ToolRegistry:
    def __init__(self):
        self._handlers: dict[str, ToolHandler] = {}

    def register(self, name: str, handler: ToolHandler) -> None:
        self._handlers[name] = handler

    def names(self) -> set[str]:
        return set(self._handlers)

    def invoke(self, name: str, args: dict, ctx: ToolContext) -> dict:
        if name not in self._handlers:
            raise ToolFailure(name, "tool is not registered")
        if name not in ctx.node.tools:
            raise ToolFailure(name, f"tool not granted to node {ctx.node.name!r}")
        try:
            return self._handlers[name].invoke(args, ctx)
        except ToolFailure:
            raise
        except Exception as err:  # noqa: BLE001 - tool faults become protocol errors
            raise ToolFailure(name, f"{type(err).__name__}: {err}") from err


def parse_tool_call(text: str) -> tuple[str, dict] | None:
    """The (name, args) of a TOOL request, or None for a plain reply."""
    first = next((line for line in text.splitlines() if line.strip()), "")
    if not first.startswith(TOOL_PREFIX):
        return None
    rest = first[len(TOOL_PREFIX):].strip()
    name, _, raw_args = rest.partition(" ")
    if not name:
        raise ToolFailure("", "TOOL line carries no tool name")
    try:
        args = json.loads(raw_args) if raw_args.strip() else {}
    except json.JSONDecodeError as err:
        raise ToolFailure(name, f"malformed args JSON: {err}") from err
    if not isinstance(args, dict):
        raise ToolFailure(name, "args must be a JSON object")
    return name, args


def format_tool_result(result: dict) -> str:
    return TOOL_RESULT_PREFIX + json.dumps(result, sort_keys=True, ensure_ascii=False)


# --- built-in handlers ---------------------------------------------------------


class RagSearchTool:
    """Gated retrieval: top-k search, rerank, relevance verdict.

    The relevance threshold and k come from the node's config so each
    workflow tunes its own gate.
    """

    def __init__(self, index: VectorIndex, embedder: Embedder):
        self.index = index
        self.embedder = embedder

    def invoke(self, args: dict, ctx: ToolContext) -> dict:
        query = str(args.get("query", "")).strip()
        if not query:
            raise ToolFailure("rag_search", "query must be non-empty")
        tau = float(ctx.node.config_get("tau", DEFAULT_TAU))
        k = int(ctx.node.config_get("k", DEFAULT_TOP_K))
        if len(self.index) == 0:
            return {"hits": [], "top_score": -1.0, "relevant": False, "source": "none"}
        hits = retrieve(query, self.index, self.embedder, k=k, tau=tau)
        top = hits[0].score if hits else -1.0
        relevant = bool(hits) and top >= tau
        return {
            "hits": [
                {
                    "text": h.chunk.text,
                    "score": round(h.score, 6),
                    "doc_id": h.chunk.doc_id,
                    "chunk_index": h.chunk.chunk_index,
                }
                for h in hits
            ],
            "top_score": round(top, 6),
            "relevant": relevant,
            "source": "rag" if relevant else "none",
        }


class WebSearchTool:
    """Canned web search: exact casefolded-query lookup with a default row.

    Hermetic stand-in for a search API; results come from a bundled table.
    """

    def __init__(self, results: dict[str, dict]):
        self.results = {k.casefold(): v for k, v in results.items()}
        self.invocations = 0

    def invoke(self, args: dict, ctx: ToolContext) -> dict:
        query = str(args.get("query", "")).strip()
        if not query:
            raise ToolFailure("web_search", "query must be non-empty")
        self.invocations += 1
        row = self.results.get(query.casefold()) or self.results.get("__default")
        if row is None:
            raise ToolFailure("web_search", f"no canned result for {query!r}")
        return {
            "text": row.get("text", ""),
            "citation": row.get("citation", "web-search"),
            "source": "web",
        }


class SubflowTool:
    """Run a nested workflow as a tool, on an isolated session and memory."""

    def __init__(self, workflow_id: str):
        self.workflow_id = workflow_id

    def invoke(self, args: dict, ctx: ToolContext) -> dict:
        query = str(args.get("query", "")).strip()
        if not query:
            raise ToolFailure(f"subflow:{self.workflow_id}", "query must be non-empty")
        text = ctx.runtime.run_subflow(self.workflow_id, query)  # type: ignore[attr-defined]
        return {"text": text, "source": "subflow"}
