"""Workflow documents: parse, validate, serialize.

A workflow is a JSON document naming one supervisor and its worker team,
plus the visual edges between them.  Parsing rejects only what cannot be
represented (bad JSON, missing fields, non-scalar config values); every
structural rule beyond that surfaces as a Diagnostic with a stable W-code
so tooling can pattern-match on codes, not message text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from .errors import MissingField, WorkflowSyntaxError
from .model import PLACEHOLDER_RE

DEFAULT_MAX_HOPS = 8

SCALAR = (str, int, float, bool, type(None))

# The routing protocol's reserved completion token; no worker may claim it.
FINISH_TOKEN = "FINISH"


@dataclass(frozen=True)
class NodeDef:
    name: str
    kind: str  # "supervisor" | "worker"
    system: str
    tools: tuple[str, ...] = ()
    backend: str = ""
    config: tuple[tuple[str, object], ...] = ()

    def config_get(self, key: str, default=None):
        for k, v in self.config:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class Workflow:
    id: str
    name: str
    entry: str
    nodes: tuple[NodeDef, ...]
    edges: tuple[tuple[str, str], ...] = ()
    max_hops: int = DEFAULT_MAX_HOPS
    shared_memory: bool = True
    # stream intermediate decision/tool/backend frames to clients
    expose_trace: bool = True

    def node(self, name: str) -> NodeDef:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(f"no node named {name!r}")

    def supervisor(self) -> NodeDef:
        return next(n for n in self.nodes if n.kind == "supervisor")

    def workers(self) -> list[NodeDef]:
        return [n for n in self.nodes if n.kind == "worker"]

    def team_members(self) -> list[str]:
        """Worker names in declaration order; feeds the supervisor roster."""
        return [n.name for n in self.workers()]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: str  # "error" | "warning"
    msg: str
    node: str | None = None

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def to_json(self) -> str:
        doc = {"code": self.code, "severity": self.severity, "msg": self.msg}
        if self.node is not None:
            doc["node"] = self.node
        return json.dumps(doc, ensure_ascii=False)


def parse_workflow(text: str) -> Workflow:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise WorkflowSyntaxError(err.lineno, err.colno, err.msg) from err
    if not isinstance(doc, dict):
        raise WorkflowSyntaxError(1, 1, "workflow document must be a JSON object")
    for f in ("id", "name", "entry", "nodes"):
        if f not in doc:
            raise MissingField(f)
    nodes = []
    for i, raw in enumerate(_expect_list(doc["nodes"], "nodes")):
        for f in ("name", "kind", "system"):
            if f not in raw:
                raise MissingField(f"nodes[{i}].{f}")
        config = raw.get("config", {})
        if not isinstance(config, dict):
            raise WorkflowSyntaxError(1, 1, f"nodes[{i}].config must be an object")
        for k, v in config.items():
            if not isinstance(v, SCALAR):
                raise WorkflowSyntaxError(
                    1, 1, f"nodes[{i}].config.{k} must be a JSON scalar"
                )
        nodes.append(
            NodeDef(
                name=raw["name"],
                kind=raw["kind"],
                system=raw["system"],
                tools=tuple(raw.get("tools", ())),
                backend=raw.get("backend", ""),
                config=tuple(sorted(config.items())),
            )
        )
    edges = []
    for i, raw in enumerate(_expect_list(doc.get("edges", []), "edges")):
        if not (isinstance(raw, list) and len(raw) == 2):
            raise WorkflowSyntaxError(1, 1, f"edges[{i}] must be a [from, to] pair")
        edges.append((raw[0], raw[1]))
    return Workflow(
        id=doc["id"],
        name=doc["name"],
        entry=doc["entry"],
        nodes=tuple(nodes),
        edges=tuple(edges),
        max_hops=doc.get("max_hops", DEFAULT_MAX_HOPS),
        shared_memory=doc.get("shared_memory", True),
        expose_trace=doc.get("expose_trace", True),
    )


def _expect_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise WorkflowSyntaxError(1, 1, f"{path} must be an array")
    return value


def serialize_workflow(wf: Workflow) -> str:
    """Canonical JSON for a workflow; parse(serialize(wf)) == wf."""
    doc = {
        "id": wf.id,
        "name": wf.name,
        "entry": wf.entry,
        "max_hops": wf.max_hops,
        "shared_memory": wf.shared_memory,
        "expose_trace": wf.expose_trace,
        "nodes": [
            {
                "name": n.name,
                "kind": n.kind,
                "system": n.system,
                "tools": list(n.tools),
                "backend": n.backend,
                "config": dict(n.config),
            }
            for n in wf.nodes
        ],
        "edges": [list(e) for e in wf.edges],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def validate_workflow(wf: Workflow, known_tools: Iterable[str] = ()) -> list[Diagnostic]:
    """Structural checks; errors block execution, warnings do not."""
    known = set(known_tools)
    out: list[Diagnostic] = []
    names = [n.name for n in wf.nodes]
    name_set = set(names)

    supervisors = [n for n in wf.nodes if n.kind == "supervisor"]
    if not supervisors:
        out.append(Diagnostic("W001", "error", "workflow has no supervisor node"))
    elif len(supervisors) > 1:
        extra = ", ".join(n.name for n in supervisors)
        out.append(Diagnostic("W002", "error", f"multiple supervisor nodes: {extra}"))

    for n in wf.nodes:
        for tool in n.tools:
            if tool not in known:
                out.append(
                    Diagnostic("W003", "error", f"unresolved tool {tool!r}", node=n.name)
                )
    seen: set[str] = set()
    for name in names:
        if name in seen:
            out.append(Diagnostic("W004", "error", f"duplicate node name {name!r}", node=name))
        seen.add(name)
    for a, b in wf.edges:
        for endpoint in (a, b):
            if endpoint not in name_set:
                out.append(
                    Diagnostic("W005", "error", f"edge endpoint {endpoint!r} is not a node")
                )
    if wf.entry not in name_set:
        out.append(Diagnostic("W006", "error", f"entry {wf.entry!r} is not a node"))
    else:
        reachable = _reachable(wf.entry, wf.edges)
        for name in names:
            if name not in reachable:
                out.append(
                    Diagnostic(
                        "W007", "warning", f"node {name!r} unreachable from entry", node=name
                    )
                )
    if wf.max_hops < 1:
        out.append(Diagnostic("W008", "error", f"max_hops must be >= 1, got {wf.max_hops}"))
    for n in wf.nodes:
        if n.kind not in ("supervisor", "worker"):
            out.append(Diagnostic("W009", "error", f"unknown node kind {n.kind!r}", node=n.name))
    for n in supervisors:
        if "team_members" not in PLACEHOLDER_RE.findall(n.system) and not any(
            w in n.system for w in (wf.team_members() or [""])
        ):
            out.append(
                Diagnostic(
                    "W010",
                    "warning",
                    "supervisor prompt neither uses {team_members} nor names any worker",
                    node=n.name,
                )
            )
    for n in wf.workers():
        if n.name.strip().upper() == FINISH_TOKEN:
            out.append(
                Diagnostic(
                    "W011",
                    "error",
                    "worker name collides with the FINISH routing token",
                    node=n.name,
                )
            )
    return out


def _reachable(entry: str, edges: tuple[tuple[str, str], ...]) -> set[str]:
    seen = {entry}
    frontier = [entry]
    while frontier:
        cur = frontier.pop()
        for a, b in edges:
            if a == cur and b not in seen:
                seen.add(b)
                frontier.append(b)
    return seen
