"""Scripted conversations with machine-checkable expectations.

A scenario file describes one session: each turn's input payloads and a
set of expectations over the turn's result (which workers ran, which
tools fired, what the final answer must contain).  The runner replays
the turns on a runtime and reports one pass/fail check per expectation,
so a scenario doubles as an executable regression spec for a workflow.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from .model import Author, BlobRef, ModalPayload, PayloadKind
from .runtime import Runtime

BUNDLED_SCENARIOS = ("s1_code", "s2_rag", "s3_image", "s4_video")

_SUFFIX_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".wav": "audio/wav",
    ".mp3": "audio/mpeg",
    ".mp4": "video/mp4",
}


class ScenarioParseError(ValueError):
    pass


@dataclass(frozen=True)
class TurnSpec:
    """One user turn: optional text plus optional media, with expectations."""

    text: str | None
    image: bytes | None
    image_media_type: str = ""
    audio: bytes | None = None
    audio_media_type: str = ""
    expect: dict = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Scenario:
    id: str
    workflow: str
    turns: tuple[TurnSpec, ...]
    # replay the whole session on a second fresh runtime and require
    # byte-identical final answers
    rerun_identical: bool = False


@dataclass(frozen=True)
class Check:
    scenario: str
    turn: int  # 1-based; 0 marks a scenario-level check
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = f"turn {self.turn} " if self.turn else ""
        tail = f": {self.detail}" if self.detail and not self.passed else ""
        return f"{status} {self.scenario} {where}{self.name}{tail}"


def _media_type_for(name: str) -> str:
    suffix = Path(name).suffix.lower()
    try:
        return _SUFFIX_MEDIA_TYPES[suffix]
    except KeyError:
        raise ScenarioParseError(f"no media type known for {name!r}") from None


def _parse(text: str, media_root) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioParseError(str(err)) from err
    try:
        turns = []
        for t in raw["turns"]:
            inp = t["input"]
            image = audio = None
            image_mt = audio_mt = ""
            if "image" in inp:
                image = (media_root / inp["image"]).read_bytes()
                image_mt = _media_type_for(inp["image"])
            if "audio" in inp:
                audio = (media_root / inp["audio"]).read_bytes()
                audio_mt = _media_type_for(inp["audio"])
            turns.append(
                TurnSpec(
                    text=inp.get("text"),
                    image=image,
                    image_media_type=image_mt,
                    audio=audio,
                    audio_media_type=audio_mt,
                    expect=dict(t.get("expect", {})),
                )
            )
        return Scenario(
            id=raw["id"],
            workflow=raw["workflow"],
            turns=tuple(turns),
            rerun_identical=bool(raw.get("rerun_identical", False)),
        )
    except (KeyError, TypeError, OSError) as err:
        raise ScenarioParseError(f"bad scenario: {err!r}") from err


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    return _parse(p.read_text(encoding="utf-8"), p.parent)


def load_bundled(scenario_id: str) -> Scenario:
    if scenario_id not in BUNDLED_SCENARIOS:
        raise KeyError(f"no bundled scenario named {scenario_id!r}")
    root = resources.files("maestro.data.scenarios")
    return _parse((root / f"{scenario_id}.json").read_text(encoding="utf-8"), root)


# --- running ----------------------------------------------------------------


def _payloads_for(rt: Runtime, spec: TurnSpec) -> list[ModalPayload]:
    out = []
    if spec.text is not None:
        out.append(ModalPayload.from_text(spec.text))
    for data, media_type, kind in (
        (spec.image, spec.image_media_type, PayloadKind.IMAGE),
        (spec.audio, spec.audio_media_type, PayloadKind.AUDIO),
    ):
        if data is None:
            continue
        digest = rt.blobs.put(data, media_type)
        ref = BlobRef(digest=digest, media_type=media_type, size=len(data))
        out.append(ModalPayload.from_blob(kind, ref))
    return out


def _fingerprint(result) -> tuple:
    """What "the same answer" means across runs: text plus media digests."""
    msg = result.final_message
    if msg is None:
        return ("<error>",)
    media = tuple(
        (p.kind.value, p.blob.digest) for p in msg.payloads if p.blob is not None
    )
    return (msg.text(), media)


def _check_turn(scenario_id, turn_no, result, elapsed, expect, fingerprints):
    checks = []

    def add(name: str, passed: bool, detail: str = "") -> None:
        checks.append(Check(scenario_id, turn_no, name, bool(passed), detail))

    final = result.final_message
    text = final.text() if final is not None else ""
    meta = dict(final.meta) if final is not None else {}

    if final is None:
        errors = [e.data for e in result.events if e.type == "error"]
        add("completed", False, f"turn errored: {errors}")
    else:
        add("completed", True)

    if "worker_order" in expect:
        got = [
            Author.name_of(e.data["author"])
            for e in result.events
            if e.type == "message" and Author.is_worker(e.data["author"])
        ]
        add("worker_order", got == expect["worker_order"], f"got {got!r}")
    if "tool_calls" in expect:
        got = [e.data["tool"] for e in result.events if e.type == "tool_call"]
        add("tool_calls", got == expect["tool_calls"], f"got {got!r}")
    for i, needle in enumerate(expect.get("final_contains", [])):
        add(
            f"final_contains[{i}]",
            needle in text,
            f"missing {needle[:60]!r}",
        )
    if "final_source" in expect:
        add(
            "final_source",
            meta.get("source") == expect["final_source"],
            f"got {meta.get('source')!r}",
        )
    if "final_media_type" in expect:
        media = [p for p in (final.payloads if final else ()) if p.blob is not None]
        ok = len(media) == 1 and media[0].blob.media_type == expect["final_media_type"]
        add(
            "final_media_type",
            ok,
            f"got {[p.blob.media_type for p in media]!r}",
        )
    if "transcribed" in expect:
        user_meta = next(
            (
                e.data.get("meta", {})
                for e in result.events
                if e.type == "message" and e.data.get("author") == Author.USER
            ),
            {},
        )
        add(
            "transcribed",
            ("transcribed_from" in user_meta) == bool(expect["transcribed"]),
            f"user meta {user_meta!r}",
        )
    if "degraded" in expect:
        add("degraded", result.degraded == expect["degraded"], f"got {result.degraded}")
    if "final_matches_turn" in expect:
        ref = expect["final_matches_turn"]
        same = fingerprints[ref - 1] == fingerprints[-1]
        add("final_matches_turn", same, f"differs from turn {ref}")
    if "max_seconds" in expect:
        add(
            "max_seconds",
            elapsed <= float(expect["max_seconds"]),
            f"took {elapsed:.3f}s",
        )
    return checks


def _run_once(scenario: Scenario, rt: Runtime):
    session = rt.create_session(scenario.workflow)
    checks: list[Check] = []
    fingerprints: list[tuple] = []
    for i, spec in enumerate(scenario.turns, start=1):
        started = time.perf_counter()
        result = rt.run_turn(session.id, _payloads_for(rt, spec))
        elapsed = time.perf_counter() - started
        fingerprints.append(_fingerprint(result))
        checks.extend(_check_turn(scenario.id, i, result, elapsed, spec.expect, fingerprints))
    return checks, fingerprints


def run_scenario(
    scenario: Scenario,
    runtime_factory: Callable[[], Runtime] = Runtime.bundled,
) -> list[Check]:
    """All checks for one scenario; a fresh runtime per run keeps runs isolated."""
    checks, fingerprints = _run_once(scenario, runtime_factory())
    if scenario.rerun_identical:
        _, second = _run_once(scenario, runtime_factory())
        checks.append(
            Check(
                scenario.id,
                0,
                "rerun_identical",
                fingerprints == second,
                "final answers differ between fresh runs",
            )
        )
    return checks


def format_checks(checks: list[Check]) -> str:
    return "\n".join(c.line() for c in checks)
