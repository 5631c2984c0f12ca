"""Versioned key-value store with rollback, compare-and-set, and watches.

History per (namespace, key) is append-only and contiguous: versions run
1..n with no gaps, and rollback appends a copy of an older value rather than
truncating.  Conflict resolution is optimistic: compare_and_put either wins
or hands the caller the current version and value to retry with.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterator

from .errors import Conflict, NoSuchVersion, SubscriberLagged

WATCH_BUFFER = 1024


@dataclass(frozen=True)
class VersionedEntry:
    namespace: str
    key: str
    value: str
    version: int
    author: str
    created_at: datetime
    kind: str = "put"  # "put" | "rollback"


@dataclass
class Watch:
    """One subscriber's bounded notification queue.

    Delivery is exactly-once and in version order per key; a subscriber that
    falls more than WATCH_BUFFER events behind is failed with
    SubscriberLagged on its next read rather than silently skipping.
    """

    namespace: str
    key_prefix: str
    _events: deque = field(default_factory=deque)
    _dropped: int = 0
    _cond: threading.Condition = field(default_factory=threading.Condition)
    _closed: bool = False

    def _offer(self, entry: VersionedEntry) -> None:
        with self._cond:
            if self._closed:
                return
            if len(self._events) >= WATCH_BUFFER:
                self._events.popleft()
                self._dropped += 1
            self._events.append(entry)
            self._cond.notify_all()

    def get(self, timeout: float | None = 5.0) -> VersionedEntry | None:
        """Next notification, or None on timeout / after close."""
        with self._cond:
            if self._dropped:
                dropped, self._dropped = self._dropped, 0
                raise SubscriberLagged(dropped)
            while not self._events and not self._closed:
                if not self._cond.wait(timeout):
                    return None
            if self._dropped:
                dropped, self._dropped = self._dropped, 0
                raise SubscriberLagged(dropped)
            return self._events.popleft() if self._events else None

    def drain(self) -> list[VersionedEntry]:
        """All currently buffered notifications without blocking."""
        out = []
        with self._cond:
            if self._dropped:
                dropped, self._dropped = self._dropped, 0
                raise SubscriberLagged(dropped)
            while self._events:
                out.append(self._events.popleft())
        return out

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class StateStore:
    """In-process versioned store, safe under full concurrency.

    Writes serialize on a single lock (per-key atomic version counters fall
    out of that); reads of old versions are snapshot-stable because history
    entries are immutable once appended.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict[tuple[str, str], list[VersionedEntry]] = {}
        self._watches: list[Watch] = []

    # -- writes ---------------------------------------------------------

    def put(self, ns: str, key: str, value: str, author: str = "system") -> int:
        with self._lock:
            entry = self._append(ns, key, value, author, kind="put")
        self._notify(entry)
        return entry.version

    def compare_and_put(self, ns: str, key: str, expected_version: int, value: str, author: str = "system") -> int:
        """Write iff the current max version equals expected_version.

        Raises Conflict carrying the current version and value so the caller
        can rebase and retry.
        """
        with self._lock:
            history = self._data.get((ns, key), [])
            current = history[-1].version if history else 0
            if current != expected_version:
                raise Conflict(current, history[-1].value if history else None)
            entry = self._append(ns, key, value, author, kind="put")
        self._notify(entry)
        return entry.version

    def rollback(self, ns: str, key: str, to_version: int, author: str = "system") -> int:
        """Append a new version copying to_version's value; history is preserved."""
        with self._lock:
            history = self._data.get((ns, key), [])
            if to_version < 1 or to_version > len(history):
                raise NoSuchVersion(ns, key, to_version)
            value = history[to_version - 1].value
            entry = self._append(ns, key, value, author, kind="rollback")
        self._notify(entry)
        return entry.version

    def _append(self, ns: str, key: str, value: str, author: str, kind: str) -> VersionedEntry:
        history = self._data.setdefault((ns, key), [])
        entry = VersionedEntry(
            namespace=ns,
            key=key,
            value=value,
            version=len(history) + 1,
            author=author,
            created_at=datetime.now(timezone.utc),
            kind=kind,
        )
        history.append(entry)
        return entry

    # -- reads ----------------------------------------------------------

    def get(self, ns: str, key: str) -> str | None:
        with self._lock:
            history = self._data.get((ns, key))
            return history[-1].value if history else None

    def get_entry(self, ns: str, key: str) -> VersionedEntry | None:
        with self._lock:
            history = self._data.get((ns, key))
            return history[-1] if history else None

    def get_version(self, ns: str, key: str, version: int) -> VersionedEntry:
        with self._lock:
            history = self._data.get((ns, key), [])
            if version < 1 or version > len(history):
                raise NoSuchVersion(ns, key, version)
            return history[version - 1]

    def history(self, ns: str, key: str) -> list[VersionedEntry]:
        with self._lock:
            return list(self._data.get((ns, key), []))

    def keys(self, ns: str, key_prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(k for (n, k) in self._data if n == ns and k.startswith(key_prefix))

    # -- watches ---------------------------------------------------------

    def watch(self, ns: str, key_prefix: str = "") -> Watch:
        w = Watch(namespace=ns, key_prefix=key_prefix)
        with self._lock:
            self._watches.append(w)
        return w

    def unwatch(self, w: Watch) -> None:
        w.close()
        with self._lock:
            if w in self._watches:
                self._watches.remove(w)

    def _notify(self, entry: VersionedEntry) -> None:
        with self._lock:
            watches = list(self._watches)
        for w in watches:
            if entry.namespace == w.namespace and entry.key.startswith(w.key_prefix):
                w._offer(entry)

    # -- export ----------------------------------------------------------

    def export_lines(self) -> Iterator[str]:
        """Full history as line-delimited JSON, one entry per line."""
        with self._lock:
            entries = [e for history in self._data.values() for e in history]
        entries.sort(key=lambda e: (e.namespace, e.key, e.version))
        for e in entries:
            yield json.dumps(
                {
                    "ns": e.namespace,
                    "key": e.key,
                    "version": e.version,
                    "value": e.value,
                    "author": e.author,
                    "created_at": e.created_at.isoformat(),
                },
                ensure_ascii=False,
            )
