"""Content-addressed blob storage.

Binary payloads (images, audio, generated media) are stored once, keyed by
the lowercase hex SHA-256 of their bytes.  Mock backends key fixtures off
these digests, so the same bytes always resolve to the same mock behavior.
"""

from __future__ import annotations

import hashlib
import threading


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class BlobStore:
    """In-memory content-addressed store, safe for concurrent use."""

    def __init__(self):
        self._blobs: dict[str, bytes] = {}
        self._media_types: dict[str, str] = {}
        self._lock = threading.Lock()

    def put(self, data: bytes, media_type: str) -> str:
        """Store bytes and return their digest. Idempotent for equal bytes."""
        digest = sha256_hex(data)
        with self._lock:
            self._blobs[digest] = data
            self._media_types[digest] = media_type
        return digest

    def get(self, digest: str) -> bytes:
        with self._lock:
            return self._blobs[digest]

    def media_type(self, digest: str) -> str:
        with self._lock:
            return self._media_types[digest]

    def __contains__(self, digest: str) -> bool:
        with self._lock:
            return digest in self._blobs

    def verify(self, digest: str) -> bool:
        """Recompute the digest of the stored bytes and compare."""
        with self._lock:
            data = self._blobs.get(digest)
        return data is not None and sha256_hex(data) == digest

    def __len__(self) -> int:
        with self._lock:
            return len(self._blobs)
