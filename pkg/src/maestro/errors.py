"""Exception hierarchy shared across the engine.

Every error the engine raises deliberately derives from MaestroError so
callers (CLI, gateway) can map them to exit codes / HTTP statuses in one
place.  Errors carry the minimal context needed to act on them, never
provider credentials or raw payload bytes.
"""

from __future__ import annotations


class MaestroError(Exception):
    """Base class for all engine errors."""


# --- template rendering -----------------------------------------------------

class MissingVariable(MaestroError):
    def __init__(self, name: str):
        super().__init__(f"template placeholder {{{name}}} is unbound")
        self.name = name


class UnknownVariable(MaestroError):
    def __init__(self, name: str):
        super().__init__(f"binding {name!r} does not match any declared placeholder")
        self.name = name


# --- sessions ---------------------------------------------------------------

class SessionClosed(MaestroError):
    def __init__(self, session_id: str):
        super().__init__(f"session {session_id} is not open")
        self.session_id = session_id


# --- workflow documents -----------------------------------------------------

class WorkflowSyntaxError(MaestroError):
    def __init__(self, line: int, col: int, detail: str):
        super().__init__(f"workflow syntax error at {line}:{col}: {detail}")
        self.line = line
        self.col = col


class MissingField(MaestroError):
    def __init__(self, path: str):
        super().__init__(f"required field missing: {path}")
        self.path = path


class DuplicateNodeName(MaestroError):
    def __init__(self, name: str):
        super().__init__(f"duplicate node name: {name!r}")
        self.name = name


# --- state store ------------------------------------------------------------

class Conflict(MaestroError):
    """Compare-and-set lost the race; carries what won for caller retry."""

    def __init__(self, current_version: int, current_value: str | None = None):
        super().__init__(f"version conflict, current version is {current_version}")
        self.current_version = current_version
        self.current_value = current_value


class NoSuchVersion(MaestroError):
    def __init__(self, ns: str, key: str, version: int):
        super().__init__(f"no version {version} for {ns}/{key}")
        self.version = version


class SubscriberLagged(MaestroError):
    def __init__(self, dropped_count: int):
        super().__init__(f"subscriber lagged, dropped {dropped_count} events")
        self.dropped_count = dropped_count


# --- scheduler --------------------------------------------------------------

class AlreadyRunning(MaestroError):
    pass


class NotRunning(MaestroError):
    pass


# --- rag --------------------------------------------------------------------

class InvalidParams(MaestroError):
    pass


class EmptyText(MaestroError):
    pass


class DimMismatch(MaestroError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"embedding dim mismatch: index has {expected}, query has {got}")
        self.expected = expected
        self.got = got


class UnsupportedMediaType(MaestroError):
    def __init__(self, media_type: str):
        super().__init__(f"unsupported media type: {media_type}")
        self.media_type = media_type


class DecodeError(MaestroError):
    pass


class NoWebTool(MaestroError):
    pass


# --- backends ---------------------------------------------------------------

class BackendFailure(MaestroError):
    """Base for anything that went wrong talking to a model backend."""


class AuthError(BackendFailure):
    pass


class ProviderError(BackendFailure):
    def __init__(self, status: int, body_digest: str):
        super().__init__(f"provider returned {status} (body {body_digest[:12]})")
        self.status = status
        self.body_digest = body_digest

    @property
    def retryable(self) -> bool:
        return self.status >= 500


class Timeout(BackendFailure):
    pass


class TransportFailure(BackendFailure):
    pass


class FixtureMiss(BackendFailure):
    def __init__(self, key: str):
        super().__init__(f"mock fixture set has no entry for {key}")
        self.key = key


class FixtureParseError(MaestroError):
    pass


class NoTranscriptionBackend(MaestroError):
    pass


# --- engine -----------------------------------------------------------------

class HopLimitExceeded(MaestroError):
    def __init__(self, max_hops: int):
        super().__init__(f"supervisor loop exceeded {max_hops} hops")
        self.max_hops = max_hops


class RouteParseError(MaestroError):
    def __init__(self, raw: str):
        super().__init__(f"cannot parse routing decision from {raw!r}")
        self.raw = raw


class ToolFailure(MaestroError):
    def __init__(self, tool: str, detail: str):
        super().__init__(f"tool {tool!r} failed: {detail}")
        self.tool = tool
        self.detail = detail
