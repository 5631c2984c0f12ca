"""Retry, alerting, and alternate-path activation around fallible calls.

Backoff is geometric and deterministic by default (jitter is opt-in) so
scenario replays stay byte-stable.  Degradation is always explicit: when
both the primary and alternate routes are exhausted, the caller gets a
synthesized text response flagged degraded=true, never a silent fallback.
"""

from __future__ import annotations

import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, TypeVar

from .errors import ProviderError, Timeout, TransportFailure
from .model import PromptTemplate, render_template

T = TypeVar("T")

ALERT_WINDOW_SECONDS = 60.0
ALERT_THRESHOLD = 5


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 0.1  # seconds
    factor: float = 2.0
    jitter: bool = False

    def delay_before(self, attempt: int) -> float:
        """Delay preceding the given retry attempt (attempt 2 waits base·factor^0)."""
        delay = self.base_delay * self.factor ** (attempt - 2)
        if self.jitter:
            delay *= 0.5 + random.random()
        return delay


def is_retryable(error: BaseException) -> bool:
    if isinstance(error, (Timeout, TransportFailure, ConnectionError)):
        return True
    if isinstance(error, ProviderError):
        return error.retryable
    return False


@dataclass
class RetryTrace:
    """What a retried call actually did; feeds the turn trace."""

    attempts: int = 0
    delays: list[float] = field(default_factory=list)


def with_retry(
    policy: RetryPolicy,
    call: Callable[[], T],
    *,
    sleep: Callable[[float], None] = time.sleep,
    trace: RetryTrace | None = None,
) -> T:
    """Invoke ``call`` under the retry policy; returns the first success.

    Non-retryable errors (auth failures, fixture misses, provider 4xx)
    propagate immediately.  After max_attempts the original error is raised
    unchanged.
    """
    trace = trace if trace is not None else RetryTrace()
    last_error: BaseException | None = None
    for attempt in range(1, policy.max_attempts + 1):
        if attempt > 1:
            delay = policy.delay_before(attempt)
            trace.delays.append(delay)
            sleep(delay)
        trace.attempts = attempt
        try:
            return call()
        except Exception as err:  # noqa: BLE001 - retry filter decides
            last_error = err
            if not is_retryable(err):
                raise
    assert last_error is not None
    raise last_error


@dataclass(frozen=True)
class FallbackRoute:
    """Primary binding plus what to do when it stays down."""

    primary: str
    alternate: str | None = None
    degradation_template: PromptTemplate | None = None
    policy: RetryPolicy = RetryPolicy()
    alternate_policy: RetryPolicy = RetryPolicy()

    def __post_init__(self):
        if self.alternate == self.primary:
            raise ValueError("alternate binding must differ from primary")


@dataclass
class RouteOutcome:
    """Result of route_with_fallback plus how it was obtained."""

    value: object | None
    binding: str
    degraded: bool = False
    degradation_text: str | None = None
    primary_trace: RetryTrace = field(default_factory=RetryTrace)
    alternate_trace: RetryTrace = field(default_factory=RetryTrace)


def route_with_fallback(
    route: FallbackRoute,
    invoke: Callable[[str], T],
    *,
    sleep: Callable[[float], None] = time.sleep,
) -> RouteOutcome:
    """Try the primary binding, then the alternate, then degrade.

    ``invoke`` is called with a binding name.  The alternate is never
    attempted before the primary's retry policy is exhausted.  With no
    alternate and no degradation template the final error propagates.
    """
    outcome = RouteOutcome(value=None, binding=route.primary)
    try:
        outcome.value = with_retry(
            route.policy, lambda: invoke(route.primary), sleep=sleep, trace=outcome.primary_trace
        )
        return outcome
    except Exception as primary_err:
        if route.alternate is not None:
            try:
                outcome.value = with_retry(
                    route.alternate_policy,
                    lambda: invoke(route.alternate),  # type: ignore[arg-type]
                    sleep=sleep,
                    trace=outcome.alternate_trace,
                )
                outcome.binding = route.alternate
                return outcome
            except Exception as alt_err:
                if route.degradation_template is None:
                    raise alt_err
                return _degrade(route, outcome, alt_err)
        if route.degradation_template is None:
            raise primary_err
        return _degrade(route, outcome, primary_err)


def _degrade(route: FallbackRoute, outcome: RouteOutcome, error: Exception) -> RouteOutcome:
    tpl = route.degradation_template
    assert tpl is not None
    bindings = {"reason": type(error).__name__} if "reason" in tpl.declared_vars else {}
    outcome.degraded = True
    outcome.degradation_text = render_template(tpl, bindings)
    outcome.value = None
    return outcome


@dataclass(frozen=True)
class Alert:
    binding: str
    count: int
    at: float


class HealthMonitor:
    """Rolling failure counters per binding with once-per-crossing alerts.

    An alert fires the moment a binding's failure count inside the window
    reaches the threshold, then stays quiet until the rolling count falls
    back below the threshold.
    """

    def __init__(
        self,
        threshold: int = ALERT_THRESHOLD,
        window: float = ALERT_WINDOW_SECONDS,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.threshold = threshold
        self.window = window
        self._clock = clock
        self._lock = threading.Lock()
        self._failures: dict[str, deque[float]] = {}
        self._alerted: dict[str, bool] = {}
        self.alerts: list[Alert] = []

    def record_failure(self, binding: str, error: BaseException | None = None) -> Alert | None:
        now = self._clock()
        with self._lock:
            window = self._failures.setdefault(binding, deque())
            window.append(now)
            self._prune(binding, now)
            count = len(window)
            if count < self.threshold:
                self._alerted[binding] = False
                return None
            if self._alerted.get(binding, False):
                return None
            self._alerted[binding] = True
            alert = Alert(binding=binding, count=count, at=now)
            self.alerts.append(alert)
            return alert

    def failure_count(self, binding: str) -> int:
        with self._lock:
            self._prune(binding, self._clock())
            return len(self._failures.get(binding, ()))

    def _prune(self, binding: str, now: float) -> None:
        window = self._failures.get(binding)
        if not window:
            return
        cutoff = now - self.window
        while window and window[0] < cutoff:
            window.popleft()
        if len(window) < self.threshold:
            self._alerted[binding] = False
