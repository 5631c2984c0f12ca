"""Priority task queue with decomposition, reassignment, and FIFO ties.

Pop order is total: priority descending, then enqueue order ascending.
Reassignment re-enqueues a task with its original enqueue_seq so a bumped
task never loses its place in line (no priority inversion through requeue).
Capacity enforcement reassigns the newest in-flight task of an overloaded
agent back to the pool.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field
from enum import Enum

from .errors import AlreadyRunning, NotRunning
from .model import ModalPayload

DEFAULT_PRIORITY = 5
DEFAULT_CAPACITY = 4


class TaskStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    REASSIGNED = "reassigned"


@dataclass
class Task:
    id: str
    priority: int
    payload: tuple[ModalPayload, ...]
    enqueue_seq: int
    parent_id: str | None = None
    status: TaskStatus = TaskStatus.PENDING
    assigned_agent: str | None = None
    attempts: int = 0
    children: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.priority <= 9:
            raise ValueError("priority must be in 0..9")


@dataclass(frozen=True)
class ReassignEvent:
    task_id: str
    from_agent: str
    to_agent: str
    reason: str


class TaskQueue:
    """Thread-safe priority queue over Task records.

    Status transitions happen atomically under the queue lock; the pending
    heap holds (‑priority, enqueue_seq) entries and lazily skips records
    whose status changed since they were pushed.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._seq = itertools.count(1)
        self._ids = itertools.count(1)
        self._tasks: dict[str, Task] = {}
        self._heap: list[tuple[int, int, str]] = []
        self.reassign_events: list[ReassignEvent] = []
        self.done_total = 0

    # -- intake -----------------------------------------------------------

    def submit(
        self,
        payload: list[ModalPayload] | tuple[ModalPayload, ...] = (),
        priority: int = DEFAULT_PRIORITY,
        parent_id: str | None = None,
    ) -> Task:
        with self._lock:
            task = Task(
                id=f"task-{next(self._ids)}",
                priority=priority,
                payload=tuple(payload),
                enqueue_seq=next(self._seq),
                parent_id=parent_id,
            )
            self._tasks[task.id] = task
            self._push(task)
            return task

    def _push(self, task: Task) -> None:
        heapq.heappush(self._heap, (-task.priority, task.enqueue_seq, task.id))

    def decompose(self, task: Task, parts: list[list[ModalPayload]]) -> list[Task]:
        """Split a pending task into child tasks inheriting its priority.

        The parent runs (off the queue) until its last child completes.
        """
        if not parts:
            raise ValueError("parts must be non-empty")
        with self._lock:
            if task.status is not TaskStatus.PENDING:
                raise AlreadyRunning(f"{task.id} is {task.status.value}, not pending")
            task.status = TaskStatus.RUNNING
            children = []
            for part in parts:
                child = Task(
                    id=f"task-{next(self._ids)}",
                    priority=task.priority,
                    payload=tuple(part),
                    enqueue_seq=next(self._seq),
                    parent_id=task.id,
                )
                self._tasks[child.id] = child
                task.children.append(child.id)
                self._push(child)
                children.append(child)
            return children

    # -- dispatch ----------------------------------------------------------

    def next_task(self, agent: str | None = None) -> Task | None:
        """Pop the highest-priority, oldest pending task and mark it running.

        When popping for a named agent would push that agent past capacity,
        the agent's newest in-flight task is reassigned back to the pool and
        the caller gets nothing.
        """
        with self._lock:
            task = self._pop_pending()
            if task is None:
                return None
            task.status = TaskStatus.RUNNING
            task.assigned_agent = agent
            task.attempts += 1
            if agent is not None:
                inflight = [
                    t for t in self._tasks.values()
                    if t.status is TaskStatus.RUNNING and t.assigned_agent == agent
                ]
                if len(inflight) > self.capacity:
                    newest = max(inflight, key=lambda t: t.enqueue_seq)
                    self._reassign(newest, to_agent="pool", reason="overload")
                    if newest is task:
                        return None
            return task

    def _pop_pending(self) -> Task | None:
        while self._heap:
            _, _, task_id = heapq.heappop(self._heap)
            task = self._tasks[task_id]
            if task.status is TaskStatus.PENDING:
                return task
        return None

    def reassign(self, task: Task, to_agent: str, reason: str) -> Task:
        """Push a running task back to pending, keeping its place in line."""
        with self._lock:
            if task.status is not TaskStatus.RUNNING:
                raise NotRunning(f"{task.id} is {task.status.value}, not running")
            if to_agent == task.assigned_agent:
                raise ValueError("reassign target equals current assignee")
            self._reassign(task, to_agent, reason)
            return task

    def _reassign(self, task: Task, to_agent: str, reason: str) -> None:
        self.reassign_events.append(
            ReassignEvent(task.id, task.assigned_agent or "", to_agent, reason)
        )
        task.status = TaskStatus.REASSIGNED
        task.assigned_agent = None
        task.status = TaskStatus.PENDING  # re-enqueued with original enqueue_seq
        self._push(task)

    # -- completion ---------------------------------------------------------

    def complete(self, task: Task) -> None:
        with self._lock:
            if task.status is not TaskStatus.RUNNING:
                raise NotRunning(f"{task.id} is {task.status.value}, not running")
            task.status = TaskStatus.DONE
            self.done_total += 1
            self._maybe_complete_parent(task)

    def _maybe_complete_parent(self, task: Task) -> None:
        if task.parent_id is None:
            return
        parent = self._tasks.get(task.parent_id)
        if parent is None or parent.status is not TaskStatus.RUNNING:
            return
        if all(self._tasks[cid].status is TaskStatus.DONE for cid in parent.children):
            parent.status = TaskStatus.DONE
            self.done_total += 1
            self._maybe_complete_parent(parent)

    def fail(self, task: Task) -> None:
        with self._lock:
            if task.status is not TaskStatus.RUNNING:
                raise NotRunning(f"{task.id} is {task.status.value}, not running")
            task.status = TaskStatus.FAILED

    # -- introspection --------------------------------------------------------

    def get(self, task_id: str) -> Task:
        with self._lock:
            return self._tasks[task_id]

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {status.value: 0 for status in TaskStatus}
            for t in self._tasks.values():
                out[t.status.value] += 1
            out["reassigned"] = len(self.reassign_events)
            return out
