"""Task registry: lifecycle state machine and append-only journal.

The coordinator stores organization metadata only: rosters, endpoints,
step progress, artifact references.  No ciphertexts, no data values,
no noise material ever reach it.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field

from ..protocol.config import TaskConfig

STATE_PREPARING = "Preparing"
STATE_RUNNING = "Running"
STATE_COMPLETE = "Complete"
STATE_FAILED = "Failed"

ROSTER_INVITED = "invited"
ROSTER_JOINED = "joined"
ROSTER_UPLOADED = "uploaded"

# which role reports each protocol step
STEP_OWNER = {1: "S", 2: "P", 3: "T", 4: "S", 5: "T", 6: "T", 7: "S", 8: "T"}
FINAL_STEP = 8

# per-step deadline: a base allowance plus a size-proportional term for
# the ciphertext matrices (N^2 * m homomorphic operations dominate)
STEP_BASE_DEADLINE = 60.0
STEP_SIZE_FACTOR = 1e-3


class RegistryError(ValueError):
    """Request rejected: unknown task, bad state, or wrong role."""


@dataclass
class RosterEntry:
    participant_id: str
    expected_points: int
    state: str = ROSTER_INVITED
    endpoint: str | None = None


@dataclass
class TaskRecord:
    task_id: str
    title: str
    description: str
    proposer: str
    config: TaskConfig
    roster: dict[str, RosterEntry]
    state: str = STATE_PREPARING
    step: int = 0                      # step currently in progress when Running
    failure_reason: str | None = None
    result_ref: str | None = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    step2_reports: set[str] = field(default_factory=set)
    dim_ranges: dict[str, list[list[float]]] = field(default_factory=dict)

    def state_label(self) -> str:
        if self.state == STATE_RUNNING:
            return f"Running({self.step})"
        if self.state == STATE_FAILED:
            return f"Failed({self.failure_reason})"
        return self.state

    def step_deadline_seconds(self) -> float:
        n = self.config.total_points
        return STEP_BASE_DEADLINE + STEP_SIZE_FACTOR * n * n * max(self.config.dimensions, 1)

    def ranges_complete(self) -> bool:
        return set(self.dim_ranges) == set(self.roster)

    def global_ranges(self) -> tuple[list[float], list[float]] | None:
        if not self.config.normalize or not self.ranges_complete():
            return None
        los = [r[0] for r in self.dim_ranges.values()]
        his = [r[1] for r in self.dim_ranges.values()]
        lo = [min(col) for col in zip(*los)]
        hi = [max(col) for col in zip(*his)]
        return lo, hi

    def to_jsonable(self, collaborators: dict[str, str]) -> dict:
        ranges = self.global_ranges()
        return {
            "task_id": self.task_id,
            "title": self.title,
            "description": self.description,
            "proposer": self.proposer,
            "config": self.config.to_dict(),
            "roster": {
                pid: {"participant_id": e.participant_id, "state": e.state,
                      "expected_points": e.expected_points, "endpoint": e.endpoint}
                for pid, e in self.roster.items()
            },
            "collaborators": collaborators,
            "state": self.state,
            "step": self.step,
            "state_label": self.state_label(),
            "failure_reason": self.failure_reason,
            "result_ref": self.result_ref,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "global_ranges": list(ranges) if ranges else None,
        }


class TaskRegistry:
    """Thread-safe task store; every mutation is journaled as one JSON line."""

    def __init__(self, journal_path: str | None = None):
        self._tasks: dict[str, TaskRecord] = {}
        self._collaborators: dict[str, str] = {}
        self._lock = threading.RLock()
        self._journal_path = journal_path

    def _journal(self, event: str, **fields) -> None:
        if self._journal_path is None:
            return
        record = {"ts": time.time(), "event": event, **fields}
        with open(self._journal_path, "a") as fh:
            fh.write(json.dumps(record) + "\n")

    def register_collaborator(self, role: str, endpoint: str) -> None:
        if role not in ("S", "T"):
            raise RegistryError(f"unknown collaborator role {role!r}")
        with self._lock:
            existing = self._collaborators.get(role)
            if existing is not None and existing != endpoint:
                raise RegistryError(f"role {role} already claimed by {existing}")
            self._collaborators[role] = endpoint
        self._journal("collaborator_registered", role=role, endpoint=endpoint)

    def collaborators(self) -> dict[str, str]:
        with self._lock:
            return dict(self._collaborators)

    def propose(self, config: TaskConfig, title: str = "", description: str = "",
                proposer: str = "") -> TaskRecord:
        config.validate()
        with self._lock:
            task_id = config.task_id
            if task_id in self._tasks:
                # caller reused a config object; mint a fresh identity
                task_id = uuid.uuid4().hex
                config.task_id = task_id
            record = TaskRecord(
                task_id=task_id,
                title=title,
                description=description,
                proposer=proposer,
                config=config,
                roster={
                    p.participant_id: RosterEntry(p.participant_id, p.point_count)
                    for p in config.participants
                },
            )
            self._tasks[task_id] = record
        self._journal("task_proposed", task_id=task_id, title=title,
                      proposer=proposer, participants=len(record.roster),
                      dimensions=config.dimensions)
        return record

    def get(self, task_id: str) -> TaskRecord:
        with self._lock:
            record = self._tasks.get(task_id)
            if record is None:
                raise RegistryError(f"unknown task {task_id!r}")
            self._expire_if_stalled(record)
            return record

    def list_tasks(self) -> list[TaskRecord]:
        with self._lock:
            records = sorted(self._tasks.values(), key=lambda r: r.created_at)
            for record in records:
                self._expire_if_stalled(record)
            return records

    def _expire_if_stalled(self, record: TaskRecord) -> None:
        """Lazily fail a Running task whose current step blew its deadline."""
        if record.state != STATE_RUNNING:
            return
        elapsed = time.time() - record.updated_at
        deadline = record.step_deadline_seconds()
        if elapsed > deadline:
            record.state = STATE_FAILED
            record.failure_reason = (
                f"step {record.step} exceeded its {deadline:.0f}s deadline"
            )
            self._journal("task_failed", task_id=record.task_id,
                          reason=record.failure_reason)

    def join(self, task_id: str, participant_id: str, endpoint: str) -> TaskRecord:
        with self._lock:
            record = self.get(task_id)
            if record.state != STATE_PREPARING:
                raise RegistryError(f"cannot join a task in state {record.state_label()}")
            entry = record.roster.get(participant_id)
            if entry is None:
                raise RegistryError(f"{participant_id!r} is not on the roster")
            if entry.state == ROSTER_INVITED:
                entry.state = ROSTER_JOINED
            if endpoint:
                # a UI-originated join carries no endpoint; keep the runner's
                entry.endpoint = endpoint
            record.updated_at = time.time()
        self._journal("participant_joined", task_id=task_id,
                      participant_id=participant_id, endpoint=endpoint)
        return record

    def mark_staged(self, task_id: str, participant_id: str, point_count: int,
                    dim_range: list[list[float]] | None = None) -> TaskRecord:
        """Participant declares its data is loaded and sized as promised."""
        with self._lock:
            record = self.get(task_id)
            if record.state != STATE_PREPARING:
                raise RegistryError(f"task is {record.state_label()}, not Preparing")
            entry = record.roster.get(participant_id)
            if entry is None or entry.state == ROSTER_INVITED:
                raise RegistryError(f"{participant_id!r} has not joined")
            if point_count != entry.expected_points:
                raise RegistryError(
                    f"{participant_id!r} staged {point_count} points, "
                    f"roster expects {entry.expected_points}"
                )
            entry.state = ROSTER_UPLOADED
            if dim_range is not None:
                # held in memory for normalization; never journaled
                record.dim_ranges[participant_id] = dim_range
            all_ready = all(e.state == ROSTER_UPLOADED for e in record.roster.values())
            if all_ready and (not record.config.normalize or record.ranges_complete()):
                record.state = STATE_RUNNING
                record.step = 1
            record.updated_at = time.time()
            state_label = record.state_label()
        self._journal("participant_staged", task_id=task_id,
                      participant_id=participant_id, point_count=point_count,
                      state=state_label)
        return record

    def advance(self, task_id: str, step: int, role: str,
                participant_id: str | None = None,
                evidence: dict | None = None) -> TaskRecord:
        """Record completion of one protocol step by the role that owns it."""
        with self._lock:
            record = self.get(task_id)
            if record.state != STATE_RUNNING:
                raise RegistryError(f"task is {record.state_label()}, not Running")
            owner = STEP_OWNER.get(step)
            if owner is None:
                raise RegistryError(f"no such protocol step {step}")
            if role != owner:
                raise RegistryError(f"step {step} is owned by {owner}, not {role}")
            if step != record.step:
                record.state = STATE_FAILED
                record.failure_reason = (
                    f"out-of-order report: got step {step} while step "
                    f"{record.step} is in progress"
                )
                record.updated_at = time.time()
                self._journal("task_failed", task_id=task_id,
                              reason=record.failure_reason)
                raise RegistryError(record.failure_reason)
            if step == 2:
                if participant_id not in record.roster:
                    raise RegistryError(f"unknown participant {participant_id!r}")
                record.step2_reports.add(participant_id)
                if record.step2_reports == set(record.roster):
                    record.step = 3
            elif step == FINAL_STEP:
                record.state = STATE_COMPLETE
                record.result_ref = (evidence or {}).get("result_ref")
            else:
                record.step = step + 1
            record.updated_at = time.time()
            state_label = record.state_label()
        self._journal("step_reported", task_id=task_id, step=step, role=role,
                      participant_id=participant_id, evidence=evidence or {},
                      state=state_label)
        return record

    def fail(self, task_id: str, reason: str) -> TaskRecord:
        with self._lock:
            record = self.get(task_id)
            if record.state in (STATE_COMPLETE, STATE_FAILED):
                return record
            record.state = STATE_FAILED
            record.failure_reason = reason
            record.updated_at = time.time()
        self._journal("task_failed", task_id=task_id, reason=reason)
        return record
