"""Task model for event-triggered real-time systems.

Time is measured in integer ticks throughout the package. A task is
characterized by its worst-case execution time, its expected minimum
inter-arrival time (the period), a relative deadline, and an importance
value. Importance is a total order that is deliberately independent of
both scheduler priority and any notion of criticality: it only states
which task the system would rather keep alive when not everything can
be served.

Each task additionally carries an arrival envelope (n, W): at most n
releasing events are considered legitimate within any sliding window of
W ticks. Event sources that exceed the envelope are throttled and
eventually declared faulty by the monitor layer.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Mapping, Optional

TimeInstant = int
Duration = int

# Sentinel period for exception-only tasks: their normal arrival has either
# happened already or never happens, so every further event is out of
# envelope by definition.
INFINITE_PERIOD = math.inf

# Interrupt line identifier reserved for the OS timer.
TIMER_LINE = "timer"


class ResponseOption(Enum):
    """How the system responds to a task-releasing event beyond the first.

    RELEASE_ALL releases one job per internalized event, even while an
    earlier job of the same task is still incomplete. NOTIFY_RUNNING
    instead informs an already live job (an exception-handler style
    response); it degenerates to a release when no live job exists.
    """

    RELEASE_ALL = "release_all"
    NOTIFY_RUNNING = "notify_running"


@dataclass(frozen=True)
class Task:
    """A sporadic task.

    Attributes:
        id: unique task name.
        wcet: worst-case execution time in ticks, at least 1.
        period: minimum inter-arrival time of in-envelope events. May be
            INFINITE_PERIOD for exception-only tasks, in which case an
            explicit deadline is required.
        importance: non-negative integer, unique within a task set.
            Larger values mean more important.
        line: interrupt line this task's releasing event arrives on.
            Exactly one task per line.
        envelope_n: maximum legitimate events per sliding window.
        envelope_w: sliding window length in ticks.
        deadline: relative deadline; defaults to the period.
        response: out-of-envelope response option.
        priority: base scheduler priority for explicit assignments.
            Larger values win. Ignored under importance-monotonic
            assignment.
        job_priority_overrides: job-level priority overrides, keyed by
            the job sequence number modulo the number of jobs this task
            releases per hyperperiod.
    """

    id: str
    wcet: Duration
    period: float
    importance: int
    line: str
    envelope_n: int
    envelope_w: Duration
    deadline: Optional[Duration] = None
    response: ResponseOption = ResponseOption.RELEASE_ALL
    priority: Optional[int] = None
    job_priority_overrides: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.deadline is None:
            if self.period == INFINITE_PERIOD:
                raise ValueError(
                    f"task {self.id}: an explicit deadline is required when "
                    f"the period is infinite"
                )
            object.__setattr__(self, "deadline", int(self.period))

    @property
    def exception_only(self) -> bool:
        return self.period == INFINITE_PERIOD


@dataclass
class TaskSet:
    tasks: list

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self):
        return len(self.tasks)

    def by_id(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def lines(self) -> Dict[str, Task]:
        return {t.line: t for t in self.tasks}


def hyperperiod(task_set: TaskSet) -> int:
    """Least common multiple of all finite periods, or 1 if none exist."""
    periods = [int(t.period) for t in task_set if not t.exception_only]
    if not periods:
        return 1
    return math.lcm(*periods)


def utilization(task_set: TaskSet) -> Fraction:
    """Exact processor utilization. Exception-only tasks contribute zero."""
    total = Fraction(0)
    for t in task_set:
        if not t.exception_only:
            total += Fraction(t.wcet, int(t.period))
    return total


@dataclass
class ValidationReport:
    problems: list

    @property
    def valid(self) -> bool:
        return not self.problems


def validate_task_set(task_set: TaskSet) -> ValidationReport:
    """Static sanity checks. Returns a report instead of raising so a
    caller can show every problem at once."""
    problems = []
    seen_ids = set()
    seen_importance = {}
    seen_lines = {}
    seen_priorities = {}
    for t in task_set:
        if t.id in seen_ids:
            problems.append(f"task {t.id}: duplicate task id")
        seen_ids.add(t.id)
        if t.wcet < 1:
            problems.append(f"task {t.id}: wcet must be at least 1 tick")
        if not t.exception_only and t.period < 1:
            problems.append(f"task {t.id}: zero or negative period")
        if t.deadline is not None and t.deadline < 1:
            problems.append(f"task {t.id}: zero or negative deadline")
        if t.deadline is not None and t.wcet > t.deadline:
            problems.append(
                f"task {t.id}: wcet {t.wcet} exceeds deadline {t.deadline}"
            )
        if not t.exception_only and t.deadline is not None \
                and t.deadline > t.period:
            problems.append(
                f"task {t.id}: deadline {t.deadline} exceeds period "
                f"{int(t.period)}"
            )
        if t.importance < 0:
            problems.append(f"task {t.id}: negative importance")
        if t.importance in seen_importance:
            problems.append(
                f"task {t.id}: duplicate importance {t.importance} "
                f"(also used by {seen_importance[t.importance]})"
            )
        seen_importance.setdefault(t.importance, t.id)
        if t.envelope_n < 1:
            problems.append(f"task {t.id}: envelope_n must be at least 1")
        if t.envelope_w < 1:
            problems.append(f"task {t.id}: envelope_w must be at least 1")
        if t.line == TIMER_LINE:
            problems.append(
                f"task {t.id}: line name '{TIMER_LINE}' is reserved"
            )
        if t.line in seen_lines:
            problems.append(
                f"task {t.id}: line collision on '{t.line}' with "
                f"{seen_lines[t.line]}"
            )
        seen_lines.setdefault(t.line, t.id)
        if t.priority is not None:
            if t.priority in seen_priorities:
                problems.append(
                    f"task {t.id}: duplicate base priority {t.priority} "
                    f"(also used by {seen_priorities[t.priority]})"
                )
            seen_priorities.setdefault(t.priority, t.id)
    return ValidationReport(problems)


@dataclass
class PriorityMap:
    """Scheduler priority lookup with optional job-level overrides.

    Overrides are keyed by (task, seq mod k) where k is the number of
    jobs the task releases per hyperperiod, so a priority pattern
    repeats every hyperperiod.
    """

    base: Dict[str, int]
    overrides: Dict[str, Dict[int, int]] = field(default_factory=dict)
    seq_modulus: Dict[str, int] = field(default_factory=dict)

    def priority(self, task_id: str, seq: int) -> int:
        per_task = self.overrides.get(task_id)
        if per_task:
            k = self.seq_modulus.get(task_id, 1)
            override = per_task.get(seq % k)
            if override is not None:
                return override
        return self.base[task_id]


def assign_importance_monotonic(task_set: TaskSet) -> PriorityMap:
    """Higher importance gets higher scheduler priority, nothing else."""
    return PriorityMap(base={t.id: t.importance for t in task_set})


def explicit_priority_map(task_set: TaskSet) -> PriorityMap:
    """Build the priority map from per-task base priorities and job-level
    overrides given in the task definitions."""
    base = {}
    overrides = {}
    modulus = {}
    hp = hyperperiod(task_set)
    for t in task_set:
        if t.priority is None:
            raise ValueError(
                f"task {t.id}: explicit priority assignment requires a "
                f"priority value"
            )
        base[t.id] = t.priority
        if t.job_priority_overrides:
            overrides[t.id] = dict(t.job_priority_overrides)
        if t.exception_only:
            modulus[t.id] = 1
        else:
            modulus[t.id] = max(1, hp // int(t.period))
    return PriorityMap(base=base, overrides=overrides, seq_modulus=modulus)


class JobState(Enum):
    RELEASED = "released"
    RUNNING = "running"
    PREEMPTED = "preempted"
    COMPLETED = "completed"
    MISSED = "missed"
    DROPPED = "dropped"


FINAL_STATES = frozenset(
    {JobState.COMPLETED, JobState.MISSED, JobState.DROPPED}
)


@dataclass
class Job:
    """One released instance of a task."""

    task_id: str
    seq: int
    release: TimeInstant
    abs_deadline: TimeInstant
    wcet: Duration
    remaining: Duration
    state: JobState = JobState.RELEASED
    notifications: int = 0
    starved_by_elevated: bool = False
    interference: Duration = 0
    completion: Optional[TimeInstant] = None

    @property
    def executed(self) -> Duration:
        return self.wcet - self.remaining

    @property
    def finalized(self) -> bool:
        return self.state in FINAL_STATES

    def finalize(self, state: JobState, t: TimeInstant) -> None:
        if self.finalized:
            raise ValueError(
                f"job {self.task_id}#{self.seq} already finalized as "
                f"{self.state.value}"
            )
        if state not in FINAL_STATES:
            raise ValueError(f"{state} is not a final state")
        self.state = state
        if state is JobState.COMPLETED:
            self.completion = t
