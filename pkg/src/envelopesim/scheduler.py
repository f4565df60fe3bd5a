"""Preemptive fixed-priority scheduling with importance elevation.

Dispatch preference has two bands. Tasks whose line is currently out of
envelope are elevated: their jobs rank first, ordered by importance
descending. Everyone else follows by scheduler priority, with job-level
overrides applied. Ties cannot occur between distinct priorities; the
(task id, seq) pair breaks the rest deterministically.

A job that reaches its deadline incomplete is classified Dropped when an
elevated, more important task consumed processor time inside the job's
release-to-deadline window (the sanctioned sacrifice), and Missed
otherwise (a genuine scheduling failure).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from .model import (
    Job,
    JobState,
    PriorityMap,
    ResponseOption,
    Task,
    TaskSet,
)


@dataclass
class ReleaseEffect:
    job: Optional[Job] = None
    notified: Optional[Job] = None


@dataclass
class TickResult:
    kind: str  # "idle" | "kernel" | "ran"
    job: Optional[Job] = None
    completed: bool = False


class Scheduler:
    def __init__(self, task_set: TaskSet, priority_map: PriorityMap,
                 delta_th: int = 0):
        self.tasks: Dict[str, Task] = {t.id: t for t in task_set}
        self.pmap = priority_map
        self.delta_th = delta_th
        self.seq: Dict[str, int] = {t.id: 0 for t in task_set}
        self.jobs: List[Job] = []
        self.active: List[Job] = []
        self.running: Optional[Job] = None
        self.elevated: Set[str] = set()
        self.kernel_pending = 0
        self.total_top_half = 0

    def importance(self, task_id: str) -> int:
        return self.tasks[task_id].importance

    def set_elevated(self, task_ids) -> None:
        self.elevated = set(task_ids)

    def on_internalize(self, task_id: str, t: int, ooe: bool) -> ReleaseEffect:
        """Respond to an internalized event: release a job, or notify a
        live one for NOTIFY_RUNNING tasks."""
        task = self.tasks[task_id]
        if ooe:
            self.elevated.add(task_id)
        if task.response is ResponseOption.NOTIFY_RUNNING:
            live = [j for j in self.active if j.task_id == task_id]
            if live:
                target = min(live, key=lambda j: j.seq)
                target.notifications += 1
                return ReleaseEffect(notified=target)
        seq = self.seq[task_id]
        self.seq[task_id] = seq + 1
        job = Job(
            task_id=task_id,
            seq=seq,
            release=t,
            abs_deadline=t + task.deadline,
            wcet=task.wcet,
            remaining=task.wcet,
        )
        self.jobs.append(job)
        self.active.append(job)
        return ReleaseEffect(job=job)

    def _key(self, job: Job) -> Tuple:
        if job.task_id in self.elevated:
            return (0, -self.importance(job.task_id), job.task_id, job.seq)
        return (
            1,
            -self.pmap.priority(job.task_id, job.seq),
            job.task_id,
            job.seq,
        )

    def pick_next(self, t: int) -> Optional[Job]:
        if not self.active:
            return None
        return min(self.active, key=self._key)

    def dispatch(self, job: Optional[Job],
                 t: int) -> Tuple[Optional[Job], bool]:
        """Hand the processor to job. Returns (preempted, started)."""
        prev = self.running
        if prev is job:
            return (None, False)
        preempted = None
        if prev is not None and not prev.finalized:
            prev.state = JobState.PREEMPTED
            preempted = prev
        if job is not None:
            job.state = JobState.RUNNING
        self.running = job
        return (preempted, job is not None)

    def shed_check(self, t: int) -> List[Job]:
        """Finalize every incomplete job whose deadline has arrived."""
        overdue = [
            j for j in self.active
            if j.abs_deadline <= t and j.remaining > 0
        ]
        out = []
        for job in sorted(overdue, key=lambda j: (j.task_id, j.seq)):
            verdict = (
                JobState.DROPPED if job.starved_by_elevated
                else JobState.MISSED
            )
            job.finalize(verdict, t)
            self.active.remove(job)
            if self.running is job:
                self.running = None
            out.append(job)
        return out

    def account_top_half(self, t: int) -> int:
        """Charge one interrupt entry. The running job loses delta_th
        ticks to kernel time."""
        self.kernel_pending += self.delta_th
        self.total_top_half += self.delta_th
        if self.running is not None:
            self.running.interference += self.delta_th
        return self.delta_th

    def execute_tick(self, t: int) -> TickResult:
        """Advance the processor by one tick, kernel time first."""
        if self.kernel_pending > 0:
            self.kernel_pending -= 1
            return TickResult(kind="kernel")
        job = self.running
        if job is None:
            return TickResult(kind="idle")
        job.remaining -= 1
        if job.task_id in self.elevated:
            self._mark_starved(job, t)
        if job.remaining == 0:
            job.finalize(JobState.COMPLETED, t + 1)
            self.active.remove(job)
            self.running = None
            return TickResult(kind="ran", job=job, completed=True)
        return TickResult(kind="ran", job=job)

    def _mark_starved(self, elevated_job: Job, t: int) -> None:
        # Definition of a sanctioned sacrifice: an elevated, more
        # important task ate processor time inside the victim's window.
        imp = self.importance(elevated_job.task_id)
        for other in self.active:
            if other is elevated_job:
                continue
            if self.importance(other.task_id) < imp \
                    and other.release <= t < other.abs_deadline:
                other.starved_by_elevated = True
