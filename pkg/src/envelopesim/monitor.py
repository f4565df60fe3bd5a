"""Out-of-envelope detection and defense per interrupt line.

Each line owns a ring buffer of the last envelope_n internalization
timestamps. When the buffer fills inside one sliding window the line is
masked, an alarm is raised, and a timer is set to the earliest buffered
timestamp plus the window length. At expiry the device counter decides:
no occurrences while masked means the sensor calmed down and the line is
unmasked; any occurrence means the source exceeded its envelope for a
full window and is declared faulty.

Two masking regimes can defer occurrences instead of losing them. The
window defense above reconstructs nothing (suppressed occurrences only
count toward the fault decision). The bottom-half mode masks a line for
the duration of one deferred handler and afterwards internalizes the
occurrences that queued up meanwhile, all carrying the timestamp of the
event that caused the mask. Assigning the earlier timestamp is a safe
over-approximation: pressure on the window can only start sooner.

An out-of-envelope episode starts when two internalizations arrive closer
together than the task period. It ends either at the first internalization
whose gap reaches the period again, or once the violating pair has aged
out of the last max(period, window) ticks. This is the weakest memoryless
exit rule; the trace records every internalization timestamp, so stricter
rules can be evaluated offline against the same run.
"""

import math
from bisect import insort
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from .model import Task
from .vic import Snapshot, VicState


class MonitorError(Exception):
    pass


class LineState(Enum):
    IN_ENVELOPE = "in_envelope"
    OUT_OF_ENVELOPE = "out_of_envelope"
    WINDOW_MASKED = "window_masked"
    FAULTY = "faulty"


class AlarmKind(Enum):
    OUT_OF_ENVELOPE_ENTERED = "out_of_envelope_entered"
    WINDOW_BOUND_REACHED = "window_bound_reached"
    SENSOR_FAULT = "sensor_fault"
    SENSOR_RESUMED = "sensor_resumed"


class FaultPolicy(Enum):
    PERMANENT = "permanent"
    AUTO_RESUME = "auto_resume"


@dataclass(frozen=True)
class Alarm:
    time: int
    line: str
    kind: AlarmKind


@dataclass
class MonitorEffect:
    """What one internalization did to the line."""

    entered_ooe: bool = False
    exited_ooe: bool = False
    masked: bool = False
    window_timer: Optional[int] = None
    alarms: List[Alarm] = field(default_factory=list)


@dataclass
class TimerEffect:
    """Outcome of a window timer expiry."""

    unmasked: bool = False
    fault_declared: bool = False
    resumed: bool = False
    rearm_at: Optional[int] = None
    alarms: List[Alarm] = field(default_factory=list)


@dataclass
class BottomHalfRelease:
    """Occurrences deferred while a bottom-half mask was active."""

    deferred: int
    assigned_timestamp: int


class LineMonitor:
    def __init__(self, task: Task, fault_policy: FaultPolicy = FaultPolicy.PERMANENT):
        self.line = task.line
        self.task_id = task.id
        self.n = task.envelope_n
        self.window = task.envelope_w
        self.period = task.period
        self.fault_policy = fault_policy
        self.ring: List[int] = []
        self.state = LineState.IN_ENVELOPE
        self.last_internalize: Optional[int] = None
        self.mask_snapshot: Optional[Snapshot] = None
        self.window_timer: Optional[int] = None
        self._ooe_active = False
        self._ooe_decay_at: Optional[float] = None
        self._bh_active = False
        self._bh_timestamp: Optional[int] = None
        self._bh_snapshot: Optional[Snapshot] = None

    # episode bookkeeping

    def ooe_active(self, t: int) -> bool:
        """Is the out-of-envelope episode live at time t?"""
        if not self._ooe_active:
            return False
        return self._ooe_decay_at is None or t < self._ooe_decay_at

    def decay_due(self) -> Optional[int]:
        if self._ooe_active and self._ooe_decay_at is not None \
                and math.isfinite(self._ooe_decay_at):
            return int(self._ooe_decay_at)
        return None

    def decay(self, t: int) -> bool:
        """Retire the episode once the violating pair has aged out.
        Returns True when the episode ended at this call."""
        if self._ooe_active and self._ooe_decay_at is not None \
                and t >= self._ooe_decay_at:
            self._ooe_active = False
            self._ooe_decay_at = None
            if self.state is LineState.OUT_OF_ENVELOPE:
                self.state = LineState.IN_ENVELOPE
            return True
        return False

    @property
    def bottom_half_masked(self) -> bool:
        return self._bh_active

    def classify(self) -> LineState:
        return self.state

    # core protocol

    def _prune(self, t: int) -> None:
        self.ring = [ts for ts in self.ring if ts > t - self.window]

    def record_internalization(self, vic: VicState, t: int) -> MonitorEffect:
        """Record one internalized occurrence with timestamp t.

        t may lie in the past relative to the wall clock when occurrences
        deferred by a mask are backfilled. Must not be called while the
        window defense or a declared fault holds the line masked.
        """
        if self.state in (LineState.WINDOW_MASKED, LineState.FAULTY):
            raise MonitorError(
                f"line {self.line}: internalization while window-masked"
            )
        eff = MonitorEffect()
        self.decay(t)
        self._prune(t)
        prev = self.last_internalize
        if prev is not None:
            gap = t - prev
            if gap < self.period:
                if not self._ooe_active:
                    eff.entered_ooe = True
                    eff.alarms.append(
                        Alarm(t, self.line, AlarmKind.OUT_OF_ENVELOPE_ENTERED)
                    )
                self._ooe_active = True
                self._ooe_decay_at = prev + max(self.period, self.window)
            else:
                if self._ooe_active:
                    eff.exited_ooe = True
                self._ooe_active = False
                self._ooe_decay_at = None
        self.last_internalize = t
        insort(self.ring, t)
        self.state = (
            LineState.OUT_OF_ENVELOPE if self.ooe_active(t)
            else LineState.IN_ENVELOPE
        )
        if len(self.ring) >= self.n:
            vic.set_line_mask(self.line, True)
            self.state = LineState.WINDOW_MASKED
            self.mask_snapshot = vic.snapshot_counter(self.line, t)
            self.window_timer = self.ring[0] + self.window
            self._bh_active = False
            self._bh_timestamp = None
            self._bh_snapshot = None
            eff.masked = True
            eff.window_timer = self.window_timer
            eff.alarms.append(
                Alarm(t, self.line, AlarmKind.WINDOW_BOUND_REACHED)
            )
        return eff

    def handle_window_timer(self, vic: VicState, t: int) -> TimerEffect:
        """Decide fault or unmask when the sliding window closes.

        Accepts t at or after the armed expiry so windows anchored at
        backfilled timestamps can close late but deterministically.
        """
        if self.window_timer is None or t < self.window_timer:
            raise MonitorError(
                f"line {self.line}: window timer not due at t={t}"
            )
        if self.state not in (LineState.WINDOW_MASKED, LineState.FAULTY):
            raise MonitorError(
                f"line {self.line}: window timer fired while unmasked"
            )
        eff = TimerEffect()
        self._prune(t)
        delta = vic.delta_since(self.mask_snapshot)
        if self.state is LineState.WINDOW_MASKED:
            if delta == 0:
                self._unmask(vic, t)
                eff.unmasked = True
            else:
                eff.fault_declared = True
                eff.alarms.append(Alarm(t, self.line, AlarmKind.SENSOR_FAULT))
                self.state = LineState.FAULTY
                if self.fault_policy is FaultPolicy.AUTO_RESUME:
                    self.mask_snapshot = vic.snapshot_counter(self.line, t)
                    self.window_timer = t + self.window
                    eff.rearm_at = self.window_timer
                else:
                    self.window_timer = None
        elif self.state is LineState.FAULTY:
            # auto-resume probe: a full window must stay below the bound
            if delta < self.n:
                self._unmask(vic, t)
                eff.resumed = True
                eff.alarms.append(
                    Alarm(t, self.line, AlarmKind.SENSOR_RESUMED)
                )
            else:
                self.mask_snapshot = vic.snapshot_counter(self.line, t)
                self.window_timer = t + self.window
                eff.rearm_at = self.window_timer
        return eff

    def _unmask(self, vic: VicState, t: int) -> None:
        vic.set_line_mask(self.line, False)
        self.window_timer = None
        self.mask_snapshot = None
        self.decay(t)
        self.state = (
            LineState.OUT_OF_ENVELOPE if self.ooe_active(t)
            else LineState.IN_ENVELOPE
        )

    # bottom-half masking mode

    def apply_bottom_half_mask(self, vic: VicState, t: int) -> bool:
        """Mask the line until its deferred handler finishes. No-op when
        the window defense already owns the mask."""
        if self.state in (LineState.WINDOW_MASKED, LineState.FAULTY):
            return False
        if self._bh_active:
            return False
        vic.set_line_mask(self.line, True, latch=True)
        self._bh_active = True
        self._bh_timestamp = t
        self._bh_snapshot = vic.snapshot_counter(self.line, t)
        return True

    def release_bottom_half_mask(self, vic: VicState,
                                 t_unmask: int) -> BottomHalfRelease:
        """Lift the bottom-half mask and report what queued up meanwhile.

        The caller backfills the deferred occurrences one by one through
        record_internalization, stopping early if the window defense
        engages; leftovers stay counter-only.
        """
        if not self._bh_active:
            raise MonitorError(
                f"line {self.line}: bottom-half release without a mask"
            )
        deferred = vic.delta_since(self._bh_snapshot)
        assigned = self._bh_timestamp
        self._bh_active = False
        self._bh_timestamp = None
        self._bh_snapshot = None
        vic.set_line_mask(self.line, False)
        vic.clear_pending(self.line)
        self.state = (
            LineState.OUT_OF_ENVELOPE if self.ooe_active(t_unmask)
            else LineState.IN_ENVELOPE
        )
        return BottomHalfRelease(deferred=deferred, assigned_timestamp=assigned)


@dataclass(frozen=True)
class LineView:
    line: str
    importance: int
    next_job_priority: int


@dataclass(frozen=True)
class SchedulerView:
    """What the IPL rule needs to know: the running job's priority and,
    per line, the priority the line's next released job would get."""

    running_priority: Optional[int]
    lines: tuple


def compute_ipl(view: SchedulerView) -> int:
    """Interrupt priority level that suppresses lines whose next job
    would not preempt the running job.

    Device lines carry irq priority importance + 1, so a level L
    suppresses exactly the lines with importance below L. The level is
    set to the importance of the least important task that would still
    preempt, keeping that task's line enabled and silencing everything
    strictly less important. The rule is deliberately imperfect: a
    non-preempting line at or above the bound stays enabled, and
    over-suppressed lines are corrected at the next schedule point via
    their counters.
    """
    if view.running_priority is None or not view.lines:
        return 0
    preempting = [
        lv for lv in view.lines
        if lv.next_job_priority > view.running_priority
    ]
    if not preempting:
        return max(lv.importance for lv in view.lines) + 1
    return min(lv.importance for lv in preempting)
