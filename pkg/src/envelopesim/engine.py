"""Deterministic discrete-event simulation of the whole system.

The engine advances in integer ticks. Within one tick it processes due
timers first, then raises in interrupt priority order, internalizes
whatever the controller delivers, finalizes overdue jobs, and finally
takes a schedule point (dispatch plus, when enabled, recomputation of the
interrupt priority level). Execution of the dispatched job fills the tick
itself, with pending kernel time from interrupt top halves served first.

Identical scenarios, including seeds, produce bit-identical traces. Every
tie is broken by a fixed rule: time, then timers before raises, then
interrupt priority descending, then line id.
"""

import csv
import io
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .model import (
    Job,
    JobState,
    TIMER_LINE,
    Task,
    TaskSet,
    assign_importance_monotonic,
    explicit_priority_map,
    hyperperiod,
    validate_task_set,
)
from .monitor import (
    Alarm,
    AlarmKind,
    FaultPolicy,
    LineMonitor,
    LineState,
    LineView,
    SchedulerView,
    compute_ipl,
)
from .scheduler import Scheduler
from .vic import InterruptLine, RaiseOutcome, VicState

# Trace record kinds. These names are part of the CSV interface.
RAISE = "RAISE"
INTERNALIZE = "INTERNALIZE"
SUPPRESS = "SUPPRESS"
MASK = "MASK"
UNMASK = "UNMASK"
IPL_SET = "IPL_SET"
TIMER_SET = "TIMER_SET"
RELEASE = "RELEASE"
NOTIFY = "NOTIFY"
START = "START"
PREEMPT = "PREEMPT"
COMPLETE = "COMPLETE"
MISS = "MISS"
DROP = "DROP"
ALARM = "ALARM"

CSV_HEADER = ["time", "kind", "line", "task", "job", "detail"]


class ScenarioError(Exception):
    """Scenario rejected before simulation. Carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class EngineError(Exception):
    pass


@dataclass(frozen=True)
class Periodic:
    offset: int
    period: int


@dataclass(frozen=True)
class Sporadic:
    min_sep: int
    density: float
    seed: int


@dataclass(frozen=True)
class Burst:
    at: int
    count: int
    spacing: int


@dataclass(frozen=True)
class Storm:
    start: int
    rate: int


@dataclass(frozen=True)
class Explicit:
    times: Tuple[int, ...]


WorkloadSpec = Union[Periodic, Sporadic, Burst, Storm, Explicit]


def generate_workload(spec: WorkloadSpec, horizon: int,
                      seed: int = 0) -> List[int]:
    """Expand a workload spec into a sorted list of raise times inside
    [0, horizon). Sporadic uses its own sub-seed so distinct lines stay
    decorrelated under one scenario seed."""
    if isinstance(spec, Periodic):
        if spec.period < 1:
            raise ScenarioError([f"periodic workload: period {spec.period} < 1"])
        return list(range(max(0, spec.offset), horizon, spec.period))
    if isinstance(spec, Sporadic):
        if not (0.0 < spec.density <= 1.0):
            raise ScenarioError(
                [f"sporadic workload: density {spec.density} outside (0, 1]"]
            )
        rng = random.Random(f"{seed}:{spec.seed}")
        out = []
        t = 0
        while t < horizon:
            if rng.random() < spec.density:
                out.append(t)
                t += max(1, spec.min_sep)
            else:
                t += 1
        return out
    if isinstance(spec, Burst):
        if spec.spacing < 0 or spec.count < 0:
            raise ScenarioError(["burst workload: negative count or spacing"])
        return [
            spec.at + k * spec.spacing
            for k in range(spec.count)
            if 0 <= spec.at + k * spec.spacing < horizon
        ]
    if isinstance(spec, Storm):
        if spec.rate < 1:
            raise ScenarioError([f"storm workload: rate {spec.rate} < 1"])
        out = []
        for t in range(max(0, spec.start), horizon):
            out.extend([t] * spec.rate)
        return out
    if isinstance(spec, Explicit):
        return sorted(t for t in spec.times if 0 <= t < horizon)
    raise ScenarioError([f"unknown workload spec {spec!r}"])


@dataclass
class Policy:
    assignment: str = "importance_monotonic"  # or "explicit"
    fault_policy: FaultPolicy = FaultPolicy.PERMANENT
    ipl_optimization: bool = False
    mask_until_bottom_half: bool = False
    delta_th: int = 0


@dataclass
class Scenario:
    task_set: TaskSet
    policy: Policy = field(default_factory=Policy)
    workload: List[Tuple[str, WorkloadSpec]] = field(default_factory=list)
    horizon: Optional[int] = None
    seed: int = 0

    def resolved_horizon(self) -> int:
        if self.horizon is not None:
            return self.horizon
        max_w = max((t.envelope_w for t in self.task_set), default=0)
        return 2 * hyperperiod(self.task_set) + max_w


@dataclass
class TraceRecord:
    time: int
    kind: str
    line: str = ""
    task: str = ""
    job: Optional[int] = None
    detail: str = ""

    def csv_row(self) -> List[str]:
        return [
            str(self.time),
            self.kind,
            self.line,
            self.task,
            "" if self.job is None else str(self.job),
            self.detail,
        ]


class Trace:
    def __init__(self):
        self.records: List[TraceRecord] = []

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.time < self.records[-1].time:
            raise EngineError(
                f"trace time went backwards: {rec} after {self.records[-1]}"
            )
        self.records.append(rec)

    def of_kind(self, *kinds, line: Optional[str] = None,
                task: Optional[str] = None) -> List[TraceRecord]:
        out = []
        for r in self.records:
            if kinds and r.kind not in kinds:
                continue
            if line is not None and r.line != line:
                continue
            if task is not None and r.task != task:
                continue
            out.append(r)
        return out

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in self.records:
            writer.writerow(rec.csv_row())
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_string())

    def __len__(self):
        return len(self.records)


@dataclass
class Metrics:
    per_task: Dict[str, Dict[str, object]]
    per_line: Dict[str, Dict[str, int]]
    alarms: List[Dict[str, object]]
    total_top_half_time: int

    def to_dict(self) -> dict:
        return {
            "per_task": self.per_task,
            "per_line": self.per_line,
            "alarms": self.alarms,
            "total_top_half_time": self.total_top_half_time,
        }

    def to_json_string(self) -> str:
        import json

        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_json_string())


def _validate_scenario(scenario: Scenario) -> None:
    problems = list(validate_task_set(scenario.task_set).problems)
    lines = {t.line for t in scenario.task_set}
    for line, spec in scenario.workload:
        if line not in lines:
            problems.append(f"workload references unknown line '{line}'")
    if scenario.horizon is not None and scenario.horizon < 1:
        problems.append(f"horizon must be positive, got {scenario.horizon}")
    if scenario.policy.delta_th < 0:
        problems.append("delta_th must be >= 0")
    if scenario.policy.assignment not in ("importance_monotonic", "explicit"):
        problems.append(
            f"unknown priority assignment '{scenario.policy.assignment}'"
        )
    if problems:
        raise ScenarioError(problems)


class Engine:
    def __init__(self, scenario: Scenario):
        _validate_scenario(scenario)
        self.scenario = scenario
        self.policy = scenario.policy
        self.horizon = scenario.resolved_horizon()
        self.task_set = scenario.task_set
        self.line_task: Dict[str, Task] = {t.line: t for t in self.task_set}
        # irq = importance + 1: level 0 must mean "nothing suppressed"
        # even for an importance-0 task under the strict > comparison
        self.vic = VicState(
            InterruptLine(t.line, t.importance + 1) for t in self.task_set
        )
        self.monitors: Dict[str, LineMonitor] = {
            t.line: LineMonitor(t, scenario.policy.fault_policy)
            for t in self.task_set
        }
        if scenario.policy.assignment == "explicit":
            try:
                pmap = explicit_priority_map(self.task_set)
            except ValueError as exc:
                raise ScenarioError([str(exc)]) from None
        else:
            pmap = assign_importance_monotonic(self.task_set)
        self.pmap = pmap
        self.sched = Scheduler(self.task_set, pmap, scenario.policy.delta_th)
        self.trace = Trace()
        self.alarms: List[Alarm] = []
        self.raises: Dict[int, List[str]] = {}
        for line, spec in scenario.workload:
            for t in generate_workload(spec, self.horizon, scenario.seed):
                self.raises.setdefault(t, []).append(line)
        self.timers: Dict[int, List[Tuple[str, str]]] = {}
        self._ipl_suppressed: Dict[str, bool] = {l: False for l in self.line_task}
        self._ipl_snap: Dict[str, object] = {}
        self._bh_trigger: Dict[str, Job] = {}
        self._needs_dispatch = True
        self.line_raised = {l: 0 for l in self.line_task}
        self.line_internalized = {l: 0 for l in self.line_task}
        self.line_suppressed = {l: 0 for l in self.line_task}
        self.line_top_half = {l: 0 for l in self.line_task}

    # logging helpers

    def _log(self, time, kind, line="", task="", job=None, detail=""):
        self.trace.append(TraceRecord(time, kind, line, task, job, detail))

    def _alarm(self, time, line, kind: AlarmKind):
        alarm = Alarm(time, line, kind)
        self.alarms.append(alarm)
        self._log(time, ALARM, line, self.line_task[line].id,
                  detail=kind.value)

    # main loop

    def run(self) -> Tuple[Trace, Metrics]:
        for t in range(self.horizon + 1):
            self._process_timers(t)
            if t < self.horizon:
                self._process_raises(t)
            self._drain_deliverable(t)
            self._process_timers(t)
            self._process_shed(t)
            self._process_timers(t)
            if self._needs_dispatch:
                self._schedule_point(t)
                self._needs_dispatch = False
            if t < self.horizon:
                self._execute(t)
        return self.trace, self._metrics()

    def _execute(self, t: int) -> None:
        res = self.sched.execute_tick(t)
        if res.kind == "idle" and self.sched.active:
            raise EngineError(f"idle at t={t} with released work pending")
        if res.completed:
            job = res.job
            self._log(
                t + 1, COMPLETE, self.line_of(job), job.task_id, job.seq,
                detail=f"response={job.completion - job.release}",
            )
            self._after_finalize(job, t + 1)
            self._needs_dispatch = True

    def line_of(self, job: Job) -> str:
        return self.sched.tasks[job.task_id].line

    def _process_timers(self, t: int) -> None:
        due_times = sorted(k for k in self.timers if k <= t)
        for when in due_times:
            entries = self.timers.pop(when)
            order = sorted(
                entries, key=lambda e: (0 if e[0] == "window" else 1, e[1])
            )
            for kind, line in order:
                mon = self.monitors[line]
                if kind == "window":
                    if mon.window_timer is None or mon.window_timer > t:
                        continue  # re-armed or already handled
                    eff = mon.handle_window_timer(self.vic, t)
                    for a in eff.alarms:
                        self._alarm(t, line, a.kind)
                    if eff.unmasked or eff.resumed:
                        self._log(t, UNMASK, line, self.line_task[line].id,
                                  detail="window")
                        self._ipl_refresh_line(line, t)
                        self._needs_dispatch = True
                    if eff.rearm_at is not None:
                        self._register_timer(eff.rearm_at, "window", line, t)
                else:
                    if mon.decay(t):
                        self._needs_dispatch = True

    def _register_timer(self, due: int, kind: str, line: str,
                        now: int) -> None:
        self._log(now, TIMER_SET, line, self.line_task[line].id,
                  detail=f"{kind}_expiry={due}")
        self.timers.setdefault(max(due, now), []).append((kind, line))

    def _process_raises(self, t: int) -> None:
        lines = self.raises.get(t)
        if not lines:
            return
        order = sorted(
            lines, key=lambda l: (-self.line_task[l].importance, l)
        )
        for line in order:
            outcome = self.vic.raise_event(line, t)
            task = self.line_task[line].id
            self.line_raised[line] += 1
            self._log(t, RAISE, line, task, detail=outcome.value)
            if outcome is not RaiseOutcome.DELIVERED_NOW:
                reason = {
                    RaiseOutcome.SUPPRESSED_MASKED: "masked",
                    RaiseOutcome.SUPPRESSED_IPL: "ipl",
                    RaiseOutcome.LATCHED_PENDING: "coalesced",
                }[outcome]
                self.line_suppressed[line] += 1
                self._log(t, SUPPRESS, line, task, detail=reason)

    def _drain_deliverable(self, t: int) -> None:
        while True:
            line = self.vic.poll_deliverable()
            if line is None:
                return
            if line == TIMER_LINE:
                continue
            self._internalize(line, t, t, deferred=False)
            self._needs_dispatch = True

    def _internalize(self, line: str, now: int, ts: int, deferred: bool,
                     charge: bool = True, allow_bh: bool = True):
        """Internalize one occurrence of a line with event timestamp ts
        (equal to now except for backfilled occurrences)."""
        mon = self.monitors[line]
        task = self.line_task[line]
        eff = mon.record_internalization(self.vic, ts)
        ooe = mon.ooe_active(now)
        self.line_internalized[line] += 1
        detail = f"ts={ts}"
        if deferred:
            detail += ";deferred"
        if ooe:
            detail += ";ooe"
        if eff.exited_ooe:
            detail += ";ooe_exit"
        self._log(now, INTERNALIZE, line, task.id, detail=detail)
        for a in eff.alarms:
            self._alarm(now, line, a.kind)
        if eff.masked:
            self._log(now, MASK, line, task.id, detail="window")
            self._ipl_clear_line(line)
            self._register_timer(eff.window_timer, "window", line, now)
        decay_due = mon.decay_due()
        if decay_due is not None:
            self._register_timer(decay_due, "decay", line, now)
        reff = self.sched.on_internalize(task.id, now, ooe)
        if reff.job is not None:
            self._log(now, RELEASE, line, task.id, reff.job.seq,
                      detail=f"deadline={reff.job.abs_deadline}")
        elif reff.notified is not None:
            self._log(now, NOTIFY, line, task.id, reff.notified.seq,
                      detail="ooe" if ooe else "in_envelope")
        if charge:
            charged = self.sched.account_top_half(now)
            self.line_top_half[line] += charged
        if allow_bh and self.policy.mask_until_bottom_half:
            trigger = reff.job or reff.notified
            if trigger is not None and mon.apply_bottom_half_mask(self.vic, ts):
                self._log(now, MASK, line, task.id, detail="bottom_half")
                self._bh_trigger[line] = trigger
        return reff

    def _backfill(self, line: str, now: int, ts: int, count: int) -> int:
        """Internalize occurrences deferred by a mask, all carrying the
        masking event's timestamp. Stops early if the window defense
        engages; leftovers stay counter-only."""
        mon = self.monitors[line]
        done = 0
        last_trigger = None
        for _ in range(count):
            if mon.state in (LineState.WINDOW_MASKED, LineState.FAULTY):
                break
            reff = self._internalize(
                line, now, ts, deferred=True, charge=False, allow_bh=False
            )
            last_trigger = reff.job or reff.notified
            done += 1
        if done:
            self._needs_dispatch = True
        if (
            self.policy.mask_until_bottom_half
            and last_trigger is not None
            and mon.state not in (LineState.WINDOW_MASKED, LineState.FAULTY)
            and mon.apply_bottom_half_mask(self.vic, ts)
        ):
            self._log(now, MASK, line, self.line_task[line].id,
                      detail="bottom_half")
            self._bh_trigger[line] = last_trigger
        return done

    def _after_finalize(self, job: Job, now: int) -> None:
        line = self.line_of(job)
        if self._bh_trigger.get(line) is job:
            del self._bh_trigger[line]
            mon = self.monitors[line]
            if mon.bottom_half_masked:
                rel = mon.release_bottom_half_mask(self.vic, now)
                self._log(now, UNMASK, line, job.task_id,
                          detail="bottom_half")
                self._ipl_refresh_line(line, now)
                if rel.deferred:
                    self._backfill(line, now, rel.assigned_timestamp,
                                   rel.deferred)
                self._needs_dispatch = True

    def _process_shed(self, t: int) -> None:
        for job in self.sched.shed_check(t):
            kind = DROP if job.state is JobState.DROPPED else MISS
            self._log(t, kind, self.line_of(job), job.task_id, job.seq,
                      detail=f"remaining={job.remaining}")
            self._after_finalize(job, t)
            self._needs_dispatch = True

    # schedule points

    def _schedule_point(self, t: int) -> None:
        for _ in range(100):
            changed = False
            elevated = {
                mon.task_id for mon in self.monitors.values()
                if mon.ooe_active(t)
            }
            self.sched.set_elevated(elevated)
            target = self.sched.pick_next(t)
            preempted, started = self.sched.dispatch(target, t)
            if preempted is not None:
                self._log(t, PREEMPT, self.line_of(preempted),
                          preempted.task_id, preempted.seq,
                          detail=f"remaining={preempted.remaining}")
                changed = True
            if started:
                self._log(t, START, self.line_of(target), target.task_id,
                          target.seq, detail=f"remaining={target.remaining}")
                changed = True
            if not self.policy.ipl_optimization:
                return
            recon = self._apply_ipl(t)
            if recon:
                self._process_timers(t)
            if not recon and not changed:
                return
        raise EngineError(f"schedule point at t={t} did not stabilize")

    def _apply_ipl(self, t: int) -> bool:
        view = SchedulerView(
            running_priority=(
                None if self.sched.running is None
                else self.pmap.priority(
                    self.sched.running.task_id, self.sched.running.seq
                )
            ),
            lines=tuple(
                LineView(
                    line=line,
                    importance=task.importance,
                    next_job_priority=self.pmap.priority(
                        task.id, self.sched.seq[task.id]
                    ),
                )
                for line, task in sorted(self.line_task.items())
            ),
        )
        level = compute_ipl(view)
        if level != self.vic.ipl:
            self.vic.set_ipl(level)
            self._log(t, IPL_SET, detail=f"level={level}")
        recon = False
        order = sorted(
            self.line_task,
            key=lambda l: (-self.line_task[l].importance, l),
        )
        for line in order:
            ln = self.vic.lines[line]
            if ln.masked:
                self._ipl_clear_line(line)
                continue
            now_sup = ln.irq_priority <= self.vic.ipl
            was = self._ipl_suppressed[line]
            if now_sup and not was:
                self._ipl_suppressed[line] = True
                self._ipl_snap[line] = self.vic.snapshot_counter(line, t)
            elif not now_sup and was:
                self._ipl_suppressed[line] = False
                snap = self._ipl_snap.pop(line)
                delta = self.vic.delta_since(snap)
                if delta > 0 and self._backfill(line, t, snap.time, delta):
                    recon = True
        return recon

    def _ipl_refresh_line(self, line: str, t: int) -> None:
        """Restart IPL bookkeeping for a line that just got unmasked."""
        if not self.policy.ipl_optimization:
            return
        ln = self.vic.lines[line]
        if ln.masked:
            return
        if ln.irq_priority <= self.vic.ipl and not self._ipl_suppressed[line]:
            self._ipl_suppressed[line] = True
            self._ipl_snap[line] = self.vic.snapshot_counter(line, t)

    def _ipl_clear_line(self, line: str) -> None:
        self._ipl_suppressed[line] = False
        self._ipl_snap.pop(line, None)

    # metrics

    def _metrics(self) -> Metrics:
        per_task = {}
        for task in self.task_set:
            jobs = [j for j in self.sched.jobs if j.task_id == task.id]
            responses = [
                j.completion - j.release for j in jobs
                if j.state is JobState.COMPLETED
            ]
            per_task[task.id] = {
                "released": len(jobs),
                "completions": sum(
                    1 for j in jobs if j.state is JobState.COMPLETED
                ),
                "misses": sum(
                    1 for j in jobs if j.state is JobState.MISSED
                ),
                "drops": sum(
                    1 for j in jobs if j.state is JobState.DROPPED
                ),
                "notifications": sum(j.notifications for j in jobs),
                "max_response": max(responses) if responses else None,
                "avg_response": (
                    sum(responses) / len(responses) if responses else None
                ),
            }
        per_line = {}
        for line in sorted(self.line_task):
            per_line[line] = {
                "raised": self.line_raised[line],
                "internalized": self.line_internalized[line],
                "suppressed": self.line_suppressed[line],
                "top_half_time": self.line_top_half[line],
                "mask_ops": self.vic.mask_ops[line],
            }
        alarms = [
            {"time": a.time, "line": a.line, "kind": a.kind.value}
            for a in self.alarms
        ]
        return Metrics(
            per_task=per_task,
            per_line=per_line,
            alarms=alarms,
            total_top_half_time=self.sched.total_top_half,
        )


def run_scenario(scenario: Scenario) -> Tuple[Trace, Metrics]:
    """Validate and simulate a scenario. Pure: equal inputs give
    byte-identical traces."""
    return Engine(scenario).run()
