"""Deterministic simulation of event-triggered real-time systems with
arrival envelopes, out-of-envelope defense, and importance-aware
scheduling."""

from .engine import (
    Burst,
    Engine,
    EngineError,
    Explicit,
    Metrics,
    Periodic,
    Policy,
    Scenario,
    ScenarioError,
    Sporadic,
    Storm,
    Trace,
    TraceRecord,
    generate_workload,
    run_scenario,
)
from .feasibility import (
    BoundsExceeded,
    EnumerationBounds,
    FeasibilityError,
    NormalCheckResult,
    OoeCheckResult,
    admissible_patterns,
    check_normal,
    check_ooe_feasible,
)
from .model import (
    INFINITE_PERIOD,
    TIMER_LINE,
    Job,
    JobState,
    PriorityMap,
    ResponseOption,
    Task,
    TaskSet,
    assign_importance_monotonic,
    explicit_priority_map,
    hyperperiod,
    utilization,
    validate_task_set,
)
from .monitor import (
    Alarm,
    AlarmKind,
    FaultPolicy,
    LineMonitor,
    LineState,
    LineView,
    MonitorError,
    SchedulerView,
    compute_ipl,
)
from .scheduler import Scheduler
from .vic import InterruptLine, RaiseOutcome, VicError, VicState

__version__ = "0.1.0"

__all__ = [
    "Alarm",
    "AlarmKind",
    "BoundsExceeded",
    "Burst",
    "Engine",
    "EngineError",
    "EnumerationBounds",
    "Explicit",
    "FaultPolicy",
    "FeasibilityError",
    "INFINITE_PERIOD",
    "InterruptLine",
    "Job",
    "JobState",
    "LineMonitor",
    "LineState",
    "LineView",
    "Metrics",
    "MonitorError",
    "NormalCheckResult",
    "OoeCheckResult",
    "Periodic",
    "Policy",
    "PriorityMap",
    "RaiseOutcome",
    "ResponseOption",
    "Scenario",
    "ScenarioError",
    "Scheduler",
    "SchedulerView",
    "Sporadic",
    "Storm",
    "TIMER_LINE",
    "Task",
    "TaskSet",
    "Trace",
    "TraceRecord",
    "VicError",
    "VicState",
    "admissible_patterns",
    "assign_importance_monotonic",
    "check_normal",
    "check_ooe_feasible",
    "compute_ipl",
    "explicit_priority_map",
    "generate_workload",
    "hyperperiod",
    "run_scenario",
    "utilization",
    "validate_task_set",
]
