import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from envelopesim import (
    Explicit,
    Periodic,
    Policy,
    Scenario,
    Task,
    TaskSet,
)


def two_task_set(override=False):
    """The two-task counterexample set: a frequent low-importance task
    and a slower high-importance one. With importance-monotonic
    priorities the low task misses even under normal arrivals; a
    first-job priority override fixes that."""
    tau_l = Task(
        id="tau_l", wcet=2, period=3, importance=1, line="l_low",
        envelope_n=1, envelope_w=3, priority=1,
        job_priority_overrides={0: 10} if override else {},
    )
    tau_h = Task(
        id="tau_h", wcet=2, period=6, importance=2, line="l_high",
        envelope_n=2, envelope_w=6, priority=2,
    )
    return TaskSet([tau_l, tau_h])


def scenario_monotonic(horizon=6):
    return Scenario(
        task_set=two_task_set(),
        policy=Policy(assignment="importance_monotonic"),
        workload=[("l_low", Periodic(0, 3)), ("l_high", Periodic(0, 6))],
        horizon=horizon,
    )


def scenario_override(horizon=6):
    return Scenario(
        task_set=two_task_set(override=True),
        policy=Policy(assignment="explicit"),
        workload=[("l_low", Periodic(0, 3)), ("l_high", Periodic(0, 6))],
        horizon=horizon,
    )


def scenario_override_burst(horizon=12):
    """High task raised at t=0 and t=3: the second arrival is out of
    envelope, the elevated band keeps both jobs alive, the low task's
    second job is the sanctioned sacrifice."""
    return Scenario(
        task_set=two_task_set(override=True),
        policy=Policy(assignment="explicit"),
        workload=[("l_low", Periodic(0, 3)), ("l_high", Explicit((0, 3)))],
        horizon=horizon,
    )


@pytest.fixture
def monotonic_scenario():
    return scenario_monotonic()


@pytest.fixture
def override_scenario():
    return scenario_override()


@pytest.fixture
def override_burst_scenario():
    return scenario_override_burst()
