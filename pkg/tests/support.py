"""Shared oracles and generators for the test suite.

The window oracle and the conservation counts are deliberately naive,
independent re-implementations; tests compare the engine against them.
"""

import random

from envelopesim import (
    Burst,
    Explicit,
    FaultPolicy,
    Periodic,
    Policy,
    Scenario,
    Sporadic,
    Storm,
    Task,
    TaskSet,
)


def window_violations(timestamps, n, w):
    """Brute-force sliding-window check: for every event time t, count
    events in (t - w, t]. Returns the violating (t, count) pairs."""
    out = []
    for t in timestamps:
        count = sum(1 for s in timestamps if t - w < s <= t)
        if count > n:
            out.append((t, count))
    return out


def internalize_timestamps(trace, line):
    """Assigned timestamps of every INTERNALIZE record on a line."""
    out = []
    for rec in trace.of_kind("INTERNALIZE", line=line):
        ts_field = rec.detail.split(";")[0]
        assert ts_field.startswith("ts=")
        out.append(int(ts_field[3:]))
    return out


def conservation_counts(trace, line):
    """(raised, internalized, counter_only) for one line, from the trace."""
    raised = len(trace.of_kind("RAISE", line=line))
    internalized = trace.of_kind("INTERNALIZE", line=line)
    suppressed = len(trace.of_kind("SUPPRESS", line=line))
    deferred = sum(1 for r in internalized if ";deferred" in r.detail)
    return raised, len(internalized), suppressed - deferred


def random_scenario(seed):
    """A small random but valid scenario. Varied on purpose: every policy
    knob, every workload kind, and task counts from 1 to 4."""
    rng = random.Random(seed)
    n_tasks = rng.randint(1, 4)
    horizon = rng.randint(20, 200)
    importances = rng.sample(range(0, 50), n_tasks)
    priorities = rng.sample(range(1, 50), n_tasks)
    tasks = []
    workload = []
    for i in range(n_tasks):
        period = rng.randint(3, 40)
        wcet = rng.randint(1, max(1, period // 3))
        task_id = f"t{i}"
        line = f"l{i}"
        tasks.append(
            Task(
                id=task_id,
                wcet=wcet,
                period=period,
                importance=importances[i],
                line=line,
                envelope_n=rng.randint(1, 4),
                envelope_w=rng.randint(2, 30),
                priority=priorities[i],
            )
        )
        kind = rng.randrange(5)
        if kind == 0:
            workload.append((line, Periodic(rng.randint(0, 5), period)))
        elif kind == 1:
            workload.append(
                (line, Sporadic(rng.randint(1, period), rng.uniform(0.05, 0.6),
                                rng.randint(0, 999)))
            )
        elif kind == 2:
            workload.append(
                (line, Burst(rng.randint(0, horizon - 1), rng.randint(1, 6),
                             rng.randint(0, 3)))
            )
        elif kind == 3:
            workload.append(
                (line, Storm(rng.randint(0, horizon - 1), rng.randint(1, 2)))
            )
        else:
            count = rng.randint(0, 8)
            times = sorted(rng.sample(range(horizon), min(count, horizon)))
            workload.append((line, Explicit(tuple(times))))
    policy = Policy(
        assignment=rng.choice(["importance_monotonic", "explicit"]),
        fault_policy=rng.choice([FaultPolicy.PERMANENT, FaultPolicy.AUTO_RESUME]),
        ipl_optimization=rng.random() < 0.5,
        mask_until_bottom_half=rng.random() < 0.5,
        delta_th=rng.randrange(3),
    )
    return Scenario(
        task_set=TaskSet(tasks),
        policy=policy,
        workload=workload,
        horizon=horizon,
        seed=seed,
    )
