import pytest

from envelopesim import (
    INFINITE_PERIOD,
    Burst,
    EngineError,
    Explicit,
    FaultPolicy,
    Periodic,
    Policy,
    ResponseOption,
    Scenario,
    ScenarioError,
    Sporadic,
    Storm,
    Task,
    TaskSet,
    Trace,
    TraceRecord,
    generate_workload,
    run_scenario,
)
from conftest import scenario_monotonic, scenario_override, \
    scenario_override_burst
from support import conservation_counts, internalize_timestamps, \
    random_scenario


def one_task_scenario(task_kw=None, **scenario_kw):
    kw = dict(id="t", wcet=1, period=10, importance=3, line="l",
              envelope_n=5, envelope_w=5)
    kw.update(task_kw or {})
    return Scenario(task_set=TaskSet([Task(**kw)]), **scenario_kw)


# workload generators

def test_periodic_times():
    assert generate_workload(Periodic(0, 3), 10) == [0, 3, 6, 9]
    assert generate_workload(Periodic(2, 4), 10) == [2, 6]
    assert generate_workload(Periodic(-5, 4), 10) == [0, 4, 8]


def test_periodic_rejects_bad_period():
    with pytest.raises(ScenarioError):
        generate_workload(Periodic(0, 0), 10)


def test_burst_times():
    assert generate_workload(Burst(3, 2, 0), 10) == [3, 3]
    assert generate_workload(Burst(8, 4, 1), 10) == [8, 9]
    with pytest.raises(ScenarioError):
        generate_workload(Burst(0, -1, 0), 10)


def test_storm_times():
    assert generate_workload(Storm(1, 2), 4) == [1, 1, 2, 2, 3, 3]
    with pytest.raises(ScenarioError):
        generate_workload(Storm(0, 0), 4)


def test_explicit_times_sorted_and_clipped():
    assert generate_workload(Explicit((9, 2, -1, 30)), 10) == [2, 9]


def test_sporadic_deterministic_per_seed():
    a = generate_workload(Sporadic(2, 0.5, 42), 60, seed=1)
    b = generate_workload(Sporadic(2, 0.5, 42), 60, seed=1)
    assert a == b
    c = generate_workload(Sporadic(2, 0.5, 43), 60, seed=1)
    assert a != c


def test_sporadic_respects_min_separation():
    times = generate_workload(Sporadic(4, 0.9, 7), 100, seed=0)
    assert times
    assert all(b - a >= 4 for a, b in zip(times, times[1:]))


def test_sporadic_rejects_bad_density():
    with pytest.raises(ScenarioError):
        generate_workload(Sporadic(1, 0.0, 0), 10)
    with pytest.raises(ScenarioError):
        generate_workload(Sporadic(1, 1.5, 0), 10)


# trace plumbing

def test_trace_rejects_backwards_time():
    trace = Trace()
    trace.append(TraceRecord(5, "RAISE"))
    with pytest.raises(EngineError):
        trace.append(TraceRecord(4, "RAISE"))


def test_trace_csv_shape():
    trace, _ = run_scenario(one_task_scenario(
        workload=[("l", Explicit((0,)))], horizon=3))
    text = trace.to_csv_string()
    lines = text.split("\n")
    assert lines[0] == "time,kind,line,task,job,detail"
    assert text.endswith("\n")
    assert "\r" not in text
    assert len(lines) == len(trace) + 2  # header + records + final newline


def test_scenario_default_horizon():
    sc = one_task_scenario(task_kw=dict(period=6, envelope_w=9))
    assert sc.resolved_horizon() == 2 * 6 + 9


# validation

def test_scenario_validation_collects_problems():
    tasks = TaskSet([
        Task(id="a", wcet=1, period=5, importance=1, line="x",
             envelope_n=1, envelope_w=1),
        Task(id="b", wcet=1, period=5, importance=1, line="x",
             envelope_n=1, envelope_w=1),
    ])
    sc = Scenario(task_set=tasks, workload=[("ghost", Periodic(0, 5))],
                  horizon=0, policy=Policy(assignment="nope", delta_th=-1))
    with pytest.raises(ScenarioError) as exc:
        run_scenario(sc)
    text = str(exc.value)
    for fragment in ("duplicate importance", "line collision",
                     "unknown line 'ghost'", "horizon", "delta_th",
                     "unknown priority assignment"):
        assert fragment in text


def test_explicit_assignment_requires_priorities():
    sc = one_task_scenario(policy=Policy(assignment="explicit"),
                           workload=[], horizon=5)
    with pytest.raises(ScenarioError):
        run_scenario(sc)


# determinism

def test_reruns_are_byte_identical():
    sc = random_scenario(7)
    t1, m1 = run_scenario(sc)
    t2, m2 = run_scenario(sc)
    assert t1.to_csv_string() == t2.to_csv_string()
    assert m1.to_json_string() == m2.to_json_string()


# the two-task counterexample and its repairs

def test_monotonic_priorities_miss_under_normal_arrivals():
    trace, metrics = run_scenario(scenario_monotonic())
    misses = trace.of_kind("MISS")
    assert len(misses) == 1
    miss = misses[0]
    assert (miss.task, miss.job, miss.time) == ("tau_l", 0, 3)
    assert miss.detail == "remaining=1"
    # the high task occupied [0, 2)
    start = trace.of_kind("START", task="tau_h")[0]
    done = trace.of_kind("COMPLETE", task="tau_h")[0]
    assert (start.time, done.time, done.detail) == (0, 2, "response=2")
    assert metrics.per_task["tau_l"]["misses"] == 1


def test_override_meets_every_deadline():
    for horizon in (6, 12):
        trace, metrics = run_scenario(scenario_override(horizon))
        assert not trace.of_kind("MISS")
        assert not trace.of_kind("DROP")
        assert metrics.per_task["tau_l"]["misses"] == 0
        assert metrics.per_task["tau_h"]["misses"] == 0


def test_override_priority_pattern_repeats():
    # even jobs of tau_l carry the override and run first in their period
    trace, _ = run_scenario(scenario_override(12))
    starts = {(r.task, r.job): r.time for r in trace.of_kind("START")}
    assert starts[("tau_l", 0)] == 0
    assert starts[("tau_l", 2)] == 6
    assert starts[("tau_h", 0)] == 2
    assert starts[("tau_h", 1)] == 8


def test_burst_drop_is_sanctioned_not_missed():
    trace, metrics = run_scenario(scenario_override_burst())
    assert not trace.of_kind("MISS")
    drops = trace.of_kind("DROP")
    assert len(drops) == 1
    assert (drops[0].task, drops[0].job, drops[0].time) == ("tau_l", 1, 6)
    assert drops[0].detail == "remaining=2"
    entered = [a for a in metrics.alarms
               if a["kind"] == "out_of_envelope_entered"]
    assert len(entered) == 1
    assert entered[0]["line"] == "l_high" and entered[0]["time"] == 3
    # both jobs of the important task finish
    done = trace.of_kind("COMPLETE", task="tau_h")
    assert [(r.job, r.time) for r in done] == [(0, 4), (1, 6)]
    assert metrics.per_task["tau_h"]["completions"] == 2


# controller behavior through the engine

def test_same_tick_raises_coalesce():
    sc = one_task_scenario(workload=[("l", Burst(3, 2, 0))], horizon=8)
    trace, metrics = run_scenario(sc)
    assert len(trace.of_kind("RAISE", line="l")) == 2
    assert len(trace.of_kind("INTERNALIZE", line="l")) == 1
    sup = trace.of_kind("SUPPRESS", line="l")
    assert len(sup) == 1 and sup[0].detail == "coalesced"
    raised, internalized, counter_only = conservation_counts(trace, "l")
    assert raised == internalized + counter_only == 2
    assert metrics.per_line["l"]["raised"] == 2
    assert metrics.per_line["l"]["suppressed"] == 1


def test_in_envelope_raises_internalize_same_tick():
    sc = one_task_scenario(task_kw=dict(period=4, envelope_n=3),
                           workload=[("l", Periodic(0, 4))], horizon=20)
    trace, _ = run_scenario(sc)
    raises = trace.of_kind("RAISE", line="l")
    finished = trace.of_kind("INTERNALIZE", line="l")
    assert [r.time for r in raises] == [r.time for r in finished]
    assert internalize_timestamps(trace, "l") == [0, 4, 8, 12, 16]


def test_single_event_envelope_cycles_without_loss():
    # n=1 with W=T: the mask reopens right before each periodic arrival
    sc = one_task_scenario(task_kw=dict(period=5, envelope_n=1,
                                        envelope_w=5),
                           workload=[("l", Periodic(0, 5))], horizon=20)
    trace, metrics = run_scenario(sc)
    assert len(trace.of_kind("INTERNALIZE", line="l")) == 4
    assert not trace.of_kind("SUPPRESS", line="l")
    assert metrics.per_task["t"]["completions"] == 4
    assert not metrics.per_task["t"]["misses"]


def test_storm_declares_permanent_fault():
    sc = one_task_scenario(
        task_kw=dict(envelope_n=1, envelope_w=5, period=5),
        workload=[("l", Storm(0, 1))], horizon=10)
    trace, metrics = run_scenario(sc)
    assert len(trace.of_kind("INTERNALIZE", line="l")) == 1
    assert len(trace.of_kind("SUPPRESS", line="l")) == 9
    kinds = [a["kind"] for a in metrics.alarms]
    assert kinds == ["window_bound_reached", "sensor_fault"]
    assert [a["time"] for a in metrics.alarms] == [0, 5]
    # permanent: no further unmask after the fault
    assert not trace.of_kind("UNMASK", line="l")


def test_fault_auto_resume_through_engine():
    sc = one_task_scenario(
        task_kw=dict(envelope_n=1, envelope_w=4, period=4),
        workload=[("l", Explicit((0, 2)))], horizon=16,
        policy=Policy(fault_policy=FaultPolicy.AUTO_RESUME))
    trace, metrics = run_scenario(sc)
    kinds = [(a["time"], a["kind"]) for a in metrics.alarms]
    assert kinds == [
        (0, "window_bound_reached"),
        (4, "sensor_fault"),
        (8, "sensor_resumed"),
    ]
    unmasks = trace.of_kind("UNMASK", line="l")
    assert [r.time for r in unmasks] == [8]


def test_top_half_time_delays_completion():
    sc = one_task_scenario(task_kw=dict(wcet=2),
                           workload=[("l", Explicit((0,)))], horizon=10,
                           policy=Policy(delta_th=2))
    trace, metrics = run_scenario(sc)
    done = trace.of_kind("COMPLETE", task="t")[0]
    assert done.time == 4 and done.detail == "response=4"
    assert metrics.total_top_half_time == 2
    assert metrics.per_line["l"]["top_half_time"] == 2


def test_top_half_time_is_additive():
    sc = one_task_scenario(task_kw=dict(wcet=1),
                           workload=[("l", Explicit((0, 5)))], horizon=10,
                           policy=Policy(delta_th=1))
    trace, metrics = run_scenario(sc)
    done = trace.of_kind("COMPLETE", task="t")
    assert [(r.job, r.time) for r in done] == [(0, 2), (1, 7)]
    assert metrics.total_top_half_time == 2


def test_notify_running_notifies_live_job():
    sc = one_task_scenario(
        task_kw=dict(wcet=5, response=ResponseOption.NOTIFY_RUNNING,
                     envelope_n=3),
        workload=[("l", Explicit((0, 2)))], horizon=12)
    trace, metrics = run_scenario(sc)
    notes = trace.of_kind("NOTIFY", line="l")
    assert len(notes) == 1
    assert notes[0].time == 2 and notes[0].job == 0
    assert notes[0].detail == "ooe"  # gap 2 < period 10
    assert metrics.per_task["t"]["notifications"] == 1
    assert metrics.per_task["t"]["released"] == 1
    entered = [a for a in metrics.alarms
               if a["kind"] == "out_of_envelope_entered"]
    assert [a["time"] for a in entered] == [2]


def test_exception_only_task_every_repeat_is_ooe():
    sc = one_task_scenario(
        task_kw=dict(period=INFINITE_PERIOD, deadline=4, envelope_n=3,
                     envelope_w=5),
        workload=[("l", Explicit((0, 6)))], horizon=14)
    trace, metrics = run_scenario(sc)
    recs = trace.of_kind("INTERNALIZE", line="l")
    assert recs[0].detail == "ts=0"
    assert recs[1].detail == "ts=6;ooe"  # any gap is below an infinite period
    rel = trace.of_kind("RELEASE", line="l")
    assert [r.detail for r in rel] == ["deadline=4", "deadline=10"]
    entered = [a for a in metrics.alarms
               if a["kind"] == "out_of_envelope_entered"]
    assert [a["time"] for a in entered] == [6]


def test_ipl_suppression_and_backfill():
    # single runner: no released job would preempt it, so its own line is
    # held below the level until it completes
    sc = one_task_scenario(task_kw=dict(wcet=3, importance=5),
                           workload=[("l", Explicit((0, 1)))], horizon=12,
                           policy=Policy(ipl_optimization=True))
    trace, metrics = run_scenario(sc)
    sup = trace.of_kind("SUPPRESS", line="l")
    assert len(sup) == 1
    assert sup[0].time == 1 and sup[0].detail == "ipl"
    deferred = [r for r in trace.of_kind("INTERNALIZE", line="l")
                if ";deferred" in r.detail]
    assert len(deferred) == 1
    assert deferred[0].time == 3  # backfilled when the first job completed
    assert deferred[0].detail.startswith("ts=0;deferred")
    levels = [r.detail for r in trace.of_kind("IPL_SET")]
    assert levels[0] == "level=6"
    assert metrics.per_task["t"]["completions"] == 2
    raised, internalized, counter_only = conservation_counts(trace, "l")
    assert raised == internalized + counter_only == 2


def test_ipl_off_means_no_ipl_records():
    sc = one_task_scenario(workload=[("l", Periodic(0, 10))], horizon=20)
    trace, _ = run_scenario(sc)
    assert not trace.of_kind("IPL_SET")
    assert not [r for r in trace.of_kind("SUPPRESS") if r.detail == "ipl"]


def test_bottom_half_defers_and_backfills():
    sc = one_task_scenario(
        task_kw=dict(wcet=4, period=20, envelope_n=5, envelope_w=10),
        workload=[("l", Explicit((0, 1, 2, 3)))], horizon=30,
        policy=Policy(mask_until_bottom_half=True))
    trace, metrics = run_scenario(sc)
    # one mask per deferred handler: the opener, then one re-mask
    # covering the whole backfilled batch
    masks = trace.of_kind("MASK", line="l")
    assert [(r.time, r.detail) for r in masks] == [(0, "bottom_half"),
                                                   (4, "bottom_half")]
    unmask = trace.of_kind("UNMASK", line="l")
    assert unmask[0].time == 4 and unmask[0].detail == "bottom_half"
    deferred = [r for r in trace.of_kind("INTERNALIZE", line="l")
                if ";deferred" in r.detail]
    assert len(deferred) == 3
    assert all(r.detail.startswith("ts=0;deferred") for r in deferred)
    assert all(r.time == 4 for r in deferred)
    starts = trace.of_kind("START", task="t")
    assert [r.time for r in starts] == [0, 4, 8, 12]
    assert metrics.per_task["t"]["completions"] == 4
    raised, internalized, counter_only = conservation_counts(trace, "l")
    assert raised == internalized + counter_only == 4


def test_metrics_shape():
    _, metrics = run_scenario(scenario_override_burst())
    data = metrics.to_dict()
    assert set(data) == {"per_task", "per_line", "alarms",
                         "total_top_half_time"}
    tau_l = data["per_task"]["tau_l"]
    assert tau_l["released"] == 4
    assert tau_l["completions"] == 3
    assert tau_l["drops"] == 1
    assert tau_l["max_response"] == 2
    tau_h = data["per_task"]["tau_h"]
    assert tau_h["completions"] == 2
    assert tau_h["max_response"] == 4
    assert data["per_line"]["l_low"]["raised"] == 4
    assert data["total_top_half_time"] == 0
