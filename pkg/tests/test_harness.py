import pytest

from edgeswitch.geometry import Verdict, build_correction_table
from edgeswitch.harness import (
    METRICS_HEADER,
    SchedulerError,
    Simulator,
    TopologyConfig,
    contact_pattern,
    drawing_length,
    metrics_csv,
    run_experiment,
    run_grip_scenario,
    tool_from_pattern,
)
from edgeswitch.trajgen import NO_TREMOR, TaskKind, TaskSpec, TremorModel

from conftest import TABLE_II_FSR

MIDDLE = tuple(700 if i % 3 == 1 else 5 for i in range(15))


def test_scheduler_ties_in_insertion_order():
    sim, seen = Simulator(), []
    sim.at(5, seen.append, "a")
    sim.at(5, seen.append, "b")
    sim.at(3, seen.append, "c")
    sim.run()
    assert seen == ["c", "a", "b"]
    assert sim.now == 5


def test_scheduler_empty_and_past():
    sim = Simulator()
    assert not sim.step()
    sim.at(10, lambda: None)
    sim.run()
    with pytest.raises(SchedulerError):
        sim.at(3, lambda: None)


def short(kind, **kw):
    return TaskSpec(kind, duration_s=0.5, **kw)


def test_conservation_and_rate():
    r = run_experiment(short(TaskKind.SPIRAL, path_length_mm=20.0), TremorModel(), 0.1)
    m = r.metrics
    assert m.transmitted + m.discarded == m.offered == 500
    assert 0 <= m.traffic_reduction <= 100
    assert m.avg_rate_kbps == pytest.approx(m.transmitted * 130 * 8 / 0.5 / 1000)


def test_unfiltered_passes_everything():
    m = run_experiment(short(TaskKind.LINE), TremorModel(), None).metrics
    assert (m.transmitted, m.discarded, m.traffic_reduction) == (500, 0, 0.0)
    assert m.avg_rate_kbps == pytest.approx(1040.0)


def test_received_sequence_matches_filter_reference():
    spec = short(TaskKind.SPIRAL, path_length_mm=20.0)
    r = run_experiment(spec, TremorModel(seed=2), 0.1)
    from edgeswitch._pykernels import deadband_run
    from edgeswitch.trajgen import quantized_trajectory
    q = quantized_trajectory(spec, TremorModel(seed=2))
    decisions, _ = deadband_run(q, 10)
    assert [m.sid for _, m, _ in r.received] == [i for i, d in enumerate(decisions) if d]


def test_drawing_length():
    assert drawing_length([(0, 0, 0), (300, 400, 0)]) == pytest.approx(5.0)
    assert drawing_length([(1, 2, 3)]) == 0.0


def test_latency_and_telemetry_plausible():
    cfg = TopologyConfig(link_delay_ns=2000, residence_ns=50)
    r = run_experiment(short(TaskKind.HOLD), NO_TREMOR, None, cfg)
    t_rx, meta, tel = r.received[0]
    assert t_rx == 3 * 2000 + 2 * 50
    assert tel.residence_ns == 50 and tel.egress_port == 1


def test_event_log_deterministic():
    spec = short(TaskKind.SPIRAL, path_length_mm=20.0)
    a = run_experiment(spec, TremorModel(seed=1), 0.1)
    b = run_experiment(spec, TremorModel(seed=1), 0.1)
    assert a.event_log.text() == b.event_log.text()
    assert metrics_csv([a.metrics]) == metrics_csv([b.metrics])
    first = a.event_log.lines[0].split()
    assert first[:4] == ["0", "Host1", "send", "0"]


def test_metrics_csv_header():
    m = run_experiment(short(TaskKind.HOLD), TremorModel(), None).metrics
    lines = metrics_csv([m]).splitlines()
    assert lines[0] == ",".join(METRICS_HEADER)
    assert lines[1].startswith("hold,none,500,0,1040.000,0.000,")


def test_grip_table_ii():
    g = run_grip_scenario(TABLE_II_FSR)
    assert g.clones == 1
    assert g.verdicts == ["forward", "correct_grip"]
    assert g.final_key == (1, 13)
    assert g.roundtrips_ns == [2 * 1000 + 100]


def test_grip_roundtrip_follows_config():
    g = run_grip_scenario(TABLE_II_FSR, topology=TopologyConfig(link_delay_ns=5000, residence_ns=340))
    assert g.roundtrips_ns == [2 * 5000 + 340]


def test_grip_already_correct():
    g = run_grip_scenario(MIDDLE)
    assert g.clones == 0
    assert g.verdicts == ["correct_grip"]


def test_grip_no_tool():
    g = run_grip_scenario((800,) * 15)
    assert g.clones == 0
    assert g.verdicts == ["no_tool"]


def test_contact_model_reproduces_pair():
    table = build_correction_table()
    grid = table.grid
    tool = tool_from_pattern(TABLE_II_FSR, grid)
    assert contact_pattern(tool, grid)[9] > 500 and contact_pattern(tool, grid)[13] > 500
    assert tool_from_pattern((800,) * 15, grid) is None
    with pytest.raises(ValueError):
        tool_from_pattern((0,) * 15, grid)


def test_grip_closure_every_correction_key():
    table = build_correction_table()
    for (se, es), e in table.entries.items():
        if e.verdict is not Verdict.CORRECTION:
            continue
        fsr = tuple(720 if i in (se, es) else 5 for i in range(15))
        g = run_grip_scenario(fsr, table)
        assert (g.clones, g.verdicts[-1]) == (1, "correct_grip"), (se, es)
