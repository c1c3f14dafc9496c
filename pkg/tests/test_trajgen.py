import csv
import math

import numpy as np
import pytest

from edgeswitch import kernels
from edgeswitch.trajgen import (
    NO_TREMOR,
    TaskKind,
    TaskSpec,
    TremorModel,
    emit_packets,
    offered_rate_kbps,
    quantized_trajectory,
    sample_trajectory,
    trajectory,
    write_trajectory_csv,
)
from edgeswitch.wire import FRAME_LEN, decode_frame


def test_defaults_per_kind():
    assert [TaskSpec(k).duration_s for k in ("spiral", "line", "hold")] == [15.0, 5.0, 10.0]
    assert TaskSpec("spiral").path_length_mm == 600.0
    assert TaskSpec("spiral").n_samples == 15000


def test_hold_without_tremor():
    spec = TaskSpec(TaskKind.HOLD, start=(10, 20, 30))
    for k in (0, 1, 5000, 9999):
        assert sample_trajectory(spec, NO_TREMOR, k) == (10, 20, 30)


def test_line_midpoint():
    spec = TaskSpec(TaskKind.LINE, path_length_mm=125.0, duration_s=5.0)
    assert sample_trajectory(spec, NO_TREMOR, 2500) == pytest.approx((62.5, 0, 0))


def test_sample_index_range():
    spec = TaskSpec(TaskKind.HOLD)
    with pytest.raises(IndexError):
        sample_trajectory(spec, NO_TREMOR, spec.n_samples)


def test_spiral_arc_length():
    spec = TaskSpec(TaskKind.SPIRAL)
    pts = trajectory(spec, NO_TREMOR)
    # trapezoid rule on |dp/dk| reduces to the polyline length for unit steps
    length = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    assert abs(length - 600.0) / 600.0 < 0.01


def test_spiral_constant_speed():
    spec = TaskSpec(TaskKind.SPIRAL)
    steps = np.linalg.norm(np.diff(trajectory(spec, NO_TREMOR), axis=0), axis=1)
    assert steps.max() - steps.min() < 1e-4


def test_scalar_and_vector_agree():
    spec, tremor = TaskSpec(TaskKind.SPIRAL), TremorModel(seed=4)
    pts = trajectory(spec, tremor)
    for k in (0, 1, 777, 14999):
        assert sample_trajectory(spec, tremor, k) == pytest.approx(tuple(pts[k]), abs=1e-9)


def test_tremor_model_band_and_seed():
    t = TremorModel(seed=5)
    assert all(8.0 <= f <= 9.0 for f in t.frequencies)
    assert all(0.0 <= p < 2 * math.pi for p in t.phases)
    assert TremorModel(seed=5).frequencies == t.frequencies
    assert TremorModel(seed=6).frequencies != t.frequencies
    offs = t.offsets(np.arange(10000) / 1000.0)
    assert np.abs(offs).max() <= 0.1 + 1e-12
    with pytest.raises(ValueError):
        TremorModel(amplitude_um=-1)


def test_emit_hold_count_and_sids():
    frames = list(emit_packets(TaskSpec(TaskKind.HOLD), TremorModel(), tid=2))
    assert len(frames) == 10000
    assert all(len(f) == FRAME_LEN for f in frames)
    sids = [decode_frame(f)[0].sid for f in frames]
    assert sids == list(range(10000))


def test_offered_rate():
    rate = offered_rate_kbps(TaskSpec(TaskKind.SPIRAL))
    assert rate == 1040.0
    assert abs(rate - 1015) / 1015 < 0.05


def test_emit_deterministic():
    spec = TaskSpec(TaskKind.LINE)
    a = b"".join(emit_packets(spec, TremorModel(seed=9), tid=2))
    b = b"".join(emit_packets(spec, TremorModel(seed=9), tid=2))
    assert a == b


@pytest.mark.parametrize("kind", list(TaskKind))
def test_defaults_never_saturate(kind):
    q = quantized_trajectory(TaskSpec(kind), TremorModel())
    assert np.abs(q).max() < 32767


@pytest.mark.parametrize("seed", range(20))
def test_hold_forwards_only_initial_above_l1_bound(seed):
    # per-axis excursion from the stored sample is at most 2A, plus half a
    # quantization unit at each end
    tremor = TremorModel(amplitude_um=100.0, seed=seed)
    q = quantized_trajectory(TaskSpec(TaskKind.HOLD), tremor)
    decisions, _ = kernels.deadband_run(q, 3 * (2 * 10 + 1))
    assert decisions.sum() == 1


def test_trajectory_csv(tmp_path):
    spec = TaskSpec(TaskKind.LINE, duration_s=0.01)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, spec, NO_TREMOR)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["k", "t_ms", "x_mm", "y_mm", "z_mm"]
    assert len(rows) == 11
    assert rows[5][:3] == ["4", "4.000", "50.000000"]
