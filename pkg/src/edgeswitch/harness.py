"""Deterministic virtual testbed.

Topology (one chain, every link full duplex with the same fixed delay)::

    Host1:0 <-> 0:EdgeSwitch1:1 <-> 0:EdgeSwitch2:1 <-> 0:Host2

EdgeSwitch1 runs tremor suppression on operator traffic entering port 0.
EdgeSwitch2 runs grip inspection on feedback entering port 1 and passes the
control stream through. Time is a virtual nanosecond counter; all events go
through one priority queue ordered by (time, insertion order).
"""
from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dataplane import (
    TID_CORRECT_GRIP,
    TID_CORRECTION,
    TID_NO_TOOL,
    TID_POSE_CORRECT,
    TID_TREMOR,
    EdgeSwitch,
    PoseCorrect,
    TremorSuppress,
    edge_sensors,
)
from .geometry import CorrectionTable, GridConfig, build_correction_table, cell_position
from .trajgen import TaskSpec, TremorModel, emit_packets
from .wire import (
    FRAME_LEN,
    NUM_FSR,
    SID_OFFSET,
    Addressing,
    CoordinateMetadata,
    TelemetryRecord,
    decode_frame,
    dequantize_position,
    encode_frame,
    quantize_position,
)

METRICS_HEADER = ["task", "threshold_mm", "transmitted", "discarded",
                  "avg_rate_kbps", "reduction_pct", "drawing_length_mm"]

HOST1, SWITCH1, SWITCH2, HOST2 = "Host1", "EdgeSwitch1", "EdgeSwitch2", "Host2"

TID_NAMES = {TID_CORRECTION: "correction", TID_CORRECT_GRIP: "correct_grip",
             TID_NO_TOOL: "no_tool"}


class SchedulerError(RuntimeError):
    pass


class TopologyError(ValueError):
    pass


class Simulator:
    """Single global event queue on a virtual nanosecond clock."""

    def __init__(self):
        self.now = 0
        self._queue: list = []
        self._seq = 0

    def at(self, t_ns: int, fn, *args) -> None:
        if t_ns < self.now:
            raise SchedulerError(f"event at {t_ns} ns scheduled in the past (now {self.now} ns)")
        heapq.heappush(self._queue, (t_ns, self._seq, fn, args))
        self._seq += 1

    def after(self, delay_ns: int, fn, *args) -> None:
        self.at(self.now + delay_ns, fn, *args)

    def step(self) -> bool:
        if not self._queue:
            return False
        t, _, fn, args = heapq.heappop(self._queue)
        self.now = t
        fn(*args)
        return True

    def run(self) -> None:
        while self.step():
            pass


@dataclass
class EventLog:
    lines: list = field(default_factory=list)

    def add(self, t_ns: int, node: str, event: str, sid: int, detail: str = "-") -> None:
        self.lines.append(f"{t_ns} {node} {event} {sid} {detail}")

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


@dataclass(frozen=True)
class TopologyConfig:
    link_delay_ns: int = 1000
    residence_ns: int = 100
    host_addressing: Addressing = field(default_factory=Addressing)


class Testbed:
    """Nodes, links and the event loop for one experiment."""

    def __init__(self, config: TopologyConfig | None = None):
        self.config = TopologyConfig() if config is None else config
        self.sim = Simulator()
        self.log = EventLog()
        self.switches = {
            SWITCH1: EdgeSwitch(SWITCH1, {0: 1, 1: 0}, self.config.residence_ns),
            SWITCH2: EdgeSwitch(SWITCH2, {0: 1, 1: 0}, self.config.residence_ns),
        }
        self.links: dict = {}
        self._connect((HOST1, 0), (SWITCH1, 0))
        self._connect((SWITCH1, 1), (SWITCH2, 0))
        self._connect((SWITCH2, 1), (HOST2, 0))
        self.hosts: dict = {}

    def _connect(self, a, b) -> None:
        self.links[a] = b
        self.links[b] = a

    def attach(self, name: str, host) -> None:
        if name not in (HOST1, HOST2):
            raise TopologyError(f"unknown host {name}")
        self.hosts[name] = host

    def send(self, node: str, port: int, frame: bytes) -> None:
        """Put a frame on the link leaving ``node:port`` now."""
        try:
            peer, peer_port = self.links[(node, port)]
        except KeyError:
            raise TopologyError(f"no link from {node}:{port}") from None
        self.sim.after(self.config.link_delay_ns, self._arrive, peer, peer_port, frame)

    def _arrive(self, node: str, port: int, frame: bytes) -> None:
        now = self.sim.now
        if node in self.switches:
            sw = self.switches[node]
            out, stamped = sw.process(frame, port, now)
            sid = int.from_bytes(frame[SID_OFFSET:SID_OFFSET + 2], "big")
            if out.dropped:
                self.log.add(now, node, "drop", sid, f"port={port}")
                return
            for fr, egress, egress_ts in stamped:
                self.log.add(now, node, out.action, sid, f"in={port} out={egress} egress_ts={egress_ts}")
                self.sim.at(egress_ts, self.send, node, egress, fr)
            return
        host = self.hosts.get(node)
        if host is None:
            raise TopologyError(f"frame delivered to unattached host {node}")
        host.receive(frame, now)


class OperatorHost:
    """Host1: replays the haptic stream at the sample rate and logs feedback."""

    def __init__(self, bed: Testbed, frames: list, period_ns: int):
        self.bed = bed
        self.frames = frames
        self.period_ns = period_ns
        self.feedback: list = []

    def start(self) -> None:
        if self.frames:
            self.bed.sim.at(0, self._send, 0)

    def _send(self, k: int) -> None:
        self.bed.log.add(self.bed.sim.now, HOST1, "send", k & 0xFFFF)
        self.bed.send(HOST1, 0, self.frames[k])
        if k + 1 < len(self.frames):
            self.bed.sim.after(self.period_ns, self._send, k + 1)

    def receive(self, frame: bytes, now: int) -> None:
        meta, _, _ = decode_frame(frame)
        self.feedback.append((now, meta))
        self.bed.log.add(now, HOST1, "rx", meta.sid, f"tid={meta.tid}")


class RecorderHost:
    """Host2 in the tremor experiments: records every control frame it receives."""

    def __init__(self, bed: Testbed):
        self.bed = bed
        self.received: list = []

    def receive(self, frame: bytes, now: int) -> None:
        meta, tel, _ = decode_frame(frame)
        self.received.append((now, meta, tel))
        self.bed.log.add(now, HOST2, "rx", meta.sid, f"x={meta.x} y={meta.y} z={meta.z}")


@dataclass
class Metrics:
    task: str
    threshold_mm: float | None
    offered: int
    transmitted: int
    discarded: int
    avg_rate_kbps: float
    traffic_reduction: float
    drawing_length_mm: float
    correction_roundtrips: int = 0
    residence_ns: dict = field(default_factory=dict)

    def csv_row(self) -> list:
        thr = "none" if self.threshold_mm is None else f"{self.threshold_mm:g}"
        return [self.task, thr, self.transmitted, self.discarded,
                f"{self.avg_rate_kbps:.3f}", f"{self.traffic_reduction:.3f}",
                f"{self.drawing_length_mm:.3f}"]


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for m in rows:
        w.writerow(m.csv_row())
    return buf.getvalue()


def drawing_length(points_units) -> float:
    """Sum of Euclidean steps between consecutive points, in mm."""
    pts = np.asarray(points_units, dtype=float).reshape(-1, 3) * dequantize_position(1)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


@dataclass
class ExperimentResult:
    metrics: Metrics
    event_log: EventLog
    received: list


def run_experiment(spec: TaskSpec, tremor: TremorModel, threshold_mm: float | None,
                   topology: TopologyConfig | None = None) -> ExperimentResult:
    """Drive one task's haptic stream through both switches to Host2."""
    bed = Testbed(topology)
    if threshold_mm is not None:
        units = quantize_position(threshold_mm)
        if units < 0:
            raise ValueError(f"threshold {threshold_mm} mm is negative")
        bed.switches[SWITCH1].bind(0, TID_TREMOR, TremorSuppress(units))

    frames = list(emit_packets(spec, tremor, TID_TREMOR, bed.config.host_addressing))
    period_ns = int(round(1e9 / spec.sample_rate_hz))
    host1 = OperatorHost(bed, frames, period_ns)
    host2 = RecorderHost(bed)
    bed.attach(HOST1, host1)
    bed.attach(HOST2, host2)
    host1.start()
    bed.sim.run()

    c1 = bed.switches[SWITCH1].counters[0]
    transmitted = len(host2.received)
    discarded = c1.dropped
    offered = len(frames)
    total = transmitted + discarded
    points = [(m.x, m.y, m.z) for _, m, _ in host2.received]
    metrics = Metrics(
        task=spec.kind.value,
        threshold_mm=threshold_mm,
        offered=offered,
        transmitted=transmitted,
        discarded=discarded,
        avg_rate_kbps=transmitted * FRAME_LEN * 8 / spec.duration_s / 1000.0,
        traffic_reduction=100.0 * discarded / total if total else 0.0,
        drawing_length_mm=drawing_length(points),
        residence_ns={name: _residence_summary(sw.residence_log)
                      for name, sw in bed.switches.items()},
    )
    return ExperimentResult(metrics, bed.log, host2.received)


def _residence_summary(samples) -> tuple[float, int]:
    if not samples:
        return 0.0, 0
    return sum(samples) / len(samples), max(samples)


# ---------------------------------------------------------------------------
# Grip scenario


@dataclass
class ToolLine:
    """A long rigid tool seen in the pad frame as a line through ``point``."""
    point: tuple[float, float]
    direction: tuple[float, float]

    def distance(self, p) -> float:
        dx, dy = p[0] - self.point[0], p[1] - self.point[1]
        ux, uy = self.direction
        return abs(dx * uy - dy * ux)


CONTACT_READING = 700
IDLE_READING = 5


def contact_pattern(tool: ToolLine | None, grid: GridConfig,
                    halfwidth: float | None = None) -> tuple[int, ...]:
    """FSR readings for a tool line: cells within ``halfwidth`` of it press hard.

    ``tool=None`` means the gripper closed on nothing, so every cell presses.
    """
    if tool is None:
        return (CONTACT_READING,) * grid.cells + (0,) * (NUM_FSR - grid.cells)
    if halfwidth is None:
        halfwidth = 0.3 * min(grid.gap_x, grid.gap_y)
    out = []
    for i in range(grid.cells):
        out.append(CONTACT_READING if tool.distance(cell_position(i, grid)) <= halfwidth
                   else IDLE_READING)
    return tuple(out) + (0,) * (NUM_FSR - grid.cells)


def tool_from_pattern(fsr, grid: GridConfig) -> ToolLine | None:
    """Line through the first and last pressed cells, or None for a full press."""
    se, es = edge_sensors(fsr[:NUM_FSR], grid.threshold)
    pressed = [v > grid.threshold for v in fsr[:grid.cells]]
    if all(pressed) and grid.full_key() is not None:
        return None
    if es <= se:
        raise ValueError("pattern has fewer than two pressed cells; no tool to model")
    p, q = cell_position(se, grid), cell_position(es, grid)
    dx, dy = q[0] - p[0], q[1] - p[1]
    n = math.hypot(dx, dy)
    return ToolLine(p, (dx / n, dy / n))


def _rotate_z(v, q):
    # rotate (x, y) by quaternion q restricted to a rotation about the z axis
    qx, qy, qz, qw = q
    n = math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
    qz, qw = qz / n, qw / n
    ang = 2.0 * math.atan2(qz, qw)
    c, s = math.cos(ang), math.sin(ang)
    return v[0] * c - v[1] * s, v[0] * s + v[1] * c


class TeleoperatorHost:
    """Host2 as an analytic gripper model.

    It reports its pose and pad readings, and applies every correction clone it
    receives: the gripper translates by the position delta, so the tool shifts
    the opposite way in the pad frame, then rotates about the base cell, so the
    tool rotates by the inverse quaternion.
    """

    def __init__(self, bed: Testbed, grid: GridConfig, fsr, *, max_rounds: int = 4,
                 start_pose=(100, 200, 0)):
        self.bed = bed
        self.grid = grid
        self.fsr = tuple(fsr)
        self.tool = tool_from_pattern(self.fsr, grid)
        self.x, self.y, self.z = start_pose
        self.quat = (0, 0, 0, 10_000)
        self.sid = 0
        self.rounds = 0
        self.max_rounds = max_rounds
        self.sent_at: dict = {}
        self.roundtrips: list = []
        self.clones = 0

    def start(self) -> None:
        self.bed.sim.at(0, self.send_feedback)

    def send_feedback(self) -> None:
        meta = CoordinateMetadata(sid=self.sid, tid=TID_POSE_CORRECT, x=self.x, y=self.y,
                                  z=self.z, qx=self.quat[0], qy=self.quat[1],
                                  qz=self.quat[2], qw=self.quat[3], fsr=self.fsr)
        frame = encode_frame(meta, TelemetryRecord(pkt_len=FRAME_LEN),
                             self.bed.config.host_addressing.reversed())
        now = self.bed.sim.now
        self.sent_at[self.sid] = now
        self.bed.log.add(now, HOST2, "feedback", self.sid,
                         "fsr=" + ",".join(str(v) for v in self.fsr))
        self.bed.send(HOST2, 0, frame)
        self.sid += 1
        self.rounds += 1

    def receive(self, frame: bytes, now: int) -> None:
        meta, _, _ = decode_frame(frame)
        if meta.tid != TID_CORRECTION:
            self.bed.log.add(now, HOST2, "rx", meta.sid, f"tid={meta.tid}")
            return
        self.clones += 1
        self.roundtrips.append(now - self.sent_at[meta.sid])
        self.apply_correction(meta)
        self.bed.log.add(now, HOST2, "correct", meta.sid,
                         f"x={self.x} y={self.y} q={','.join(str(v) for v in self.quat)}")
        if self.rounds < self.max_rounds:
            self.send_feedback()

    def apply_correction(self, meta: CoordinateMetadata) -> None:
        dx = dequantize_position(meta.x - self.x)
        dy = dequantize_position(meta.y - self.y)
        self.x, self.y = meta.x, meta.y
        self.quat = (meta.qx, meta.qy, meta.qz, meta.qw)
        if self.tool is not None:
            q = meta.quaternion
            inv = (-q[0], -q[1], -q[2], q[3])
            bx, by = cell_position(self.grid.base_index, self.grid)
            px, py = self.tool.point[0] - dx - bx, self.tool.point[1] - dy - by
            rx, ry = _rotate_z((px, py), inv)
            self.tool = ToolLine((rx + bx, ry + by), _rotate_z(self.tool.direction, inv))
        self.fsr = contact_pattern(self.tool, self.grid)


@dataclass
class GripScenarioResult:
    event_log: EventLog
    clones: int
    verdicts: list
    roundtrips_ns: list
    final_fsr: tuple
    final_key: tuple


def run_grip_scenario(initial_fsr, table: CorrectionTable | None = None,
                      topology: TopologyConfig | None = None, *,
                      max_rounds: int = 4) -> GripScenarioResult:
    """Host2 reports a grip; EdgeSwitch2 corrects it until the grip is right.

    ``verdicts`` lists, per feedback frame seen by Host1, the indicator name
    (``correction`` is never seen there; ``forward`` means no indicator).
    """
    table = build_correction_table() if table is None else table
    bed = Testbed(topology)
    bed.switches[SWITCH2].bind(1, TID_POSE_CORRECT, PoseCorrect(table))
    host1 = OperatorHost(bed, [], 1)
    host2 = TeleoperatorHost(bed, table.grid, initial_fsr, max_rounds=max_rounds)
    bed.attach(HOST1, host1)
    bed.attach(HOST2, host2)
    host2.start()
    bed.sim.run()
    verdicts = [TID_NAMES.get(m.tid, "forward") for _, m in host1.feedback]
    return GripScenarioResult(
        bed.log, host2.clones, verdicts, host2.roundtrips, host2.fsr,
        edge_sensors(host2.fsr, table.grid.threshold),
    )


__all__ = [
    "Simulator", "SchedulerError", "Testbed", "TopologyConfig", "TopologyError",
    "Metrics", "ExperimentResult", "run_experiment", "metrics_csv", "drawing_length",
    "run_grip_scenario", "GripScenarioResult", "contact_pattern", "tool_from_pattern",
    "ToolLine", "METRICS_HEADER",
]
