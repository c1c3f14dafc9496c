"""Switch pipeline: grip inspection, tremor suppression, TID dispatch, telemetry.

Each pipeline function is pure: it takes the frame bytes and a :class:`PortState`
and returns a :class:`PipelineOutput` holding the emitted frames and the state
to keep for the next packet. :class:`EdgeSwitch` wires the functions to ports
and stamps telemetry on egress.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Union

from . import kernels
from .geometry import CorrectionTable, Verdict
from .wire import (
    FRAME_LEN,
    TELEMETRY,
    TELEMETRY_OFFSET,
    TID_OFFSET,
    encode_frame,
    decode_frame,
    quantize_position,
    quantize_quat,
    to_int16,
    unpack_meta,
)

TID_PASSTHROUGH = 0
TID_POSE_CORRECT = 1
TID_TREMOR = 2
TID_CORRECTION = 100
TID_CORRECT_GRIP = 101
TID_NO_TOOL = 102

VERDICT_TID = {
    Verdict.CORRECTION: TID_CORRECTION,
    Verdict.CORRECT_GRIP: TID_CORRECT_GRIP,
    Verdict.NO_TOOL: TID_NO_TOOL,
}

_U16 = struct.Struct(">H")


class TelemetryError(ValueError):
    pass


@dataclass(frozen=True)
class Passthrough:
    name = "passthrough"


@dataclass(frozen=True)
class TremorSuppress:
    threshold_units: int
    name = "tremor_suppress"

    def __post_init__(self):
        if self.threshold_units < 0:
            raise ValueError("tremor threshold must be non-negative")


@dataclass(frozen=True)
class PoseCorrect:
    table: CorrectionTable
    name = "pose_correct"

    def __post_init__(self):
        g = self.table.grid
        if g.cells * (g.cells - 1) // 2 != len(self.table):
            raise ValueError("pose correction needs a complete correction table")


AlgorithmBinding = Union[Passthrough, TremorSuppress, PoseCorrect]
PASSTHROUGH = Passthrough()


@dataclass(frozen=True)
class PortState:
    old_x: int = 0
    old_y: int = 0
    old_z: int = 0
    initialized: bool = False
    tid_params: dict = field(default_factory=dict)

    def bind(self, tid: int, binding: AlgorithmBinding) -> "PortState":
        return replace(self, tid_params={**self.tid_params, tid: binding})


class Emission(NamedTuple):
    frame: bytes
    port: int


@dataclass(frozen=True)
class PipelineOutput:
    emissions: tuple
    dropped: bool
    state: PortState
    action: str
    faults: int = 0


def edge_sensors(fsr, threshold: int = 500) -> tuple[int, int]:
    """(se, es): first and last FSR index strictly above ``threshold``."""
    return kernels.edge_sensors(fsr, threshold)


def _set_tid(frame: bytes, tid: int) -> bytes:
    buf = bytearray(frame)
    _U16.pack_into(buf, TID_OFFSET, tid)
    return bytes(buf)


def grip_inspect(frame: bytes, state: PortState, table: CorrectionTable, *,
                 forward_port: int, return_port: int) -> PipelineOutput:
    """Inspect a feedback frame and clone a pose correction when the grip is off.

    The original always goes to ``forward_port`` (operator side). A correction
    clone, when the table says so, goes back out ``return_port``.
    """
    meta, telemetry, addressing = decode_frame(frame)
    se, es = edge_sensors(meta.fsr, table.grid.threshold)
    if es <= se:
        return PipelineOutput((Emission(frame, forward_port),), False, state, "forward")

    entry = table.lookup(se, es)
    if entry is None:
        return PipelineOutput((Emission(frame, forward_port),), False, state, "fault", faults=1)

    if entry.verdict is not Verdict.CORRECTION:
        tagged = _set_tid(frame, VERDICT_TID[entry.verdict])
        return PipelineOutput((Emission(tagged, forward_port),), False, state,
                              entry.verdict.value)

    qx, qy, qz, qw = (quantize_quat(c) for c in entry.quaternion)
    corrected = replace(
        meta,
        tid=TID_CORRECTION,
        x=to_int16(meta.x + quantize_position(entry.dist_x)),
        y=to_int16(meta.y + quantize_position(entry.dist_y)),
        qx=qx, qy=qy, qz=qz, qw=qw,
    )
    clone = encode_frame(corrected, telemetry, addressing.reversed())
    return PipelineOutput(
        (Emission(frame, forward_port), Emission(clone, return_port)),
        False, state, "clone",
    )


def tremor_filter(frame: bytes, state: PortState, threshold: int, *,
                  forward_port: int) -> PipelineOutput:
    """Forward the frame only if it moved more than ``threshold`` units (L1)."""
    meta = unpack_meta(frame)
    if not state.initialized:
        new = replace(state, old_x=meta.x, old_y=meta.y, old_z=meta.z, initialized=True)
        return PipelineOutput((Emission(frame, forward_port),), False, new, "init")
    if kernels.deadband_step(meta.x, meta.y, meta.z,
                             state.old_x, state.old_y, state.old_z, threshold):
        new = replace(state, old_x=meta.x, old_y=meta.y, old_z=meta.z)
        return PipelineOutput((Emission(frame, forward_port),), False, new, "forward")
    return PipelineOutput((), True, state, "drop")


def tid_dispatch(frame: bytes, state: PortState, *, forward_port: int,
                 return_port: int) -> PipelineOutput:
    """Route a frame through the algorithm bound to its TID on this port."""
    tid = _U16.unpack_from(frame, TID_OFFSET)[0]
    binding = state.tid_params.get(tid, PASSTHROUGH)
    if isinstance(binding, TremorSuppress):
        return tremor_filter(frame, state, binding.threshold_units, forward_port=forward_port)
    if isinstance(binding, PoseCorrect):
        return grip_inspect(frame, state, binding.table, forward_port=forward_port,
                            return_port=return_port)
    unpack_meta(frame)
    return PipelineOutput((Emission(frame, forward_port),), False, state, "passthrough")


def stamp_telemetry(frame: bytes, ingress_ts: int, egress_ts: int,
                    ingress_port: int, egress_port: int) -> bytes:
    if len(frame) != FRAME_LEN:
        raise TelemetryError(f"frame is {len(frame)} bytes, expected {FRAME_LEN}")
    if egress_ts < ingress_ts:
        raise TelemetryError(f"egress {egress_ts} ns precedes ingress {ingress_ts} ns")
    buf = bytearray(frame)
    TELEMETRY.pack_into(buf, TELEMETRY_OFFSET, ingress_ts, egress_ts, FRAME_LEN,
                        ingress_port, egress_port)
    return bytes(buf)


@dataclass
class PortCounters:
    received: int = 0
    forwarded: int = 0
    dropped: int = 0
    cloned: int = 0
    faults: int = 0


class EdgeSwitch:
    """A two-or-more port switch running :func:`tid_dispatch` on every ingress.

    ``peers`` maps each ingress port to the port its traffic is forwarded to.
    Frames leave ``residence_ns`` after they arrive, with telemetry stamped.
    """

    def __init__(self, name: str, peers: dict[int, int], residence_ns: int = 100):
        self.name = name
        self.peers = dict(peers)
        self.residence_ns = residence_ns
        self.ports = {p: PortState() for p in self.peers}
        self.counters = {p: PortCounters() for p in self.peers}
        self.residence_log: list[int] = []

    def bind(self, port: int, tid: int, binding: AlgorithmBinding) -> None:
        """Install or replace a TID binding; call only between packets."""
        self.ports[port] = self.ports[port].bind(tid, binding)

    def process(self, frame: bytes, ingress_port: int, now_ns: int):
        """Run one frame through the pipeline.

        Returns ``(out, emissions)`` where ``out`` is the :class:`PipelineOutput`
        and ``emissions`` is a list of ``(stamped_frame, egress_port, egress_ts)``.
        """
        state = self.ports[ingress_port]
        out = tid_dispatch(frame, state, forward_port=self.peers[ingress_port],
                           return_port=ingress_port)
        self.ports[ingress_port] = out.state
        c = self.counters[ingress_port]
        c.received += 1
        c.faults += out.faults
        if out.dropped:
            c.dropped += 1
            return out, []
        c.forwarded += 1
        c.cloned += len(out.emissions) - 1
        egress_ts = now_ns + self.residence_ns
        stamped = []
        for em in out.emissions:
            stamped.append((stamp_telemetry(em.frame, now_ns, egress_ts, ingress_port, em.port),
                            em.port, egress_ts))
            self.residence_log.append(egress_ts - now_ns)
        return out, stamped
