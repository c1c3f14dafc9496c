"""Frame codec for the haptic/feedback flow.

On-wire layout (130 bytes, all multi-byte fields big-endian)::

    offset  size  field
    0       14    Ethernet: dst(6) src(6) ethertype(2)
    14      20    IPv4 header, no options, checksum left zero
    34      8     UDP header, checksum left zero
    42      52    coordinate_metadata: 26 x 16-bit words
                    SID TID x y z qx qy qz qw b1 b2 f0..f14
    94      22    telemetry: ingress_ts(u64) egress_ts(u64) pkt_len(u16)
                    ingress_port(u16) egress_port(u16)
    116     14    zero padding

Positions travel as signed 16-bit counts of 10 um, quaternion components as
signed counts of 1e-4. SID, TID, buttons and FSR readings are unsigned.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields

FRAME_LEN = 130
ETH_LEN = 14
IP_LEN = 20
UDP_LEN = 8
PAYLOAD_OFFSET = ETH_LEN + IP_LEN + UDP_LEN
META_LEN = 52
TELEMETRY_OFFSET = PAYLOAD_OFFSET + META_LEN
TELEMETRY_LEN = 22
PADDING_OFFSET = TELEMETRY_OFFSET + TELEMETRY_LEN

NUM_FSR = 15
FSR_MAX = 1023
POSITION_UNIT_MM = 0.01
QUAT_SCALE = 10_000

ETHERTYPE_IPV4 = 0x0800
IPPROTO_UDP = 17

_ETH = struct.Struct(">6s6sH")
_IP = struct.Struct(">BBHHHBBH4s4s")
_UDP = struct.Struct(">HHHH")
META = struct.Struct(">HH7h2H15H")
TELEMETRY = struct.Struct(">QQHHH")

# (offset within frame) of the fields the dataplane touches directly
SID_OFFSET = PAYLOAD_OFFSET
TID_OFFSET = PAYLOAD_OFFSET + 2
X_OFFSET = PAYLOAD_OFFSET + 4

INT16_MIN, INT16_MAX = -0x8000, 0x7FFF
UINT16_MAX = 0xFFFF
UINT64_MAX = 0xFFFF_FFFF_FFFF_FFFF


class WireError(ValueError):
    """Base class for codec failures."""


class EncodeError(WireError):
    def __init__(self, name: str, value, reason: str = "out of range"):
        super().__init__(f"{name}={value!r}: {reason}")
        self.field = name
        self.value = value


class FrameError(WireError):
    """Raised for frames that cannot be decoded."""


class SaturationError(WireError):
    """Raised when a real value does not fit its fixed-point field."""


@dataclass(frozen=True)
class CoordinateMetadata:
    sid: int = 0
    tid: int = 0
    x: int = 0
    y: int = 0
    z: int = 0
    qx: int = 0
    qy: int = 0
    qz: int = 0
    qw: int = 0
    b1: int = 0
    b2: int = 0
    fsr: tuple[int, ...] = (0,) * NUM_FSR

    @property
    def position_mm(self) -> tuple[float, float, float]:
        return (
            dequantize_position(self.x),
            dequantize_position(self.y),
            dequantize_position(self.z),
        )

    @property
    def quaternion(self) -> tuple[float, float, float, float]:
        return tuple(dequantize_quat(v) for v in (self.qx, self.qy, self.qz, self.qw))

    def words(self) -> tuple[int, ...]:
        return (self.sid, self.tid, self.x, self.y, self.z, self.qx, self.qy,
                self.qz, self.qw, self.b1, self.b2, *self.fsr)


@dataclass(frozen=True)
class TelemetryRecord:
    ingress_ts: int = 0
    egress_ts: int = 0
    pkt_len: int = 0
    ingress_port: int = 0
    egress_port: int = 0

    @property
    def residence_ns(self) -> int:
        return self.egress_ts - self.ingress_ts


def _ip(text: str) -> bytes:
    parts = [int(p) for p in text.split(".")]
    return bytes(parts)


@dataclass(frozen=True)
class Addressing:
    dst_mac: bytes = b"\x02\x00\x00\x00\x00\x02"
    src_mac: bytes = b"\x02\x00\x00\x00\x00\x01"
    ethertype: int = ETHERTYPE_IPV4
    src_ip: bytes = field(default_factory=lambda: _ip("10.0.0.1"))
    dst_ip: bytes = field(default_factory=lambda: _ip("10.0.0.2"))
    src_port: int = 5000
    dst_port: int = 5000
    ttl: int = 64

    def reversed(self) -> "Addressing":
        return Addressing(self.src_mac, self.dst_mac, self.ethertype, self.dst_ip,
                          self.src_ip, self.dst_port, self.src_port, self.ttl)


def _check_range(name: str, value, lo: int, hi: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EncodeError(name, value, "not an integer")
    if not lo <= value <= hi:
        raise EncodeError(name, value, f"outside [{lo}, {hi}]")


def check_meta(meta: CoordinateMetadata) -> None:
    """Raise :class:`EncodeError` naming the first field out of range."""
    for name in ("sid", "tid"):
        _check_range(name, getattr(meta, name), 0, UINT16_MAX)
    for name in ("x", "y", "z", "qx", "qy", "qz", "qw"):
        _check_range(name, getattr(meta, name), INT16_MIN, INT16_MAX)
    for name in ("b1", "b2"):
        _check_range(name, getattr(meta, name), 0, 1)
    if len(meta.fsr) != NUM_FSR:
        raise EncodeError("fsr", meta.fsr, f"expected {NUM_FSR} readings")
    for i, v in enumerate(meta.fsr):
        _check_range(f"f{i}", v, 0, FSR_MAX)


def check_telemetry(tel: TelemetryRecord) -> None:
    for f in fields(TelemetryRecord):
        hi = UINT64_MAX if f.name.endswith("_ts") else UINT16_MAX
        _check_range(f.name, getattr(tel, f.name), 0, hi)


def _check_addressing(addr: Addressing) -> None:
    for name in ("dst_mac", "src_mac"):
        if len(getattr(addr, name)) != 6:
            raise EncodeError(name, getattr(addr, name), "link address must be 6 bytes")
    for name in ("src_ip", "dst_ip"):
        if len(getattr(addr, name)) != 4:
            raise EncodeError(name, getattr(addr, name), "IPv4 address must be 4 bytes")
    for name in ("ethertype", "src_port", "dst_port"):
        _check_range(name, getattr(addr, name), 0, UINT16_MAX)
    _check_range("ttl", addr.ttl, 0, 0xFF)


def encode_frame(
    meta: CoordinateMetadata,
    telemetry: TelemetryRecord | None = None,
    addressing: Addressing | None = None,
) -> bytes:
    """Serialize one frame; always returns exactly :data:`FRAME_LEN` bytes."""
    telemetry = TelemetryRecord() if telemetry is None else telemetry
    addressing = Addressing() if addressing is None else addressing
    check_meta(meta)
    check_telemetry(telemetry)
    _check_addressing(addressing)

    buf = bytearray(FRAME_LEN)
    _ETH.pack_into(buf, 0, addressing.dst_mac, addressing.src_mac, addressing.ethertype)
    _IP.pack_into(buf, ETH_LEN, 0x45, 0, FRAME_LEN - ETH_LEN, 0, 0x4000,
                  addressing.ttl, IPPROTO_UDP, 0, addressing.src_ip, addressing.dst_ip)
    _UDP.pack_into(buf, ETH_LEN + IP_LEN, addressing.src_port, addressing.dst_port,
                   FRAME_LEN - ETH_LEN - IP_LEN, 0)
    META.pack_into(buf, PAYLOAD_OFFSET, *meta.words())
    TELEMETRY.pack_into(buf, TELEMETRY_OFFSET, telemetry.ingress_ts, telemetry.egress_ts,
                        telemetry.pkt_len, telemetry.ingress_port, telemetry.egress_port)
    return bytes(buf)


def unpack_meta(frame: bytes) -> CoordinateMetadata:
    """Parse only the coordinate_metadata words of a frame."""
    if len(frame) != FRAME_LEN:
        raise FrameError(f"frame is {len(frame)} bytes, expected {FRAME_LEN}")
    w = META.unpack_from(frame, PAYLOAD_OFFSET)
    fsr = w[11:]
    for i, v in enumerate(fsr):
        if v > FSR_MAX:
            raise FrameError(f"f{i}={v} exceeds the 10-bit ADC range")
    return CoordinateMetadata(*w[:11], fsr=fsr)


def decode_frame(frame: bytes) -> tuple[CoordinateMetadata, TelemetryRecord, Addressing]:
    meta = unpack_meta(frame)
    dst, src, ethertype = _ETH.unpack_from(frame, 0)
    ip = _IP.unpack_from(frame, ETH_LEN)
    sport, dport, _, _ = _UDP.unpack_from(frame, ETH_LEN + IP_LEN)
    addressing = Addressing(dst, src, ethertype, ip[8], ip[9], sport, dport, ip[5])
    telemetry = TelemetryRecord(*TELEMETRY.unpack_from(frame, TELEMETRY_OFFSET))
    return meta, telemetry, addressing


def quantize_position(value_mm: float) -> int:
    units = round(value_mm / POSITION_UNIT_MM)
    if not INT16_MIN <= units <= INT16_MAX:
        raise SaturationError(f"position {value_mm} mm saturates the 16-bit field")
    return units


def dequantize_position(units: int) -> float:
    return units * POSITION_UNIT_MM


def quantize_quat(component: float) -> int:
    if abs(component) > 1.0:
        raise SaturationError(f"quaternion component {component} outside [-1, 1]")
    return round(component * QUAT_SCALE)


def dequantize_quat(units: int) -> float:
    return units / QUAT_SCALE


def to_int16(value: int) -> int:
    """Wrap an integer into the signed 16-bit range (adder overflow semantics)."""
    value &= UINT16_MAX
    return value - 0x10000 if value & 0x8000 else value
