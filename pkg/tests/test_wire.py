import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeswitch.wire import (
    FRAME_LEN,
    META_LEN,
    PADDING_OFFSET,
    PAYLOAD_OFFSET,
    TELEMETRY_OFFSET,
    X_OFFSET,
    Addressing,
    CoordinateMetadata,
    EncodeError,
    FrameError,
    SaturationError,
    TelemetryRecord,
    decode_frame,
    dequantize_position,
    dequantize_quat,
    encode_frame,
    quantize_position,
    quantize_quat,
)

from conftest import TABLE_II_FSR

FIELD_NAMES = ["sid", "tid", "x", "y", "z", "qx", "qy", "qz", "qw", "b1", "b2"]


def be16_oracle(value):
    """High byte first, two's complement for negatives, via shifts only."""
    u = value + (1 << 16) if value < 0 else value
    return bytes([(u >> 8) & 0xFF, u & 0xFF])


u16 = st.integers(0, 0xFFFF)
s16 = st.integers(-0x8000, 0x7FFF)
metas = st.builds(
    CoordinateMetadata,
    sid=u16, tid=u16, x=s16, y=s16, z=s16, qx=s16, qy=s16, qz=s16, qw=s16,
    b1=st.integers(0, 1), b2=st.integers(0, 1),
    fsr=st.tuples(*[st.integers(0, 1023)] * 15),
)
telemetries = st.builds(
    TelemetryRecord,
    ingress_ts=st.integers(0, 2**64 - 1), egress_ts=st.integers(0, 2**64 - 1),
    pkt_len=u16, ingress_port=u16, egress_port=u16,
)
addressings = st.builds(
    Addressing,
    dst_mac=st.binary(min_size=6, max_size=6), src_mac=st.binary(min_size=6, max_size=6),
    ethertype=u16, src_ip=st.binary(min_size=4, max_size=4),
    dst_ip=st.binary(min_size=4, max_size=4), src_port=u16, dst_port=u16,
    ttl=st.integers(0, 255),
)


def test_zero_frame_layout():
    frame = encode_frame(CoordinateMetadata(), TelemetryRecord())
    assert len(frame) == FRAME_LEN
    assert frame[42:46] == b"\x00\x00\x00\x00"
    assert PAYLOAD_OFFSET == 42
    assert TELEMETRY_OFFSET == PAYLOAD_OFFSET + META_LEN
    assert frame[PADDING_OFFSET:] == bytes(FRAME_LEN - PADDING_OFFSET)


def test_negative_x_bytes():
    frame = encode_frame(CoordinateMetadata(x=quantize_position(-1.23)))
    assert frame[X_OFFSET:X_OFFSET + 2] == be16_oracle(-123) == b"\xff\x85"


def test_table_ii_fsr_words():
    frame = encode_frame(CoordinateMetadata(fsr=TABLE_II_FSR))
    f0 = PAYLOAD_OFFSET + 2 * len(FIELD_NAMES)
    assert frame[f0 + 18:f0 + 20] == b"\x02\xd0"
    assert frame[f0 + 26:f0 + 28] == b"\x02\xf8"
    assert frame[f0 + 18:f0 + 20] == be16_oracle(720)


def test_x_min_decodes_negative():
    frame = bytearray(encode_frame(CoordinateMetadata()))
    frame[X_OFFSET:X_OFFSET + 2] = b"\x80\x00"
    meta, _, _ = decode_frame(bytes(frame))
    assert meta.x == -32768
    assert dequantize_position(meta.x) == pytest.approx(-327.68)


def test_ip_udp_lengths():
    frame = encode_frame(CoordinateMetadata())
    assert struct.unpack_from(">H", frame, 16)[0] == FRAME_LEN - 14
    assert struct.unpack_from(">H", frame, 38)[0] == FRAME_LEN - 34
    assert frame[23] == 17


@pytest.mark.parametrize("size", [0, 129, 131])
def test_wrong_length_rejected(size):
    with pytest.raises(FrameError):
        decode_frame(bytes(size))


def test_fsr_over_adc_range_rejected():
    frame = bytearray(encode_frame(CoordinateMetadata()))
    off = PAYLOAD_OFFSET + 2 * (len(FIELD_NAMES) + 4)
    frame[off:off + 2] = (1024).to_bytes(2, "big")
    with pytest.raises(FrameError, match="f4"):
        decode_frame(bytes(frame))


@pytest.mark.parametrize("kwargs, name", [
    ({"x": 40000}, "x"),
    ({"sid": -1}, "sid"),
    ({"qw": -40000}, "qw"),
    ({"b2": 2}, "b2"),
    ({"fsr": (0,) * 14 + (1024,)}, "f14"),
])
def test_encode_range_error_names_field(kwargs, name):
    with pytest.raises(EncodeError) as exc:
        encode_frame(CoordinateMetadata(**kwargs))
    assert exc.value.field == name


def test_encode_rejects_bad_telemetry_and_mac():
    with pytest.raises(EncodeError):
        encode_frame(CoordinateMetadata(), TelemetryRecord(pkt_len=70000))
    with pytest.raises(EncodeError):
        encode_frame(CoordinateMetadata(), None, Addressing(dst_mac=b"\x00"))


@settings(max_examples=300)
@given(metas, telemetries, addressings)
def test_roundtrip(meta, tel, addr):
    frame = encode_frame(meta, tel, addr)
    assert len(frame) == FRAME_LEN
    decoded = decode_frame(frame)
    assert decoded == (meta, tel, addr)
    assert encode_frame(*decoded) == frame


@settings(max_examples=200)
@given(metas)
def test_every_payload_word_big_endian(meta):
    frame = encode_frame(meta)
    for i, v in enumerate(meta.words()):
        off = PAYLOAD_OFFSET + 2 * i
        assert frame[off:off + 2] == be16_oracle(v)


@pytest.mark.parametrize("mm, units", [(0.0, 0), (0.5, 50), (-2.0, -200), (327.67, 32767)])
def test_quantize_position(mm, units):
    assert quantize_position(mm) == units


@pytest.mark.parametrize("mm", [327.7, -400.0])
def test_quantize_position_saturates(mm):
    with pytest.raises(SaturationError):
        quantize_position(mm)


@given(st.floats(-327.67, 327.67))
def test_position_roundtrip_half_unit(mm):
    assert abs(dequantize_position(quantize_position(mm)) - mm) <= 0.005 + 1e-12


@pytest.mark.parametrize("c, units", [(1.0, 10000), (0.7071, 7071), (-0.5, -5000)])
def test_quantize_quat(c, units):
    assert quantize_quat(c) == units


def test_quantize_quat_range():
    with pytest.raises(SaturationError):
        quantize_quat(1.0001)


@given(st.floats(-1.0, 1.0))
def test_quat_roundtrip(c):
    assert abs(dequantize_quat(quantize_quat(c)) - c) <= 5e-5 + 1e-15
