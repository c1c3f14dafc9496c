"""Synthetic operator motion: hold, line and spiral strokes plus hand tremor.

Every sample ``k`` sits at time ``k / sample_rate``; strokes move at constant
speed ``path_length / duration``. Tremor is an independent sinusoid per axis
with frequency in the physiological 8-9 Hz band and a seeded random phase.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .wire import (
    FRAME_LEN,
    Addressing,
    CoordinateMetadata,
    TelemetryRecord,
    encode_frame,
    quantize_position,
)


class TaskKind(str, Enum):
    SPIRAL = "spiral"
    LINE = "line"
    HOLD = "hold"


DEFAULT_DURATION_S = {TaskKind.SPIRAL: 15.0, TaskKind.LINE: 5.0, TaskKind.HOLD: 10.0}
DEFAULT_PATH_MM = {TaskKind.SPIRAL: 600.0, TaskKind.LINE: 125.0, TaskKind.HOLD: 0.0}


@dataclass(frozen=True)
class TremorModel:
    amplitude_um: float = 100.0
    seed: int = 0
    band_hz: tuple[float, float] = (8.0, 9.0)
    frequencies: tuple[float, float, float] = field(init=False, repr=False)
    phases: tuple[float, float, float] = field(init=False, repr=False)

    def __post_init__(self):
        if self.amplitude_um < 0:
            raise ValueError("tremor amplitude must be non-negative")
        rng = np.random.default_rng(self.seed)
        lo, hi = self.band_hz
        object.__setattr__(self, "frequencies", tuple(float(f) for f in rng.uniform(lo, hi, 3)))
        object.__setattr__(self, "phases", tuple(float(p) for p in rng.uniform(0.0, 2 * math.pi, 3)))

    @property
    def amplitude_mm(self) -> float:
        return self.amplitude_um / 1000.0

    def offset(self, t: float) -> tuple[float, float, float]:
        a = self.amplitude_mm
        return tuple(a * math.sin(2 * math.pi * f * t + p)
                     for f, p in zip(self.frequencies, self.phases))

    def offsets(self, t: np.ndarray) -> np.ndarray:
        f = np.asarray(self.frequencies)
        p = np.asarray(self.phases)
        return self.amplitude_mm * np.sin(2 * np.pi * f[None, :] * t[:, None] + p[None, :])


NO_TREMOR = TremorModel(amplitude_um=0.0)


@dataclass
class TaskSpec:
    kind: TaskKind
    duration_s: float | None = None
    sample_rate_hz: float = 1000.0
    path_length_mm: float | None = None
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    spiral_a_mm: float = 2.0
    spiral_b_mm: float = 1.5

    def __post_init__(self):
        self.kind = TaskKind(self.kind)
        if self.duration_s is None:
            self.duration_s = DEFAULT_DURATION_S[self.kind]
        if self.path_length_mm is None:
            self.path_length_mm = DEFAULT_PATH_MM[self.kind]
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("duration and sample rate must be positive")
        if self.path_length_mm < 0:
            raise ValueError("path length must be non-negative")
        norm = math.sqrt(sum(d * d for d in self.direction))
        if norm == 0:
            raise ValueError("line direction must be non-zero")
        self.direction = tuple(d / norm for d in self.direction)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    def arc_position(self, k):
        """Distance travelled along the stroke at sample ``k`` (scalar or array)."""
        return self.path_length_mm * k / self.n_samples


def _spiral_arc(theta, a: float, b: float):
    # closed-form arc length of r = a + b*theta from theta = 0
    u0 = a / b
    u = (a + b * theta) / b

    def prim(v):
        return 0.5 * b * (v * np.sqrt(1.0 + v * v) + np.arcsinh(v))

    return prim(u) - prim(u0)


def spiral_theta(s, a: float, b: float):
    """Invert the spiral arc length: angle at which ``s`` mm have been covered."""
    s = np.asarray(s, dtype=float)
    # start from the large-theta approximation s ~ a*theta + b*theta^2/2
    theta = (-a + np.sqrt(a * a + 2.0 * b * s)) / b
    for _ in range(50):
        r = a + b * theta
        step = (_spiral_arc(theta, a, b) - s) / np.sqrt(r * r + b * b)
        theta = theta - step
        if np.all(np.abs(step) < 1e-13):
            break
    return theta


def base_position(spec: TaskSpec, k):
    """Tremor-free position(s) at sample index ``k`` as an (..., 3) array."""
    k = np.asarray(k, dtype=float)
    start = np.asarray(spec.start, dtype=float)
    if spec.kind is TaskKind.HOLD:
        return np.broadcast_to(start, k.shape + (3,)).copy()
    s = spec.arc_position(k)
    if spec.kind is TaskKind.LINE:
        return start + s[..., None] * np.asarray(spec.direction)
    theta = spiral_theta(s, spec.spiral_a_mm, spec.spiral_b_mm)
    r = spec.spiral_a_mm + spec.spiral_b_mm * theta
    return start + np.stack([r * np.cos(theta), r * np.sin(theta), np.zeros_like(r)], axis=-1)


def sample_trajectory(spec: TaskSpec, tremor: TremorModel, k: int) -> tuple[float, float, float]:
    if not 0 <= k < spec.n_samples:
        raise IndexError(f"sample {k} outside 0..{spec.n_samples - 1}")
    base = base_position(spec, k)
    off = tremor.offset(k / spec.sample_rate_hz)
    return tuple(float(b + o) for b, o in zip(base, off))


def trajectory(spec: TaskSpec, tremor: TremorModel) -> np.ndarray:
    """All samples as an (N, 3) array in mm."""
    k = np.arange(spec.n_samples)
    return base_position(spec, k) + tremor.offsets(k / spec.sample_rate_hz)


def quantized_trajectory(spec: TaskSpec, tremor: TremorModel) -> np.ndarray:
    """All samples as int64 wire units; raises on saturation."""
    pts = trajectory(spec, tremor)
    return np.array([[quantize_position(v) for v in row] for row in pts.tolist()], dtype=np.int64)


def emit_packets(spec: TaskSpec, tremor: TremorModel, tid: int,
                 addressing: Addressing | None = None) -> Iterator[bytes]:
    """One frame per sample, SIDs counting up from 0 (wrapping at 16 bits)."""
    units = quantized_trajectory(spec, tremor)
    tel = TelemetryRecord(pkt_len=FRAME_LEN)
    for k, (x, y, z) in enumerate(units.tolist()):
        meta = CoordinateMetadata(sid=k & 0xFFFF, tid=tid, x=x, y=y, z=z)
        yield encode_frame(meta, tel, addressing)


def offered_rate_kbps(spec: TaskSpec) -> float:
    return FRAME_LEN * 8 * spec.sample_rate_hz / 1000.0


def write_trajectory_csv(path, spec: TaskSpec, tremor: TremorModel) -> None:
    pts = trajectory(spec, tremor)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["k", "t_ms", "x_mm", "y_mm", "z_mm"])
        for k, (x, y, z) in enumerate(pts.tolist()):
            w.writerow([k, f"{1000.0 * k / spec.sample_rate_hz:.3f}",
                        f"{x:.6f}", f"{y:.6f}", f"{z:.6f}"])
