"""Pose-correction calibration for an n x m FSR pad.

Cells are numbered row-major from the top-left: ``col = i % m``, ``row = i // m``,
with x to the right and y downward. A tool pressing on cells ``se`` and ``es``
(first and last cell over threshold) is assumed to lie on the line through
their centres. The correction moves the gripper so the ``se`` contact lands on
the base cell, then rotates it about the pad normal so the tool runs down the
middle column.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

from .wire import NUM_FSR

# Pad normal pointing out of the sensor face, toward the tool. With x right and
# y down this is -z, which makes the stored rotation's inverse carry the tool
# axis onto the pad's vertical.
GRIPPER_NORMAL = (0.0, 0.0, -1.0)


class GridError(ValueError):
    pass


class Verdict(str, Enum):
    CORRECTION = "correction"
    CORRECT_GRIP = "correct_grip"
    NO_TOOL = "no_tool"


@dataclass(frozen=True)
class GridConfig:
    n: int = 5
    m: int = 3
    gap_x: float = 10.0
    gap_y: float = 8.0
    base_index: int = 1
    threshold: int = 500

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise GridError(f"grid must have at least one row and column, got {self.n}x{self.m}")
        if self.cells < 2:
            raise GridError("grid needs at least two cells to form a pair")
        if self.cells > NUM_FSR:
            raise GridError(f"{self.cells} cells exceed the {NUM_FSR} FSR fields on the wire")
        if not 0 <= self.base_index < self.cells:
            raise GridError(f"base_index {self.base_index} outside 0..{self.cells - 1}")
        if self.gap_x <= 0 or self.gap_y <= 0:
            raise GridError("FSR pitch must be positive")
        if not 0 <= self.threshold <= 1023:
            raise GridError(f"threshold {self.threshold} outside the ADC range")

    @property
    def cells(self) -> int:
        return self.n * self.m

    @property
    def middle_column(self) -> int:
        return self.m // 2

    def middle_key(self) -> tuple[int, int] | None:
        """Key produced by a tool lying along the whole middle column."""
        if self.n < 2:
            return None
        return self.middle_column, (self.n - 1) * self.m + self.middle_column

    def full_key(self) -> tuple[int, int] | None:
        """Key produced by an empty, closed gripper (every cell pressed).

        Only meaningful on a 2-D pad; on a single row or column full contact
        is indistinguishable from a tool lying along it.
        """
        if self.n < 2 or self.m < 2:
            return None
        return 0, self.cells - 1


@dataclass(frozen=True)
class CorrectionEntry:
    verdict: Verdict
    dist_x: float = 0.0
    dist_y: float = 0.0
    quaternion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)


def cell_coords(index: int, grid: GridConfig) -> tuple[int, int]:
    """(col, row) of a 0-based cell index."""
    if not 0 <= index < grid.cells:
        raise GridError(f"cell index {index} outside 0..{grid.cells - 1}")
    return index % grid.m, index // grid.m


def cell_position(index: int, grid: GridConfig) -> tuple[float, float]:
    """Physical centre of a cell in mm, origin at cell 0."""
    col, row = cell_coords(index, grid)
    return col * grid.gap_x, row * grid.gap_y


def angle_to_quaternion(theta: float, axis=(0.0, 0.0, 1.0)) -> tuple[float, float, float, float]:
    """Quaternion (qx, qy, qz, qw) for a rotation of ``theta`` radians about ``axis``."""
    ax, ay, az = axis
    if abs(math.sqrt(ax * ax + ay * ay + az * az) - 1.0) > 1e-9:
        raise ValueError(f"rotation axis {axis} is not a unit vector")
    s = math.sin(theta / 2.0)
    return ax * s, ay * s, az * s, math.cos(theta / 2.0)


def pair_angle(se: int, es: int, grid: GridConfig) -> float:
    """Signed angle of the se-es tool axis from the pad vertical, radians."""
    col_se, row_se = cell_coords(se, grid)
    col_es, row_es = cell_coords(es, grid)
    return math.atan2((col_se - col_es) * grid.gap_x, (row_se - row_es) * grid.gap_y)


def pair_correction(se: int, es: int, grid: GridConfig) -> CorrectionEntry:
    if se >= es:
        raise GridError(f"pair requires se < es, got ({se}, {es})")
    cell_coords(es, grid)
    key = (se, es)
    if key == grid.middle_key():
        return CorrectionEntry(Verdict.CORRECT_GRIP)
    if key == grid.full_key():
        return CorrectionEntry(Verdict.NO_TOOL)

    col_se, row_se = cell_coords(se, grid)
    col_base, row_base = cell_coords(grid.base_index, grid)
    theta = pair_angle(se, es, grid)
    return CorrectionEntry(
        Verdict.CORRECTION,
        dist_x=(col_se - col_base) * grid.gap_x,
        dist_y=(row_se - row_base) * grid.gap_y,
        quaternion=angle_to_quaternion(theta, GRIPPER_NORMAL),
    )


@dataclass(frozen=True)
class CorrectionTable:
    grid: GridConfig
    entries: dict

    def lookup(self, se: int, es: int) -> CorrectionEntry | None:
        return self.entries.get((se, es))

    def __len__(self):
        return len(self.entries)

    def to_json(self) -> str:
        rows = []
        for (se, es), e in sorted(self.entries.items()):
            qx, qy, qz, qw = e.quaternion
            rows.append({
                "se": se, "es": es, "verdict": e.verdict.value,
                "dist_x_mm": e.dist_x, "dist_y_mm": e.dist_y,
                "qx": qx, "qy": qy, "qz": qz, "qw": qw,
            })
        return json.dumps({"grid": asdict(self.grid), "entries": rows}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CorrectionTable":
        doc = json.loads(text)
        grid = GridConfig(**doc["grid"])
        entries = {}
        for r in doc["entries"]:
            entries[(r["se"], r["es"])] = CorrectionEntry(
                Verdict(r["verdict"]), r["dist_x_mm"], r["dist_y_mm"],
                (r["qx"], r["qy"], r["qz"], r["qw"]),
            )
        return cls(grid, entries)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CorrectionTable":
        return cls.from_json(Path(path).read_text())


def build_correction_table(grid: GridConfig | None = None) -> CorrectionTable:
    grid = GridConfig() if grid is None else grid
    entries = {}
    for se in range(grid.cells):
        for es in range(se + 1, grid.cells):
            entries[(se, es)] = pair_correction(se, es, grid)
    return CorrectionTable(grid, entries)
