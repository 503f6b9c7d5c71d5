"""Simulated 10x10 gripper pressure array and the fragile-object clamp.

Contact is a uniform-pressure footprint: every cell under the grasped
object reports stiffness times over-closure (object width minus gripper
opening), all other cells zero.  Uniformity keeps the total-force check
exact.  Pressure is in dimensionless sensor counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .gestures import GripperSet, RobotCommand
from .sim_types import ObjectKind, SceneObject

GRID = 10
FRAME_AREA_CM2 = 5.8
SENSOR_RATE_HZ = 120
DEFAULT_STIFFNESS = 5e4  # counts per meter of over-closure


@dataclass(frozen=True)
class TactileFrame:
    pressures: np.ndarray  # (10, 10), non-negative counts
    timestamp_ms: float
    frame_area_cm2: float = FRAME_AREA_CM2

    def max_pressure(self) -> float:
        return float(self.pressures.max())

    def total_force(self) -> float:
        # fsum: correctly-rounded total, so the uniform contact model's
        # conservation identity (cell value times cell count) holds exactly.
        return math.fsum(self.pressures.ravel())

    def active_cells(self) -> int:
        return int(np.count_nonzero(self.pressures))


def footprint_mask(kind: ObjectKind) -> np.ndarray:
    """Boolean contact footprint on the array for a grasped object kind."""
    mask = np.zeros((GRID, GRID), dtype=bool)
    if kind is ObjectKind.PIPETTE:
        mask[:, 5:7] = True  # narrow vertical band, all rows
    else:  # tube: broad disc-like block
        mask[1:9, 1:9] = True
    return mask


def render_frame(
    opening: float,
    obj: SceneObject | None,
    now_ms: float,
    stiffness: float = DEFAULT_STIFFNESS,
) -> TactileFrame:
    """Pressure image for the current gripper opening and grasped object."""
    if opening < 0:
        raise ValueError("opening must be >= 0")
    pressures = np.zeros((GRID, GRID))
    if obj is not None and opening < obj.width:
        over_closure = obj.width - opening
        pressures[footprint_mask(obj.kind)] = stiffness * over_closure
    pressures.setflags(write=False)
    return TactileFrame(pressures=pressures, timestamp_ms=now_ms)


def safety_clamp(
    frame: TactileFrame,
    limit: float,
    command: RobotCommand,
    current_opening: float,
) -> RobotCommand:
    """Block further closing once any cell exceeds the pressure limit.

    Only gripper-closing commands are rewritten (to hold the current
    opening); everything else passes through untouched.
    """
    if limit <= 0:
        raise ValueError("limit must be > 0")
    if (
        isinstance(command, GripperSet)
        and command.opening < current_opening
        and frame.max_pressure() > limit
    ):
        return GripperSet(current_opening)
    return command


def sensor_timestamps(duration_ms: float) -> Iterator[float]:
    """120 Hz schedule: exact rational multiples 1000*k/120, no drift."""
    k = 0
    while True:
        ts = 1000.0 * k / SENSOR_RATE_HZ
        if ts >= duration_ms:
            return
        yield ts
        k += 1


def tactile_clock(
    state_at: Callable[[float], tuple[float, SceneObject | None]],
    duration_ms: float,
    stiffness: float = DEFAULT_STIFFNESS,
) -> Iterator[TactileFrame]:
    """Stream frames at the sensor rate, sampling (opening, object) at each tick."""
    for ts in sensor_timestamps(duration_ms):
        opening, obj = state_at(ts)
        yield render_frame(opening, obj, ts, stiffness)
