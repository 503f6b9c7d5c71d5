"""Scene object types shared by the robot cell and the tactile model."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ObjectKind(Enum):
    PIPETTE = "Pipette"
    TUBE = "Tube"


DEFAULT_WIDTHS = {ObjectKind.PIPETTE: 0.010, ObjectKind.TUBE: 0.030}


@dataclass(frozen=True)
class SceneObject:
    kind: ObjectKind
    position: tuple[float, float, float]
    width: float
    fragile_pressure_limit: float = float("inf")

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("object width must be positive")
