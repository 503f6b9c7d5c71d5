"""Debounced gesture state machine and gesture-to-command mapping.

Per-frame classifier output is noisy; a hand's stable gesture only changes
after ``debounce_n`` consecutive confident frames of the same new class.
The bimanual composite works as a modifier: while one hand holds a stable
grab, the opposite hand's thumb-to-index distance drives the gripper
opening instead of that hand's own gesture.

One FSM instance belongs to one (user, session) and is stepped by a single
owner; instances are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import thumb_index_distance
from .hands import MIDDLE_MCP, WRIST, GestureClass, Hand, HandFrame


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned robot xy box the image plane maps onto."""

    x_min: float = 0.35
    x_max: float = 0.75
    y_min: float = -0.20
    y_max: float = 0.20

    def from_image(self, u: float, v: float) -> tuple[float, float]:
        # v grows downward in the image; robot y grows the other way.
        x = self.x_min + u * (self.x_max - self.x_min)
        y = self.y_min + (1.0 - v) * (self.y_max - self.y_min)
        return x, y

    def to_image(self, x: float, y: float) -> tuple[float, float]:
        u = (x - self.x_min) / (self.x_max - self.x_min)
        v = 1.0 - (y - self.y_min) / (self.y_max - self.y_min)
        return u, v

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (
            min(max(x, self.x_min), self.x_max),
            min(max(y, self.y_min), self.y_max),
        )


@dataclass(frozen=True)
class FsmConfig:
    debounce_n: int = 5
    min_confidence: float = 0.6
    absence_timeout_ms: int = 700
    ema_alpha: float = 0.35
    workspace: Workspace = field(default_factory=Workspace)
    z_fixed: float = 0.15
    yaw_gain: float = 1.0
    grip_min: float = 0.0
    grip_max: float = 0.085
    # Thumb-to-index distance (normalized units) that maps to a fully
    # open gripper; the open-palm template measures ~1.30.
    fingerdistance_span: float = 1.3


# --- robot command values ----------------------------------------------------


@dataclass(frozen=True)
class MoveTcp:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SetYaw:
    yaw: float


@dataclass(frozen=True)
class GripperSet:
    opening: float


@dataclass(frozen=True)
class Hold:
    pass


RobotCommand = MoveTcp | SetYaw | GripperSet | Hold


@dataclass(frozen=True)
class FingerDistance:
    """Composite bimanual gesture event: drives gripper opening."""

    distance: float


@dataclass(frozen=True)
class StableChanged:
    hand: Hand
    gesture: GestureClass


# --- the state machine --------------------------------------------------------


@dataclass
class _HandTrack:
    stable: GestureClass = GestureClass.NOGESTURE
    candidate: GestureClass | None = None
    candidate_count: int = 0
    last_seen_ms: int | None = None


@dataclass(frozen=True)
class StepResult:
    stable: dict[Hand, GestureClass]
    changed: tuple[StableChanged, ...]
    # Effective gesture per hand present in this step, for command mapping:
    # the composite event overrides the hand's own class, and a grab hand
    # acting as the composite's modifier maps to nothing.
    actions: dict[Hand, GestureClass | FingerDistance | None]


class GestureFsm:
    def __init__(self, config: FsmConfig | None = None):
        self.config = config or FsmConfig()
        self.tracks = {Hand.LEFT: _HandTrack(), Hand.RIGHT: _HandTrack()}

    def _present(self, hand: Hand, now_ms: int) -> bool:
        seen = self.tracks[hand].last_seen_ms
        return seen is not None and now_ms - seen <= self.config.absence_timeout_ms

    def step(
        self,
        predictions: dict[Hand, tuple[GestureClass, np.ndarray, HandFrame]],
        now_ms: int,
    ) -> StepResult:
        """Advance the FSM by one frame batch (possibly empty, for timeouts)."""
        cfg = self.config
        changed: list[StableChanged] = []

        # Absence: a hand not seen for longer than the timeout falls back
        # to NoGesture whether or not it appears in this batch.
        for hand, track in self.tracks.items():
            if hand in predictions or track.last_seen_ms is None:
                continue
            if now_ms - track.last_seen_ms > cfg.absence_timeout_ms:
                if track.stable is not GestureClass.NOGESTURE:
                    track.stable = GestureClass.NOGESTURE
                    changed.append(StableChanged(hand, track.stable))
                track.candidate = None
                track.candidate_count = 0

        for hand, (cls, proba, _frame) in predictions.items():
            track = self.tracks[hand]
            track.last_seen_ms = now_ms
            confident = float(np.max(proba)) >= cfg.min_confidence
            if not confident:
                track.candidate = None
                track.candidate_count = 0
                continue
            if cls is track.stable:
                track.candidate = None
                track.candidate_count = 0
                continue
            if cls is track.candidate:
                track.candidate_count += 1
            else:
                track.candidate = cls
                track.candidate_count = 1
            if track.candidate_count >= cfg.debounce_n:
                track.stable = cls
                track.candidate = None
                track.candidate_count = 0
                changed.append(StableChanged(hand, cls))

        actions: dict[Hand, GestureClass | FingerDistance | None] = {}
        for hand, (cls, proba, frame) in predictions.items():
            other = Hand.LEFT if hand is Hand.RIGHT else Hand.RIGHT
            other_grab = self.tracks[other].stable is GestureClass.GRAB and self._present(
                other, now_ms
            )
            mine = self.tracks[hand].stable
            if other_grab:
                actions[hand] = FingerDistance(thumb_index_distance(frame))
            elif mine is GestureClass.GRAB and self._present(other, now_ms):
                # This hand is the composite's modifier; the opposite hand
                # owns the gripper, so emit nothing here.
                actions[hand] = None
            else:
                actions[hand] = mine

        return StepResult(
            stable={h: t.stable for h, t in self.tracks.items()},
            changed=tuple(changed),
            actions=actions,
        )


# --- command mapping ----------------------------------------------------------


def wrist_yaw(frame: HandFrame, yaw_gain: float) -> float:
    """Signed in-plane angle of the wrist-to-middle-MCP vector from image-up."""
    wrist = frame.landmarks[WRIST]
    mcp = frame.landmarks[MIDDLE_MCP]
    du = mcp.x - wrist.x
    dv = mcp.y - wrist.y
    return yaw_gain * math.atan2(du, -dv)


def map_to_command(
    gesture: GestureClass | FingerDistance | None,
    frame: HandFrame,
    config: FsmConfig,
    prev_target: tuple[float, float, float] | None = None,
) -> RobotCommand:
    """Map one hand's effective gesture to a robot command.

    ``prev_target`` is the previously commanded TCP target for this user;
    move targets are EMA-smoothed against it (alpha on the new sample).
    """
    if gesture is None:
        return Hold()
    if isinstance(gesture, FingerDistance):
        span = config.fingerdistance_span
        ratio = min(max(gesture.distance / span, 0.0), 1.0)
        return GripperSet(config.grip_min + ratio * (config.grip_max - config.grip_min))
    if gesture is GestureClass.MOVE:
        wrist = frame.landmarks[WRIST]
        x, y = config.workspace.from_image(wrist.x, wrist.y)
        target = (x, y, config.z_fixed)
        if prev_target is not None:
            a = config.ema_alpha
            target = tuple(a * t + (1.0 - a) * p for t, p in zip(target, prev_target))
        cx, cy = config.workspace.clamp(target[0], target[1])
        return MoveTcp(cx, cy, target[2])
    if gesture is GestureClass.ANGLE:
        return SetYaw(wrist_yaw(frame, config.yaw_gain))
    if gesture is GestureClass.GRAB:
        return GripperSet(config.grip_min)
    return Hold()
