"""Bundled demo scenario: scripted landmark choreography plus a scene.

The golden trace steers the arm over a pipette, closes the gripper on it,
carries it to a test tube, and releases it there with the bimanual
fingerdistance gesture.  The trace is generated (not recorded), so it is a
pure function and the bundled fixture can always be regenerated
byte-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import SchemaViolation
from .gestures import FsmConfig
from .hands import GestureClass, Hand, HandFrame
from .sim import TICK_MS, RobotCell, default_scene
from .sim_types import ObjectKind, SceneObject
from .synth import frame_from_points, pose_skeleton, project_to_image, template_bends
from .tactile import footprint_mask

DEMO_USER = "demo"
FRAME_PERIOD_MS = 10  # command per simulator tick
HAND_SCALE = 0.12

PIPETTE_XY = (0.45, -0.10)
TUBE_XY = (0.62, 0.10)


def _wrist_uv(xy: tuple[float, float], config: FsmConfig) -> tuple[float, float]:
    return config.workspace.to_image(xy[0], xy[1])


def _frame(
    gesture: GestureClass,
    wrist_uv: tuple[float, float],
    ts: int,
    hand: Hand = Hand.RIGHT,
) -> HandFrame:
    bends = template_bends(gesture, np.random.default_rng(0))
    pts = pose_skeleton(bends, hand)
    img = project_to_image(pts, wrist_uv, 0.0, HAND_SCALE)
    return frame_from_points(img, user_id=DEMO_USER, hand=hand, timestamp_ms=ts)


@dataclass
class _Script:
    config: FsmConfig
    frames: list[HandFrame] = field(default_factory=list)
    t: int = 0

    def hold(self, gesture: GestureClass, xy, duration_ms: int, hand=Hand.RIGHT):
        uv = _wrist_uv(xy, self.config)
        for _ in range(duration_ms // FRAME_PERIOD_MS):
            self.frames.append(_frame(gesture, uv, self.t, hand))
            self.t += FRAME_PERIOD_MS

    def glide(self, gesture: GestureClass, xy_from, xy_to, duration_ms: int, hand=Hand.RIGHT):
        steps = duration_ms // FRAME_PERIOD_MS
        for i in range(steps):
            s = i / max(steps - 1, 1)
            xy = (
                xy_from[0] + s * (xy_to[0] - xy_from[0]),
                xy_from[1] + s * (xy_to[1] - xy_from[1]),
            )
            uv = _wrist_uv(xy, self.config)
            self.frames.append(_frame(gesture, uv, self.t, hand))
            self.t += FRAME_PERIOD_MS

    def bimanual(self, right_xy, duration_ms: int):
        """Left fist (modifier) plus right open hand: fingerdistance open."""
        uv_right = _wrist_uv(right_xy, self.config)
        uv_left = (0.2, 0.5)
        for _ in range(duration_ms // FRAME_PERIOD_MS):
            self.frames.append(_frame(GestureClass.GRAB, uv_left, self.t, Hand.LEFT))
            self.frames.append(_frame(GestureClass.MOVE, uv_right, self.t, Hand.RIGHT))
            self.t += FRAME_PERIOD_MS


def golden_trace(config: FsmConfig | None = None) -> list[HandFrame]:
    """The pick-the-pipette-into-the-tube choreography as landmark frames."""
    config = config or FsmConfig()
    center = config.workspace.from_image(0.5, 0.5)[:2]
    script = _Script(config)
    # Approach: move gesture gliding onto the pipette, then hover to settle.
    script.glide(GestureClass.MOVE, center, PIPETTE_XY, 1200)
    script.hold(GestureClass.MOVE, PIPETTE_XY, 1300)
    # Close on it (held grab = keep closing; the fragile clamp stops it).
    script.hold(GestureClass.GRAB, PIPETTE_XY, 2000)
    # Relax the hand; the gripper keeps its grip.
    script.hold(GestureClass.NOGESTURE, PIPETTE_XY, 700)
    # Carry to the tube.
    script.glide(GestureClass.MOVE, PIPETTE_XY, TUBE_XY, 1500)
    script.hold(GestureClass.MOVE, TUBE_XY, 1500)
    # Open with fingerdistance: left fist modifies, right hand spans wide.
    script.bimanual(TUBE_XY, 1500)
    script.hold(GestureClass.NOGESTURE, TUBE_XY, 300)
    return script.frames


# --- scene files -------------------------------------------------------------


def scene_to_json(objects: list[SceneObject]) -> str:
    entries = []
    for obj in objects:
        entry = {
            "kind": obj.kind.value,
            "position": list(obj.position),
            "width": obj.width,
        }
        if math.isfinite(obj.fragile_pressure_limit):
            entry["fragile_pressure_limit"] = obj.fragile_pressure_limit
        entries.append(entry)
    return json.dumps({"objects": entries}, indent=2) + "\n"


def scene_from_json(text: str) -> list[SceneObject]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"scene file is not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("objects"), list):
        raise SchemaViolation("scene file must be an object with an 'objects' list")
    out = []
    for entry in obj["objects"]:
        if not isinstance(entry, dict):
            raise SchemaViolation("scene objects must be JSON objects")
        unknown = set(entry) - {"kind", "position", "width", "fragile_pressure_limit"}
        if unknown:
            raise SchemaViolation(f"unknown scene keys: {sorted(unknown)}")
        try:
            kind = ObjectKind(entry["kind"])
        except (KeyError, ValueError):
            raise SchemaViolation(f"bad object kind {entry.get('kind')!r}") from None
        pos = entry.get("position")
        if not isinstance(pos, list) or len(pos) != 3:
            raise SchemaViolation("object position must be [x, y, z]")
        width = entry.get("width")
        if not isinstance(width, (int, float)) or width <= 0:
            raise SchemaViolation("object width must be a positive number")
        limit = entry.get("fragile_pressure_limit", float("inf"))
        out.append(
            SceneObject(
                kind=kind,
                position=tuple(float(v) for v in pos),
                width=float(width),
                fragile_pressure_limit=float(limit),
            )
        )
    return out


def bundled_scene_text() -> str:
    return scene_to_json(default_scene())


def load_bundled(name: str) -> str:
    return resources.files("handpilot.data").joinpath(name).read_text()


# --- headless simulation ------------------------------------------------------


def run_simulation(
    commands: list[dict],
    scene: list[SceneObject],
    tick_ms: int = TICK_MS,
    settle_ms: int = 1000,
    log_every: int = 3,
    safety: bool = True,
) -> list[dict]:
    """Drive the robot cell from a timed command stream; returns log records.

    Commands are dicts {"ts", "user", "cmd"} with cmd as a protocol command
    payload.  Commands landing within one tick window are latched: the last
    one wins.  Ticks with no new command apply Hold (no motion).
    """
    from .protocol import payload_to_command

    cell = RobotCell(scene=scene)
    log: list[dict] = []
    if commands:
        end_ms = max(c["ts"] for c in commands) + settle_ms
    else:
        end_ms = settle_ms
    pending = sorted(commands, key=lambda c: c["ts"])
    idx = 0
    tick_index = 0
    carry_stats = {"max_pressure": 0.0, "active_cells": 0}
    events_logged = 0
    while cell.time_ms < end_ms:
        window_end = cell.time_ms + tick_ms
        command = None
        while idx < len(pending) and pending[idx]["ts"] < window_end:
            command = payload_to_command(pending[idx]["cmd"])
            idx += 1
        if safety and command is not None:
            command = cell.apply_safety(command)
        state = cell.step(command, tick_ms)
        tactile = cell.tactile()
        if cell.grasped_object() is not None:
            carry_stats["max_pressure"] = max(
                carry_stats["max_pressure"], tactile.max_pressure()
            )
            carry_stats["active_cells"] = max(
                carry_stats["active_cells"], tactile.active_cells()
            )
        for event in cell.grasp_events[events_logged:]:
            log.append(
                {
                    "event": event.kind,
                    "t": event.time_ms,
                    "object": event.object_kind.value,
                    "position": [round(v, 6) for v in event.position],
                }
            )
            events_logged += 1
        if tick_index % log_every == 0:
            log.append(
                {
                    "t": state.time_ms,
                    "q": [round(float(v), 6) for v in state.q],
                    "tcp": [round(float(v), 6) for v in state.tcp.position],
                    "quat": [round(float(v), 6) for v in state.tcp.quaternion],
                    "gripper": round(state.gripper_opening, 6),
                    "max_pressure": round(tactile.max_pressure(), 6),
                    "active_cells": tactile.active_cells(),
                    "grasped": (
                        cell.grasped_object().kind.value
                        if cell.grasped_object()
                        else None
                    ),
                }
            )
        tick_index += 1
    log.append(_summary(cell, scene, carry_stats))
    return log


def _summary(cell: RobotCell, scene: list[SceneObject], carry_stats: dict) -> dict:
    objects = [
        {
            "kind": obj.spec.kind.value,
            "position": [round(float(v), 6) for v in obj.position],
            "grasped": obj.grasped,
        }
        for obj in cell.objects
    ]
    tube = next((o for o in cell.objects if o.spec.kind is ObjectKind.TUBE), None)
    pipette = next((o for o in cell.objects if o.spec.kind is ObjectKind.PIPETTE), None)
    released_over_tube = None
    release_distance = None
    if tube is not None and pipette is not None:
        release_distance = float(
            np.linalg.norm(pipette.position[:2] - tube.position[:2])
        )
        released_over_tube = (
            not pipette.grasped
            and any(e.kind == "grasp" for e in cell.grasp_events)
            and any(e.kind == "release" for e in cell.grasp_events)
            and release_distance <= 0.05
        )
    narrow_band = int(footprint_mask(ObjectKind.PIPETTE).sum())
    return {
        "event": "summary",
        "duration_ms": cell.time_ms,
        "tcp": [round(float(v), 6) for v in cell.state().tcp.position],
        "gripper": round(cell.gripper_opening, 6),
        "objects": objects,
        "grasp_events": [
            {
                "event": e.kind,
                "t": e.time_ms,
                "object": e.object_kind.value,
                "position": [round(v, 6) for v in e.position],
            }
            for e in cell.grasp_events
        ],
        "carry_max_pressure": round(carry_stats["max_pressure"], 6),
        "carry_active_cells": carry_stats["active_cells"],
        "carry_footprint_is_narrow_band": carry_stats["active_cells"] == narrow_band,
        "pipette_release_distance_to_tube": (
            round(release_distance, 6) if release_distance is not None else None
        ),
        "pipette_released_over_tube": released_over_tube,
    }
