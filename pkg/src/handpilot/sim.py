"""Deterministic simulated robot cell: arm, gripper, and tabletop objects.

The cell advances on fixed ticks under single ownership.  Each tick applies
at most one command: move commands solve IK toward the composed target pose
(commanded position plus commanded yaw on a tool-down orientation) and step
the joints at the speed limit, gripper commands slew the opening, and Hold
freezes motion entirely.  Objects are grasped when the gripper closes past
their width while the TCP is over them, carried with the TCP, and dropped
in place when the gripper reopens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kinematics as kin
from .errors import Unreachable
from .gestures import GripperSet, Hold, MoveTcp, RobotCommand, SetYaw
from .sim_types import ObjectKind, SceneObject
from .tactile import DEFAULT_STIFFNESS, TactileFrame, render_frame, safety_clamp

TICK_MS = 10
GRIPPER_SPEED = 0.1  # m/s
GRIP_MAX = 0.085
PICKUP_RADIUS = 0.05  # m, TCP-to-object distance that allows a grasp

# Tool-down rest configuration with the TCP at (0.55, 0, 0.30), centered
# over the workspace at hover height.
HOME_Q = (0.302787, -1.495037, -2.296727, -0.920625, 1.570796, 1.873584)


@dataclass(frozen=True)
class RobotState:
    q: tuple[float, ...]
    gripper_opening: float
    tcp: kin.Pose
    time_ms: int
    ik_unreachable: bool = False


@dataclass
class _ObjectState:
    spec: SceneObject
    position: np.ndarray
    grasped: bool = False


@dataclass(frozen=True)
class GraspEvent:
    time_ms: int
    kind: str  # "grasp" | "release"
    object_kind: ObjectKind
    position: tuple[float, float, float]


class RobotCell:
    """Single-owner robot cell simulator."""

    def __init__(
        self,
        chain: kin.KinematicChain | None = None,
        scene: list[SceneObject] | None = None,
        q0=HOME_Q,
        gripper_opening: float = GRIP_MAX,
        stiffness: float = DEFAULT_STIFFNESS,
        ik_settings: kin.IkSettings | None = None,
    ):
        self.chain = chain or kin.DEFAULT_CHAIN
        self.q = np.asarray(q0, dtype=np.float64).copy()
        self.gripper_opening = float(gripper_opening)
        self.time_ms = 0
        self.ik_unreachable = False
        self.stiffness = stiffness
        self.ik_settings = ik_settings or kin.IkSettings()
        self.objects = [
            _ObjectState(spec=o, position=np.array(o.position, dtype=np.float64))
            for o in (scene or [])
        ]
        self.grasp_events: list[GraspEvent] = []
        self._tcp = kin.fk(self.chain, self.q)
        self._target_pos: np.ndarray | None = None
        self._target_yaw = 0.0

    # -- queries ---------------------------------------------------------

    def state(self) -> RobotState:
        return RobotState(
            q=tuple(float(v) for v in self.q),
            gripper_opening=self.gripper_opening,
            tcp=self._tcp,
            time_ms=self.time_ms,
            ik_unreachable=self.ik_unreachable,
        )

    def grasped_object(self) -> SceneObject | None:
        for obj in self.objects:
            if obj.grasped:
                return obj.spec
        return None

    def tactile(self, now_ms: float | None = None) -> TactileFrame:
        ts = self.time_ms if now_ms is None else now_ms
        return render_frame(
            self.gripper_opening, self.grasped_object(), ts, self.stiffness
        )

    def apply_safety(self, command: RobotCommand) -> RobotCommand:
        """Clamp a gripper-closing command against the grasped object's limit."""
        obj = self.grasped_object()
        if obj is None or not math.isfinite(obj.fragile_pressure_limit):
            return command
        return safety_clamp(
            self.tactile(), obj.fragile_pressure_limit, command, self.gripper_opening
        )

    # -- stepping ---------------------------------------------------------

    def step(self, command: RobotCommand | None, dt_ms: int = TICK_MS) -> RobotState:
        """Advance one tick under the given command (None and Hold freeze)."""
        if command is None or isinstance(command, Hold):
            self.time_ms += dt_ms
            return self.state()

        if isinstance(command, (MoveTcp, SetYaw)):
            if isinstance(command, MoveTcp):
                self._target_pos = np.array([command.x, command.y, command.z])
            else:
                self._target_yaw = command.yaw
                if self._target_pos is None:
                    self._target_pos = self._tcp.position_array()
            target = kin.tool_down_pose(
                float(self._target_pos[0]),
                float(self._target_pos[1]),
                float(self._target_pos[2]),
                self._target_yaw,
            )
            try:
                q_goal = kin.ik(self.chain, target, self.q, self.ik_settings)
                self.ik_unreachable = False
            except Unreachable:
                self.ik_unreachable = True
                q_goal = None
            if q_goal is not None:
                max_step = self.chain.max_joint_speed * dt_ms / 1000.0
                delta = np.clip(q_goal - self.q, -max_step, max_step)
                self.q = self.chain.clamp(self.q + delta)
                self._tcp = kin.fk(self.chain, self.q)
                self._carry_grasped()
        elif isinstance(command, GripperSet):
            goal = min(max(command.opening, 0.0), GRIP_MAX)
            max_step = GRIPPER_SPEED * dt_ms / 1000.0
            previous = self.gripper_opening
            delta = min(max(goal - previous, -max_step), max_step)
            self.gripper_opening = previous + delta
            self._update_grasp(previous)

        self.time_ms += dt_ms
        return self.state()

    def _tcp_position(self) -> np.ndarray:
        return self._tcp.position_array()

    def _carry_grasped(self) -> None:
        tcp = self._tcp_position()
        for obj in self.objects:
            if obj.grasped:
                obj.position = tcp.copy()

    def _update_grasp(self, previous_opening: float) -> None:
        tcp = self._tcp_position()
        for obj in self.objects:
            if obj.grasped:
                if self.gripper_opening >= obj.spec.width:
                    obj.grasped = False
                    obj.position = tcp.copy()
                    self.grasp_events.append(
                        GraspEvent(
                            self.time_ms,
                            "release",
                            obj.spec.kind,
                            tuple(float(v) for v in obj.position),
                        )
                    )
            elif (
                previous_opening >= obj.spec.width > self.gripper_opening
                and float(np.linalg.norm(tcp - obj.position)) <= PICKUP_RADIUS
            ):
                obj.grasped = True
                self.grasp_events.append(
                    GraspEvent(
                        self.time_ms,
                        "grasp",
                        obj.spec.kind,
                        tuple(float(v) for v in obj.position),
                    )
                )


def default_scene() -> list[SceneObject]:
    """Tabletop for the pick-and-place demo: a pipette and a test tube."""
    return [
        SceneObject(
            kind=ObjectKind.PIPETTE,
            position=(0.45, -0.10, 0.15),
            width=0.010,
            fragile_pressure_limit=300.0,
        ),
        SceneObject(
            kind=ObjectKind.TUBE,
            position=(0.62, 0.10, 0.15),
            width=0.030,
        ),
    ]
