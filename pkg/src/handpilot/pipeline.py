"""Frame-to-command pipeline shared by trace replay and the live server.

One pipeline owns one session: per-user gesture FSMs, the arbitration state
machine, and the EMA-smoothed move target per user.  Feeding it the same
frame stream always yields the same command stream; the server and the
offline replay both call into this module, which is what makes the wire
path equivalent to the in-process path.

Clock domains: the gesture FSMs and offline arbitration run on stream
timestamps; the live server additionally ticks arbitration on wall time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import arbitration as arb
from .errors import DegenerateHand
from .features import feature_vector
from .gbdt import Ensemble, predict_proba
from .gestures import FsmConfig, GestureFsm, Hold, MoveTcp, map_to_command
from .hands import CLASS_ORDER, GestureClass, Hand, HandFrame


@dataclass(frozen=True)
class GestureTelemetry:
    user: str
    hand: Hand
    gesture: GestureClass
    proba: tuple[float, float, float, float]


@dataclass(frozen=True)
class AcceptedCommand:
    user: str
    timestamp_ms: int
    command: object


@dataclass
class FrameResult:
    telemetry: GestureTelemetry | None = None
    accepted: list[AcceptedCommand] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)  # (user, reason)
    control_events: list = field(default_factory=list)
    stable: dict[Hand, GestureClass] = field(default_factory=dict)
    degenerate: bool = False


class TeleopPipeline:
    def __init__(
        self,
        model: Ensemble,
        fsm_config: FsmConfig | None = None,
        policy: arb.Policy = arb.Policy.EXCLUSIVE_TOKEN,
        session_id: str = "default",
        auto_grant: bool = True,
    ):
        self.model = model
        self.config = fsm_config or FsmConfig()
        self.session = arb.new_session(session_id, policy)
        self.auto_grant = auto_grant
        self.fsms: dict[str, GestureFsm] = {}
        self.move_targets: dict[str, tuple[float, float, float] | None] = {}

    def join(self, user: str, now_ms: int = 0) -> None:
        self.session = arb.join(self.session, user, now_ms)
        self.fsms.setdefault(user, GestureFsm(self.config))
        self.move_targets.setdefault(user, None)

    def leave(self, user: str, now_ms: int) -> list:
        self.session, events = arb.leave(self.session, user, now_ms)
        self.fsms.pop(user, None)
        self.move_targets.pop(user, None)
        return events

    def tick_control(self, now_ms: int) -> list:
        self.session, events = arb.tick(self.session, now_ms)
        return events

    def route_command(self, user: str, command, now_ms: int) -> FrameResult:
        """Route one explicit command (bypassing gestures) through arbitration."""
        result = FrameResult()
        self._route(user, command, now_ms, result)
        return result

    def _route(self, user: str, command, now_ms: int, result: FrameResult) -> None:
        if isinstance(command, Hold):
            return  # Hold means "no new command"; nothing to route.
        if (
            self.auto_grant
            and self.session.policy is arb.Policy.EXCLUSIVE_TOKEN
            and self.session.token_holder is None
            and user in self.session.users
        ):
            self.session, granted = arb.request_control(self.session, user, now_ms)
            result.control_events.append(arb.ControlGranted(user))
        self.session, outcome = arb.route_command(self.session, user, command, now_ms)
        if isinstance(outcome, arb.Accepted):
            result.accepted.append(AcceptedCommand(user, now_ms, command))
            if isinstance(command, MoveTcp):
                self.move_targets[user] = (command.x, command.y, command.z)
        else:
            result.rejected.append((user, outcome.reason))

    def process_frame(self, frame: HandFrame) -> FrameResult:
        """Classify one frame, step the owner FSM, and route mapped commands."""
        user = frame.user_id
        if user not in self.fsms:
            self.join(user, frame.timestamp_ms)
        result = FrameResult()
        now = frame.timestamp_ms

        try:
            fv = feature_vector(frame)
        except DegenerateHand:
            result.degenerate = True
            return result
        proba = predict_proba(self.model, fv)
        gesture = CLASS_ORDER[int(np.argmax(proba))]
        result.telemetry = GestureTelemetry(
            user=user,
            hand=frame.hand,
            gesture=gesture,
            proba=tuple(float(p) for p in proba),
        )

        # Landmark activity from the token holder counts against idle timeout.
        self.session = arb.touch(self.session, user, now)

        fsm = self.fsms[user]
        step = fsm.step({frame.hand: (gesture, proba, frame)}, now)
        result.stable = step.stable

        for hand, effective in step.actions.items():
            command = map_to_command(
                effective, frame, self.config, self.move_targets.get(user)
            )
            self._route(user, command, now, result)
        return result


def replay_trace(frames, model: Ensemble, fsm_config: FsmConfig | None = None,
                 policy: arb.Policy = arb.Policy.EXCLUSIVE_TOKEN) -> list[AcceptedCommand]:
    """Run a frame stream through a fresh pipeline; returns accepted commands."""
    pipeline = TeleopPipeline(model, fsm_config, policy)
    commands: list[AcceptedCommand] = []
    for frame in frames:
        result = pipeline.process_frame(frame)
        commands.extend(result.accepted)
    return commands
