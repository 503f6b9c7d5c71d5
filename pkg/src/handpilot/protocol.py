"""Versioned wire protocol: one JSON envelope per message frame.

Envelope: ``{"v":1,"type":...,"ts":...,"payload":{...}}`` with an optional
``dropped`` counter (frames shed for a slow client since its last delivery)
between ``ts`` and ``payload``.  Encoding is canonical: UTF-8, no
insignificant whitespace, keys in the documented order below, so equal
messages encode to equal bytes.

Payload key order by type:

  join            session, user
  joined          session, user, policy
  landmark_frame  user, hand, ts, conf, lm
  control_request (empty)
  control_grant   user
  control_revoked user, reason
  gesture         hand, class, proba
  command         kind, then the command's fields (x,y,z | yaw | opening)
  robot_state     q, tcp{pos,quat}, gripper, ik_unreachable
  tactile_frame   grid, ts
  error           code, detail

The same bytes travel as one text frame per message over a browser socket,
or with a 4-byte big-endian length prefix over a raw stream.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    MalformedMessage,
    SchemaViolation,
    UnknownType,
    UnsupportedVersion,
)
from .gestures import GripperSet, Hold, MoveTcp, RobotCommand, SetYaw
from .hands import Hand, HandFrame, Landmark, validate_frame
from .sim import RobotState
from .tactile import GRID, TactileFrame

PROTOCOL_VERSION = 1

MESSAGE_TYPES = (
    "join",
    "joined",
    "landmark_frame",
    "control_request",
    "control_grant",
    "control_revoked",
    "gesture",
    "command",
    "robot_state",
    "tactile_frame",
    "error",
)


@dataclass(frozen=True)
class Envelope:
    type: str
    ts: int
    payload: dict
    dropped: int | None = None


def _require_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str):
        raise SchemaViolation(f"{key} must be a string")
    return value


def _require_number(payload: dict, key: str) -> float:
    value = payload.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaViolation(f"{key} must be a number")
    if not math.isfinite(value):
        raise SchemaViolation(f"{key} must be finite")
    return float(value)


def _require_keys(payload: dict, keys: tuple[str, ...]) -> None:
    if not isinstance(payload, dict):
        raise SchemaViolation("payload must be an object")
    unknown = set(payload) - set(keys)
    if unknown:
        raise SchemaViolation(f"unknown payload keys: {sorted(unknown)}")
    missing = set(keys) - set(payload)
    if missing:
        raise SchemaViolation(f"missing payload keys: {sorted(missing)}")


def _number_list(value, length: int, what: str) -> list[float]:
    if not isinstance(value, list) or len(value) != length:
        raise SchemaViolation(f"{what} must be a list of {length} numbers")
    out = []
    for v in value:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise SchemaViolation(f"{what} entries must be finite numbers")
        out.append(float(v))
    return out


# --- per-type canonicalizers -------------------------------------------------
# Each takes the raw payload, validates it, and returns a dict whose key
# insertion order is the canonical wire order.


def _canon_join(p: dict) -> dict:
    _require_keys(p, ("session", "user"))
    return {"session": _require_str(p, "session"), "user": _require_str(p, "user")}


def _canon_joined(p: dict) -> dict:
    _require_keys(p, ("session", "user", "policy"))
    policy = _require_str(p, "policy")
    if policy not in ("ExclusiveToken", "LastWriter"):
        raise SchemaViolation(f"unknown policy {policy!r}")
    return {
        "session": _require_str(p, "session"),
        "user": _require_str(p, "user"),
        "policy": policy,
    }


def _canon_landmark_frame(p: dict) -> dict:
    _require_keys(p, ("user", "hand", "ts", "conf", "lm"))
    frame = payload_to_frame(p)
    return frame_payload(frame)


def _canon_empty(p: dict) -> dict:
    _require_keys(p, ())
    return {}


def _canon_control_grant(p: dict) -> dict:
    _require_keys(p, ("user",))
    return {"user": _require_str(p, "user")}


def _canon_control_revoked(p: dict) -> dict:
    _require_keys(p, ("user", "reason"))
    return {"user": _require_str(p, "user"), "reason": _require_str(p, "reason")}


def _canon_gesture(p: dict) -> dict:
    _require_keys(p, ("hand", "class", "proba"))
    hand = _require_str(p, "hand")
    if hand not in ("Left", "Right"):
        raise SchemaViolation(f"hand {hand!r} not one of Left/Right")
    cls = _require_str(p, "class")
    if cls not in ("Move", "Angle", "Grab", "NoGesture"):
        raise SchemaViolation(f"class {cls!r} is not a gesture class")
    return {"hand": hand, "class": cls, "proba": _number_list(p["proba"], 4, "proba")}


def _canon_command(p: dict) -> dict:
    command = payload_to_command(p)
    return command_payload(command)


def _canon_robot_state(p: dict) -> dict:
    _require_keys(p, ("q", "tcp", "gripper", "ik_unreachable"))
    q = _number_list(p["q"], 6, "q")
    tcp = p["tcp"]
    if not isinstance(tcp, dict) or set(tcp) != {"pos", "quat"}:
        raise SchemaViolation("tcp must be an object with pos and quat")
    pos = _number_list(tcp["pos"], 3, "tcp.pos")
    quat = _number_list(tcp["quat"], 4, "tcp.quat")
    gripper = _require_number(p, "gripper")
    flag = p.get("ik_unreachable")
    if not isinstance(flag, bool):
        raise SchemaViolation("ik_unreachable must be a boolean")
    return {
        "q": q,
        "tcp": {"pos": pos, "quat": quat},
        "gripper": gripper,
        "ik_unreachable": flag,
    }


def _canon_tactile_frame(p: dict) -> dict:
    _require_keys(p, ("grid", "ts"))
    grid = p["grid"]
    if not isinstance(grid, list) or len(grid) != GRID:
        raise SchemaViolation(f"grid must be {GRID} rows")
    rows = [_number_list(row, GRID, "grid row") for row in grid]
    for row in rows:
        if any(v < 0 for v in row):
            raise SchemaViolation("grid entries must be non-negative")
    ts = _require_number(p, "ts")
    return {"grid": rows, "ts": ts}


def _canon_error(p: dict) -> dict:
    _require_keys(p, ("code", "detail"))
    return {"code": _require_str(p, "code"), "detail": _require_str(p, "detail")}


_CANONICALIZERS = {
    "join": _canon_join,
    "joined": _canon_joined,
    "landmark_frame": _canon_landmark_frame,
    "control_request": _canon_empty,
    "control_grant": _canon_control_grant,
    "control_revoked": _canon_control_revoked,
    "gesture": _canon_gesture,
    "command": _canon_command,
    "robot_state": _canon_robot_state,
    "tactile_frame": _canon_tactile_frame,
    "error": _canon_error,
}


# --- envelope encode / decode -------------------------------------------------


def encode_message(message: Envelope) -> bytes:
    """Canonical bytes of an envelope (validates the payload on the way out)."""
    if message.type not in _CANONICALIZERS:
        raise UnknownType(f"unknown message type {message.type!r}")
    if not isinstance(message.ts, int) or isinstance(message.ts, bool):
        raise SchemaViolation("envelope ts must be an integer")
    payload = _CANONICALIZERS[message.type](message.payload)
    obj: dict = {"v": PROTOCOL_VERSION, "type": message.type, "ts": message.ts}
    if message.dropped is not None:
        obj["dropped"] = message.dropped
    obj["payload"] = payload
    return json.dumps(obj, separators=(",", ":")).encode()


def decode_message(data: bytes | str) -> Envelope:
    if isinstance(data, bytes):
        try:
            data = data.decode()
        except UnicodeDecodeError as exc:
            raise MalformedMessage(f"not UTF-8: {exc}") from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedMessage(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedMessage("message is not a JSON object")
    if "v" not in obj:
        raise MalformedMessage("missing protocol version")
    if obj["v"] != PROTOCOL_VERSION:
        raise UnsupportedVersion(f"protocol version {obj['v']!r}")
    unknown = set(obj) - {"v", "type", "ts", "dropped", "payload"}
    if unknown:
        raise SchemaViolation(f"unknown envelope keys: {sorted(unknown)}")
    msg_type = obj.get("type")
    if not isinstance(msg_type, str) or msg_type not in _CANONICALIZERS:
        raise UnknownType(f"unknown message type {msg_type!r}")
    ts = obj.get("ts")
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise SchemaViolation("envelope ts must be an integer")
    dropped = obj.get("dropped")
    if dropped is not None and (not isinstance(dropped, int) or isinstance(dropped, bool) or dropped < 0):
        raise SchemaViolation("dropped must be a non-negative integer")
    if "payload" not in obj:
        raise SchemaViolation("missing payload")
    payload = _CANONICALIZERS[msg_type](obj["payload"])
    return Envelope(type=msg_type, ts=ts, payload=payload, dropped=dropped)


# --- payload builders / parsers -------------------------------------------------


def frame_payload(frame: HandFrame) -> dict:
    return {
        "user": frame.user_id,
        "hand": frame.hand.value,
        "ts": frame.timestamp_ms,
        "conf": frame.confidence,
        "lm": [[lm.x, lm.y, lm.z] for lm in frame.landmarks],
    }


def payload_to_frame(p: dict) -> HandFrame:
    _require_keys(p, ("user", "hand", "ts", "conf", "lm"))
    user = _require_str(p, "user")
    hand = _require_str(p, "hand")
    if hand not in ("Left", "Right"):
        raise SchemaViolation(f"hand {hand!r} not one of Left/Right")
    ts = p["ts"]
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise SchemaViolation("ts must be an integer")
    conf = _require_number(p, "conf")
    lm = p["lm"]
    if not isinstance(lm, list):
        raise SchemaViolation("lm must be a list")
    points = []
    for entry in lm:
        points.append(tuple(_number_list(entry, 3, "lm entry")))
    frame = HandFrame(
        user_id=user,
        hand=Hand(hand),
        landmarks=tuple(Landmark(*pt) for pt in points),
        timestamp_ms=ts,
        confidence=conf,
    )
    violations = validate_frame(frame)
    if violations:
        raise SchemaViolation("; ".join(violations))
    return frame


def command_payload(command: RobotCommand) -> dict:
    if isinstance(command, MoveTcp):
        return {"kind": "move_tcp", "x": command.x, "y": command.y, "z": command.z}
    if isinstance(command, SetYaw):
        return {"kind": "set_yaw", "yaw": command.yaw}
    if isinstance(command, GripperSet):
        return {"kind": "gripper_set", "opening": command.opening}
    if isinstance(command, Hold):
        return {"kind": "hold"}
    raise SchemaViolation(f"not a robot command: {command!r}")


def payload_to_command(p: dict) -> RobotCommand:
    if not isinstance(p, dict):
        raise SchemaViolation("payload must be an object")
    kind = p.get("kind")
    if kind == "move_tcp":
        _require_keys(p, ("kind", "x", "y", "z"))
        return MoveTcp(
            _require_number(p, "x"), _require_number(p, "y"), _require_number(p, "z")
        )
    if kind == "set_yaw":
        _require_keys(p, ("kind", "yaw"))
        return SetYaw(_require_number(p, "yaw"))
    if kind == "gripper_set":
        _require_keys(p, ("kind", "opening"))
        opening = _require_number(p, "opening")
        if opening < 0:
            raise SchemaViolation("opening must be >= 0")
        return GripperSet(opening)
    if kind == "hold":
        _require_keys(p, ("kind",))
        return Hold()
    raise SchemaViolation(f"unknown command kind {kind!r}")


def robot_state_payload(state: RobotState) -> dict:
    return {
        "q": [float(v) for v in state.q],
        "tcp": {
            "pos": [float(v) for v in state.tcp.position],
            "quat": [float(v) for v in state.tcp.quaternion],
        },
        "gripper": float(state.gripper_opening),
        "ik_unreachable": bool(state.ik_unreachable),
    }


def tactile_payload(frame: TactileFrame) -> dict:
    return {
        "grid": [[float(v) for v in row] for row in np.asarray(frame.pressures)],
        "ts": float(frame.timestamp_ms),
    }


def error_envelope(ts: int, code: str, detail: str) -> Envelope:
    return Envelope(type="error", ts=ts, payload={"code": code, "detail": detail})


# --- raw-stream framing ----------------------------------------------------------

_LENGTH = struct.Struct(">I")
MAX_FRAME_BYTES = 1 << 22


def frame_bytes(data: bytes) -> bytes:
    """Length-prefix one message for the raw-socket transport."""
    if len(data) > MAX_FRAME_BYTES:
        raise ValueError("frame too large")
    return _LENGTH.pack(len(data)) + data


def split_frames(buffer: bytes) -> tuple[list[bytes], bytes]:
    """Extract complete length-prefixed frames; returns (frames, remainder)."""
    frames = []
    offset = 0
    while len(buffer) - offset >= 4:
        (size,) = _LENGTH.unpack_from(buffer, offset)
        if size > MAX_FRAME_BYTES:
            raise MalformedMessage(f"frame of {size} bytes exceeds limit")
        if len(buffer) - offset - 4 < size:
            break
        frames.append(buffer[offset + 4 : offset + 4 + size])
        offset += 4 + size
    return frames, buffer[offset:]
