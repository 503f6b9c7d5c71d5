"""Hand landmark data model, validation, and the JSONL trace format.

A frame is 21 landmarks in fixed anatomical order: wrist first, then four
points per finger (MCP, PIP, DIP, TIP) for thumb, index, middle, ring and
pinky.  Trace files hold one frame per line so they diff cleanly and can be
replayed as a stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, TextIO

N_LANDMARKS = 21
WRIST = 0
MIDDLE_MCP = 9
THUMB_TIP = 4
INDEX_TIP = 8

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")
# First landmark (the MCP) of each finger; the finger occupies four
# consecutive indices ending at the tip.
FINGER_BASES = (1, 5, 9, 13, 17)

TRACE_VERSION = 1
# Key order of a trace record (also the canonical encode order).
_TRACE_KEYS = ("v", "user", "hand", "ts", "conf", "lm")


class Hand(Enum):
    LEFT = "Left"
    RIGHT = "Right"


class GestureClass(Enum):
    """The four trainable gesture classes.

    The composite fingerdistance gesture is derived by the FSM from a grab
    on the opposite hand and is never a classifier label.
    """

    MOVE = "Move"
    ANGLE = "Angle"
    GRAB = "Grab"
    NOGESTURE = "NoGesture"


CLASS_ORDER = (
    GestureClass.MOVE,
    GestureClass.ANGLE,
    GestureClass.GRAB,
    GestureClass.NOGESTURE,
)
CLASS_INDEX = {c: i for i, c in enumerate(CLASS_ORDER)}


@dataclass(frozen=True)
class Landmark:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class HandFrame:
    user_id: str
    hand: Hand
    landmarks: tuple[Landmark, ...]
    timestamp_ms: int
    confidence: float


@dataclass(frozen=True)
class LabeledSample:
    frame: HandFrame
    label: GestureClass


def validate_frame(frame: HandFrame) -> list[str]:
    """Return every invariant violation of a frame; empty list means ok."""
    violations = []
    n = len(frame.landmarks)
    if n != N_LANDMARKS:
        violations.append(f"landmark count {n} != {N_LANDMARKS}")
    for i, lm in enumerate(frame.landmarks):
        for field in ("x", "y"):
            val = getattr(lm, field)
            if not math.isfinite(val):
                violations.append(f"landmark {i} field {field} not finite")
            elif not 0.0 <= val <= 1.0:
                violations.append(f"landmark {i} field {field} = {val} outside [0, 1]")
        if not math.isfinite(lm.z):
            violations.append(f"landmark {i} field z not finite")
    if not math.isfinite(frame.confidence) or not 0.0 <= frame.confidence <= 1.0:
        violations.append(f"confidence {frame.confidence} outside [0, 1]")
    if not isinstance(frame.timestamp_ms, int):
        violations.append("timestamp_ms must be an integer")
    return violations


def frame_ok(frame: HandFrame) -> bool:
    return not validate_frame(frame)


# --- JSONL trace records ---------------------------------------------------

from .errors import MalformedRecord, SchemaViolation  # noqa: E402


def encode_trace_record(frame: HandFrame) -> str:
    """Encode one frame as a single JSONL trace line (no trailing newline)."""
    record = {
        "v": TRACE_VERSION,
        "user": frame.user_id,
        "hand": frame.hand.value,
        "ts": frame.timestamp_ms,
        "conf": frame.confidence,
        "lm": [[lm.x, lm.y, lm.z] for lm in frame.landmarks],
    }
    return json.dumps(record, separators=(",", ":"))


def _parse_record_object(obj: dict, extra_keys: tuple[str, ...] = ()) -> dict:
    allowed = set(_TRACE_KEYS) | set(extra_keys)
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaViolation(f"unknown keys: {sorted(unknown)}")
    missing = set(_TRACE_KEYS) - set(obj)
    if missing:
        raise SchemaViolation(f"missing keys: {sorted(missing)}")
    if obj["v"] != TRACE_VERSION:
        raise SchemaViolation(f"unsupported trace version {obj['v']!r}")
    return obj


def _frame_from_fields(user, hand, ts, conf, lm) -> HandFrame:
    if not isinstance(user, str):
        raise SchemaViolation("user must be a string")
    try:
        hand_enum = Hand(hand)
    except ValueError:
        raise SchemaViolation(f"hand {hand!r} not one of Left/Right") from None
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise SchemaViolation("ts must be an integer")
    if not isinstance(conf, (int, float)) or isinstance(conf, bool):
        raise SchemaViolation("conf must be a number")
    if not isinstance(lm, list) or any(
        not isinstance(p, list) or len(p) != 3 for p in lm
    ):
        raise SchemaViolation("lm must be a list of [x, y, z] triples")
    landmarks = []
    for p in lm:
        if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in p):
            raise SchemaViolation("landmark coordinates must be numbers")
        landmarks.append(Landmark(float(p[0]), float(p[1]), float(p[2])))
    frame = HandFrame(
        user_id=user,
        hand=hand_enum,
        landmarks=tuple(landmarks),
        timestamp_ms=ts,
        confidence=float(conf),
    )
    violations = validate_frame(frame)
    if violations:
        raise SchemaViolation("; ".join(violations))
    return frame


def decode_trace_record(line: str) -> HandFrame:
    """Decode one trace line back into a HandFrame.

    Raises MalformedRecord for unparseable input and SchemaViolation when the
    record parses but breaks the schema (unknown keys included).
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")
    _parse_record_object(obj)
    return _frame_from_fields(obj["user"], obj["hand"], obj["ts"], obj["conf"], obj["lm"])


def encode_labeled_record(sample: LabeledSample) -> str:
    """Trace line with an extra trailing "label" key (training data files)."""
    base = encode_trace_record(sample.frame)
    return base[:-1] + f',"label":{json.dumps(sample.label.value)}}}'


def decode_labeled_record(line: str) -> LabeledSample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")
    _parse_record_object(obj, extra_keys=("label",))
    if "label" not in obj:
        raise SchemaViolation("missing keys: ['label']")
    try:
        label = GestureClass(obj["label"])
    except ValueError:
        raise SchemaViolation(f"label {obj['label']!r} is not a gesture class") from None
    frame = _frame_from_fields(obj["user"], obj["hand"], obj["ts"], obj["conf"], obj["lm"])
    return LabeledSample(frame=frame, label=label)


def read_trace(fp: TextIO) -> Iterator[HandFrame]:
    """Stream frames from a trace file, enforcing per-(user, hand) ts order."""
    last_ts: dict[tuple[str, Hand], int] = {}
    for line in fp:
        line = line.strip()
        if not line:
            continue
        frame = decode_trace_record(line)
        key = (frame.user_id, frame.hand)
        if frame.timestamp_ms < last_ts.get(key, frame.timestamp_ms):
            raise SchemaViolation(
                f"ts {frame.timestamp_ms} out of order for {frame.user_id}/{frame.hand.value}"
            )
        last_ts[key] = frame.timestamp_ms
        yield frame


def write_trace(fp: TextIO, frames: Iterable[HandFrame]) -> int:
    n = 0
    for frame in frames:
        fp.write(encode_trace_record(frame) + "\n")
        n += 1
    return n


def read_labeled(fp: TextIO) -> Iterator[LabeledSample]:
    for line in fp:
        line = line.strip()
        if line:
            yield decode_labeled_record(line)


def write_labeled(fp: TextIO, samples: Iterable[LabeledSample]) -> int:
    n = 0
    for sample in samples:
        fp.write(encode_labeled_record(sample) + "\n")
        n += 1
    return n
