/**
 * Wire protocol mirror: envelope encoding and outbound-message validation.
 *
 * Encoding is canonical (fixed key order, no insignificant whitespace) so a
 * message built here is byte-identical to the same message built server-side.
 */

export const PROTOCOL_VERSION = 1;

export type HandSide = "Left" | "Right";
export type GestureName = "Move" | "Angle" | "Grab" | "NoGesture";

export interface LandmarkFramePayload {
  user: string;
  hand: HandSide;
  ts: number;
  conf: number;
  lm: [number, number, number][];
}

export interface GesturePayload {
  hand: HandSide;
  class: GestureName;
  proba: [number, number, number, number];
}

export interface TcpPose {
  pos: [number, number, number];
  quat: [number, number, number, number];
}

export interface RobotStatePayload {
  q: number[];
  tcp: TcpPose;
  gripper: number;
  ik_unreachable: boolean;
}

export interface TactilePayload {
  grid: number[][];
  ts: number;
}

export type CommandPayload =
  | { kind: "move_tcp"; x: number; y: number; z: number }
  | { kind: "set_yaw"; yaw: number }
  | { kind: "gripper_set"; opening: number }
  | { kind: "hold" };

export interface Envelope {
  v: number;
  type: string;
  ts: number;
  dropped?: number;
  payload: unknown;
}

/** Payload key order per message type; mirrors the server's schema docs. */
const PAYLOAD_KEY_ORDER: Record<string, string[]> = {
  join: ["session", "user"],
  joined: ["session", "user", "policy"],
  landmark_frame: ["user", "hand", "ts", "conf", "lm"],
  control_request: [],
  control_grant: ["user"],
  control_revoked: ["user", "reason"],
  gesture: ["hand", "class", "proba"],
  command: [], // command key order depends on kind; handled below
  robot_state: ["q", "tcp", "gripper", "ik_unreachable"],
  tactile_frame: ["grid", "ts"],
  error: ["code", "detail"],
};

const COMMAND_KEY_ORDER: Record<string, string[]> = {
  move_tcp: ["kind", "x", "y", "z"],
  set_yaw: ["kind", "yaw"],
  gripper_set: ["kind", "opening"],
  hold: ["kind"],
};

function orderKeys(payload: Record<string, unknown>, keys: string[]): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const key of keys) {
    if (key in payload) out[key] = payload[key];
  }
  return out;
}

export function encodeEnvelope(type: string, ts: number, payload: unknown): string {
  let body = payload as Record<string, unknown>;
  if (type === "command") {
    const kind = String(body.kind);
    body = orderKeys(body, COMMAND_KEY_ORDER[kind] ?? Object.keys(body));
  } else if (type in PAYLOAD_KEY_ORDER && PAYLOAD_KEY_ORDER[type].length > 0) {
    body = orderKeys(body, PAYLOAD_KEY_ORDER[type]);
  }
  return JSON.stringify({ v: PROTOCOL_VERSION, type, ts, payload: body });
}

export function decodeEnvelope(text: string): Envelope {
  const obj = JSON.parse(text);
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new Error("message is not a JSON object");
  }
  if (obj.v !== PROTOCOL_VERSION) {
    throw new Error(`unsupported protocol version ${obj.v}`);
  }
  if (typeof obj.type !== "string" || typeof obj.ts !== "number") {
    throw new Error("missing type or ts");
  }
  return obj as Envelope;
}

const FINITE = (value: unknown): value is number =>
  typeof value === "number" && Number.isFinite(value);

/** Every violated landmark-frame invariant; empty means schema-valid. */
export function validateLandmarkFrame(payload: LandmarkFramePayload): string[] {
  const violations: string[] = [];
  if (typeof payload.user !== "string" || payload.user.length === 0) {
    violations.push("user must be a non-empty string");
  }
  if (payload.hand !== "Left" && payload.hand !== "Right") {
    violations.push(`hand ${payload.hand} not one of Left/Right`);
  }
  if (!Number.isInteger(payload.ts)) violations.push("ts must be an integer");
  if (!FINITE(payload.conf) || payload.conf < 0 || payload.conf > 1) {
    violations.push("conf outside [0, 1]");
  }
  if (!Array.isArray(payload.lm) || payload.lm.length !== 21) {
    violations.push(`landmark count ${payload.lm?.length} != 21`);
    return violations;
  }
  payload.lm.forEach((point, i) => {
    if (!Array.isArray(point) || point.length !== 3 || !point.every(FINITE)) {
      violations.push(`landmark ${i} must be [x, y, z] numbers`);
      return;
    }
    const [x, y] = point;
    if (x < 0 || x > 1) violations.push(`landmark ${i} field x = ${x} outside [0, 1]`);
    if (y < 0 || y > 1) violations.push(`landmark ${i} field y = ${y} outside [0, 1]`);
  });
  return violations;
}

export function joinEnvelope(session: string, user: string, ts: number): string {
  return encodeEnvelope("join", ts, { session, user });
}

export function landmarkFrameEnvelope(payload: LandmarkFramePayload): string {
  const violations = validateLandmarkFrame(payload);
  if (violations.length > 0) {
    throw new Error(`refusing to send invalid frame: ${violations.join("; ")}`);
  }
  return encodeEnvelope("landmark_frame", payload.ts, payload);
}
