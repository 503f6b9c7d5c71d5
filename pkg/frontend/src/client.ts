/**
 * Session client: one WebSocket, latest-value mailboxes per message type.
 *
 * The network side never blocks rendering: each incoming message replaces
 * the previous one of its type, and the render loop reads whatever is
 * freshest. Control-flow messages additionally update the session view
 * (token holder, per-hand gesture).
 */

import {
  CommandPayload,
  Envelope,
  GesturePayload,
  HandSide,
  LandmarkFramePayload,
  decodeEnvelope,
  encodeEnvelope,
  joinEnvelope,
  landmarkFrameEnvelope,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "joined" | "closed" | "error";

export interface SessionView {
  status: ConnectionStatus;
  user: string;
  session: string;
  policy: string | null;
  tokenHolder: string | null;
  lastGesture: Partial<Record<HandSide, GesturePayload>>;
  lastError: string | null;
  framesSent: number;
  droppedByServer: number;
}

/** Latest-value mailbox: new values overwrite, reads are non-destructive. */
export class Mailboxes {
  private boxes = new Map<string, Envelope>();
  private counts = new Map<string, number>();

  put(message: Envelope): void {
    this.boxes.set(message.type, message);
    this.counts.set(message.type, (this.counts.get(message.type) ?? 0) + 1);
  }

  latest<T = unknown>(type: string): (Envelope & { payload: T }) | null {
    return (this.boxes.get(type) as Envelope & { payload: T }) ?? null;
  }

  received(type: string): number {
    return this.counts.get(type) ?? 0;
  }
}

export interface TeleopSocket {
  send(data: string): void;
  close(): void;
}

export class TeleopClient {
  readonly mail = new Mailboxes();
  readonly view: SessionView;
  private socket: TeleopSocket | null = null;
  private epoch = Date.now();

  constructor(session: string, user: string) {
    this.view = {
      status: "connecting",
      user,
      session,
      policy: null,
      tokenHolder: null,
      lastGesture: {},
      lastError: null,
      framesSent: 0,
      droppedByServer: 0,
    };
  }

  nowMs(): number {
    return Date.now() - this.epoch;
  }

  /** Attach a transport (a browser WebSocket or anything send/close-able). */
  attach(socket: TeleopSocket): void {
    this.socket = socket;
    socket.send(joinEnvelope(this.view.session, this.view.user, this.nowMs()));
  }

  onMessage(text: string): void {
    let message: Envelope;
    try {
      message = decodeEnvelope(text);
    } catch (err) {
      this.view.lastError = String(err);
      return;
    }
    if (typeof message.dropped === "number") {
      this.view.droppedByServer += message.dropped;
    }
    this.mail.put(message);
    switch (message.type) {
      case "joined": {
        const payload = message.payload as { policy: string };
        this.view.status = "joined";
        this.view.policy = payload.policy;
        break;
      }
      case "control_grant":
        this.view.tokenHolder = (message.payload as { user: string }).user;
        break;
      case "control_revoked": {
        const payload = message.payload as { user: string };
        if (this.view.tokenHolder === payload.user) this.view.tokenHolder = null;
        break;
      }
      case "gesture": {
        const payload = message.payload as GesturePayload;
        this.view.lastGesture[payload.hand] = payload;
        break;
      }
      case "error":
        this.view.lastError = JSON.stringify(message.payload);
        break;
    }
  }

  onClose(): void {
    this.view.status = "closed";
  }

  sendFrame(payload: LandmarkFramePayload): void {
    if (!this.socket) return;
    this.socket.send(landmarkFrameEnvelope(payload));
    this.view.framesSent += 1;
  }

  requestControl(): void {
    this.socket?.send(encodeEnvelope("control_request", this.nowMs(), {}));
  }

  sendCommand(command: CommandPayload): void {
    this.socket?.send(encodeEnvelope("command", this.nowMs(), command));
  }
}

/** Wire a browser WebSocket to a client (kept separate for testability). */
export function connectWebSocket(client: TeleopClient, url: string): WebSocket {
  const ws = new WebSocket(url);
  ws.onopen = () => client.attach({ send: (d) => ws.send(d), close: () => ws.close() });
  ws.onmessage = (event) => client.onMessage(String(event.data));
  ws.onclose = () => client.onClose();
  ws.onerror = () => {
    client.view.status = "error";
  };
  return ws;
}
