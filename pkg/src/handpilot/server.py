"""Teleoperation service: WebSocket (and raw-socket) wire protocol endpoint.

FastAPI hosts the browser-facing WebSocket endpoint plus two small REST
probes; an optional asyncio TCP listener serves the identical envelope
bytes with 4-byte big-endian length prefixes.  All mutations of one session
(arbitration, gesture FSMs, simulator commands) funnel through that
session's single runtime task; connections only enqueue operations and
read broadcast snapshots, so any number of clients stays race-free.
"""

from __future__ import annotations

import asyncio
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from . import arbitration as arb
from .errors import HandpilotError
from .gbdt import Ensemble
from .gestures import FsmConfig, GripperSet, MoveTcp, RobotCommand
from .pipeline import TeleopPipeline
from .protocol import (
    Envelope,
    command_payload,
    decode_message,
    encode_message,
    error_envelope,
    frame_bytes,
    payload_to_frame,
    robot_state_payload,
    split_frames,
    tactile_payload,
)
from .sim import TICK_MS, RobotCell, default_scene
from .sim_types import SceneObject
from .tactile import SENSOR_RATE_HZ

STATE_RATE_HZ = 30
SEND_QUEUE_LIMIT = 256


@dataclass
class ServeConfig:
    model: Ensemble
    policy: arb.Policy = arb.Policy.EXCLUSIVE_TOKEN
    fsm_config: FsmConfig | None = None
    scene: list[SceneObject] | None = None
    state_rate_hz: float = STATE_RATE_HZ
    tactile_rate_hz: float = STATE_RATE_HZ
    tcp_port: int | None = None
    tcp_host: str = "127.0.0.1"


class _Client:
    """One connected peer: an outbound queue plus its identity."""

    def __init__(self, user: str):
        self.user = user
        self.queue: asyncio.Queue[bytes] = asyncio.Queue(maxsize=SEND_QUEUE_LIMIT)
        self.dropped = 0

    def push(self, data: bytes) -> None:
        while True:
            try:
                self.queue.put_nowait(data)
                return
            except asyncio.QueueFull:
                try:
                    self.queue.get_nowait()
                    self.dropped += 1
                except asyncio.QueueEmpty:
                    pass


class SessionRuntime:
    """Single owner of one session's pipeline and simulator."""

    def __init__(self, session_id: str, config: ServeConfig):
        self.session_id = session_id
        self.config = config
        self.pipeline = TeleopPipeline(
            config.model,
            config.fsm_config,
            policy=config.policy,
            session_id=session_id,
        )
        scene = config.scene if config.scene is not None else default_scene()
        self.cell = RobotCell(scene=list(scene))
        self.clients: dict[int, _Client] = {}
        self.inbox: asyncio.Queue = asyncio.Queue()
        self.latched: RobotCommand | None = None
        self.task: asyncio.Task | None = None
        self.closed = False
        self._epoch = time.monotonic()
        self._tactile_index = 0

    # -- helpers ----------------------------------------------------------

    def wall_ms(self) -> int:
        return int((time.monotonic() - self._epoch) * 1000)

    def broadcast(self, message: Envelope) -> None:
        data = encode_message(message)
        for client in self.clients.values():
            client.push(data)

    def send_to(self, client: _Client, message: Envelope) -> None:
        if client.dropped:
            message = Envelope(
                type=message.type,
                ts=message.ts,
                payload=message.payload,
                dropped=client.dropped,
            )
            client.dropped = 0
        client.push(encode_message(message))

    def holder(self) -> str | None:
        return self.pipeline.session.token_holder

    # -- operations (invoked only from the runtime task) -------------------

    def _emit_control_events(self, events) -> None:
        now = self.wall_ms()
        for event in events:
            if isinstance(event, arb.ControlGranted):
                self.broadcast(
                    Envelope("control_grant", now, {"user": event.user})
                )
            elif isinstance(event, arb.ControlRevoked):
                self.broadcast(
                    Envelope(
                        "control_revoked",
                        now,
                        {"user": event.user, "reason": event.reason},
                    )
                )

    def _handle(self, op: tuple) -> None:
        kind = op[0]
        if kind == "frame":
            _, client, frame = op
            result = self.pipeline.process_frame(frame)
            if result.degenerate:
                return
            now = self.wall_ms()
            # Landmark traffic keeps the holder's control alive on the wall clock.
            self.pipeline.session = arb.touch(self.pipeline.session, client.user, now)
            self._emit_control_events(result.control_events)
            if result.telemetry is not None:
                tele = result.telemetry
                self.send_to(
                    client,
                    Envelope(
                        "gesture",
                        now,
                        {
                            "hand": tele.hand.value,
                            "class": tele.gesture.value,
                            "proba": list(tele.proba),
                        },
                    ),
                )
            for accepted in result.accepted:
                self.latched = accepted.command
                self.broadcast(
                    Envelope("command", now, command_payload(accepted.command))
                )
            for user, reason in result.rejected:
                self.send_to(client, error_envelope(now, reason, "command rejected"))
        elif kind == "command":
            _, client, command = op
            now = self.wall_ms()
            result = self.pipeline.route_command(client.user, command, now)
            self._emit_control_events(result.control_events)
            for accepted in result.accepted:
                self.latched = accepted.command
                self.broadcast(
                    Envelope("command", now, command_payload(accepted.command))
                )
            for user, reason in result.rejected:
                self.send_to(client, error_envelope(now, reason, "command rejected"))
        elif kind == "control_request":
            _, client = op
            now = self.wall_ms()
            session, outcome = arb.request_control(
                self.pipeline.session, client.user, now
            )
            self.pipeline.session = session
            if isinstance(outcome, arb.Granted):
                self.broadcast(Envelope("control_grant", now, {"user": client.user}))
        elif kind == "leave":
            _, client_id, user = op
            self.clients.pop(client_id, None)
            if not any(c.user == user for c in self.clients.values()):
                events = self.pipeline.leave(user, self.wall_ms())
                self._emit_control_events(events)

    def _tick(self) -> None:
        command = self.latched
        self.latched = None
        if command is not None:
            command = self.cell.apply_safety(command)
        self.cell.step(command, TICK_MS)

    def _broadcast_state(self) -> None:
        state = self.cell.state()
        self.broadcast(
            Envelope("robot_state", self.wall_ms(), robot_state_payload(state))
        )

    def _broadcast_tactile(self) -> None:
        frame = self.cell.tactile(1000.0 * self._tactile_index / SENSOR_RATE_HZ)
        self._tactile_index += 1
        self.broadcast(
            Envelope("tactile_frame", self.wall_ms(), tactile_payload(frame))
        )

    async def run(self) -> None:
        loop = asyncio.get_running_loop()
        tick_s = TICK_MS / 1000.0
        state_period = 1.0 / self.config.state_rate_hz
        tactile_period = 1.0 / self.config.tactile_rate_hz
        next_tick = loop.time() + tick_s
        next_state = loop.time() + state_period
        next_tactile = loop.time() + tactile_period
        while not self.closed:
            timeout = max(next_tick - loop.time(), 0.0)
            try:
                op = await asyncio.wait_for(self.inbox.get(), timeout)
                self._handle(op)
                continue
            except asyncio.TimeoutError:
                pass
            now = loop.time()
            if now >= next_tick:
                self._tick()
                session, events = arb.tick(self.pipeline.session, self.wall_ms())
                self.pipeline.session = session
                self._emit_control_events(events)
                next_tick += tick_s
                if now - next_tick > 1.0:  # fell far behind; resynchronize
                    next_tick = now + tick_s
            if now >= next_state:
                self._broadcast_state()
                next_state += state_period
                if now - next_state > 1.0:
                    next_state = now + state_period
            if now >= next_tactile:
                self._broadcast_tactile()
                next_tactile += tactile_period
                if now - next_tactile > 1.0:
                    next_tactile = now + tactile_period

    def start(self) -> None:
        if self.task is None:
            self.task = asyncio.get_running_loop().create_task(self.run())

    async def stop(self) -> None:
        self.closed = True
        if self.task is not None:
            self.task.cancel()
            try:
                await self.task
            except asyncio.CancelledError:
                pass
            self.task = None


class ServiceState:
    def __init__(self, config: ServeConfig):
        self.config = config
        self.sessions: dict[str, SessionRuntime] = {}
        self._client_ids = 0

    def next_client_id(self) -> int:
        self._client_ids += 1
        return self._client_ids

    def get_session(self, session_id: str) -> SessionRuntime:
        runtime = self.sessions.get(session_id)
        if runtime is None:
            runtime = SessionRuntime(session_id, self.config)
            self.sessions[session_id] = runtime
            runtime.start()
        return runtime

    async def shutdown(self) -> None:
        for runtime in self.sessions.values():
            await runtime.stop()


# --- transport-agnostic connection handling ------------------------------------


class _Transport:
    """Minimal async send/receive facade over ws or tcp."""

    async def send(self, data: bytes) -> None:
        raise NotImplementedError

    async def receive(self) -> bytes | None:
        raise NotImplementedError

    async def close(self) -> None:
        raise NotImplementedError


class _WsTransport(_Transport):
    def __init__(self, websocket: WebSocket):
        self.ws = websocket

    async def send(self, data: bytes) -> None:
        await self.ws.send_text(data.decode())

    async def receive(self) -> bytes | None:
        try:
            return (await self.ws.receive_text()).encode()
        except WebSocketDisconnect:
            return None

    async def close(self) -> None:
        try:
            await self.ws.close()
        except RuntimeError:
            pass


class _TcpTransport(_Transport):
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer
        self._buffer = b""
        self._frames: list[bytes] = []

    async def send(self, data: bytes) -> None:
        self.writer.write(frame_bytes(data))
        await self.writer.drain()

    async def receive(self) -> bytes | None:
        while not self._frames:
            chunk = await self.reader.read(65536)
            if not chunk:
                return None
            self._buffer += chunk
            frames, self._buffer = split_frames(self._buffer)
            self._frames.extend(frames)
        return self._frames.pop(0)

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


async def _send_error(transport: _Transport, code: str, detail: str) -> None:
    try:
        await transport.send(encode_message(error_envelope(0, code, detail)))
    except Exception:
        pass


async def handle_connection(state: ServiceState, transport: _Transport) -> None:
    """Join handshake, then stream until disconnect or protocol violation."""
    raw = await transport.receive()
    if raw is None:
        return
    try:
        first = decode_message(raw)
    except HandpilotError as exc:
        await _send_error(transport, exc.code, str(exc))
        await transport.close()
        return
    if first.type != "join":
        code = "not-joined" if first.type == "landmark_frame" else "expected-join"
        await _send_error(transport, code, "first message must be join")
        await transport.close()
        return

    session_id = first.payload["session"]
    user = first.payload["user"]
    runtime = state.get_session(session_id)
    client = _Client(user)
    client_id = state.next_client_id()
    runtime.clients[client_id] = client
    runtime.pipeline.join(user, runtime.wall_ms())
    await transport.send(
        encode_message(
            Envelope(
                "joined",
                runtime.wall_ms(),
                {
                    "session": session_id,
                    "user": user,
                    "policy": runtime.config.policy.value,
                },
            )
        )
    )

    async def pump_outbound():
        while True:
            data = await client.queue.get()
            await transport.send(data)

    sender = asyncio.get_running_loop().create_task(pump_outbound())
    try:
        while True:
            raw = await transport.receive()
            if raw is None:
                break
            try:
                message = decode_message(raw)
            except HandpilotError as exc:
                await _send_error(transport, exc.code, str(exc))
                break
            if message.type == "landmark_frame":
                frame = payload_to_frame(message.payload)
                if frame.user_id != user:
                    await _send_error(
                        transport, "user-mismatch", "frame user differs from joined user"
                    )
                    continue
                runtime.inbox.put_nowait(("frame", client, frame))
            elif message.type == "command":
                from .protocol import payload_to_command

                command = payload_to_command(message.payload)
                command = _clamp_command(command, runtime.config)
                runtime.inbox.put_nowait(("command", client, command))
            elif message.type == "control_request":
                runtime.inbox.put_nowait(("control_request", client))
            elif message.type == "join":
                await _send_error(transport, "already-joined", "join sent twice")
            else:
                await _send_error(
                    transport, "unexpected-type", f"clients may not send {message.type}"
                )
    finally:
        sender.cancel()
        runtime.inbox.put_nowait(("leave", client_id, user))
        await transport.close()


def _clamp_command(command: RobotCommand, config: ServeConfig) -> RobotCommand:
    """Keep raw client commands inside the configured workspace and grip range."""
    fsm = config.fsm_config or FsmConfig()
    if isinstance(command, MoveTcp):
        x, y = fsm.workspace.clamp(command.x, command.y)
        return MoveTcp(x, y, command.z)
    if isinstance(command, GripperSet):
        opening = min(max(command.opening, fsm.grip_min), fsm.grip_max)
        return GripperSet(opening)
    return command


# --- FastAPI application ---------------------------------------------------------


class HealthResponse(BaseModel):
    status: str
    sessions: int
    protocol_version: int


class SessionInfo(BaseModel):
    session_id: str
    users: list[str]
    token_holder: str | None
    policy: str
    clients: int


class SessionsResponse(BaseModel):
    sessions: list[SessionInfo]


def build_app(config: ServeConfig) -> FastAPI:
    state = ServiceState(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        tcp_server = None
        if config.tcp_port is not None:

            async def on_tcp(reader, writer):
                await handle_connection(state, _TcpTransport(reader, writer))

            tcp_server = await asyncio.start_server(
                on_tcp, config.tcp_host, config.tcp_port
            )
            app.state.tcp_port = tcp_server.sockets[0].getsockname()[1]
        try:
            yield
        finally:
            if tcp_server is not None:
                tcp_server.close()
                await tcp_server.wait_closed()
            await state.shutdown()

    app = FastAPI(title="handpilot", lifespan=lifespan)
    app.state.service = state

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        from .protocol import PROTOCOL_VERSION

        return HealthResponse(
            status="ok",
            sessions=len(state.sessions),
            protocol_version=PROTOCOL_VERSION,
        )

    @app.get("/sessions", response_model=SessionsResponse)
    def sessions():
        infos = [
            SessionInfo(
                session_id=sid,
                users=sorted(rt.pipeline.session.users),
                token_holder=rt.pipeline.session.token_holder,
                policy=rt.pipeline.session.policy.value,
                clients=len(rt.clients),
            )
            for sid, rt in state.sessions.items()
        ]
        return SessionsResponse(sessions=infos)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        await handle_connection(state, _WsTransport(websocket))

    return app
