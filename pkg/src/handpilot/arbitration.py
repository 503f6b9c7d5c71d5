"""Multi-user floor control: who may drive the robot and how it transfers.

The session is a pure state machine; every operation returns a new Session
value plus its result, so histories replay exactly.  Under the exclusive
token policy at most one user holds control, others queue FIFO, and an idle
holder is revoked after a timeout.  The last-writer policy accepts
everything (later commands simply overwrite earlier ones at the simulator
tick), for demos where everyone may jiggle the arm.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

DEFAULT_IDLE_TIMEOUT_MS = 5000


class Policy(Enum):
    EXCLUSIVE_TOKEN = "ExclusiveToken"
    LAST_WRITER = "LastWriter"


@dataclass(frozen=True)
class Session:
    session_id: str
    policy: Policy = Policy.EXCLUSIVE_TOKEN
    users: frozenset[str] = frozenset()
    token_holder: str | None = None
    request_queue: tuple[str, ...] = ()
    holder_last_active_ms: int = 0
    idle_timeout_ms: int = DEFAULT_IDLE_TIMEOUT_MS


@dataclass(frozen=True)
class Granted:
    user: str


@dataclass(frozen=True)
class Queued:
    position: int


@dataclass(frozen=True)
class Accepted:
    command: object


@dataclass(frozen=True)
class Rejected:
    reason: str


@dataclass(frozen=True)
class ControlGranted:
    user: str


@dataclass(frozen=True)
class ControlRevoked:
    user: str
    reason: str


def new_session(
    session_id: str,
    policy: Policy = Policy.EXCLUSIVE_TOKEN,
    idle_timeout_ms: int = DEFAULT_IDLE_TIMEOUT_MS,
) -> Session:
    return Session(
        session_id=session_id, policy=policy, idle_timeout_ms=idle_timeout_ms
    )


def join(session: Session, user: str, now_ms: int) -> Session:
    """Add a user; idempotent and never transfers control."""
    if user in session.users:
        return session
    return replace(session, users=session.users | {user})


def leave(session: Session, user: str, now_ms: int) -> tuple[Session, list]:
    """Remove a user, releasing the token (and granting onward) if held."""
    events: list = []
    if user not in session.users:
        return session, events
    queue = tuple(u for u in session.request_queue if u != user)
    holder = session.token_holder
    last_active = session.holder_last_active_ms
    if holder == user:
        events.append(ControlRevoked(user, "left"))
        holder = None
        if queue:
            holder, queue = queue[0], queue[1:]
            last_active = now_ms
            events.append(ControlGranted(holder))
    session = replace(
        session,
        users=session.users - {user},
        token_holder=holder,
        request_queue=queue,
        holder_last_active_ms=last_active,
    )
    return session, events


def request_control(session: Session, user: str, now_ms: int) -> tuple[Session, Granted | Queued]:
    """Grant the token if free, else queue FIFO (exclusive policy only)."""
    if user not in session.users:
        raise ValueError(f"user {user!r} not in session")
    if session.policy is Policy.LAST_WRITER:
        return session, Granted(user)
    if session.token_holder == user:
        return session, Granted(user)
    if session.token_holder is None:
        session = replace(
            session, token_holder=user, holder_last_active_ms=now_ms
        )
        return session, Granted(user)
    if user in session.request_queue:
        return session, Queued(session.request_queue.index(user) + 1)
    queue = session.request_queue + (user,)
    return replace(session, request_queue=queue), Queued(len(queue))


def touch(session: Session, user: str, now_ms: int) -> Session:
    """Record holder activity (accepted commands or landmark frames)."""
    if session.token_holder == user:
        return replace(session, holder_last_active_ms=now_ms)
    return session


def tick(session: Session, now_ms: int) -> tuple[Session, list]:
    """Revoke an idle holder and promote the queue head."""
    events: list = []
    if session.policy is Policy.LAST_WRITER:
        return session, events
    holder = session.token_holder
    queue = session.request_queue
    last_active = session.holder_last_active_ms
    if holder is not None and now_ms - last_active > session.idle_timeout_ms:
        events.append(ControlRevoked(holder, "idle-timeout"))
        holder = None
    if holder is None and queue:
        holder, queue = queue[0], queue[1:]
        last_active = now_ms
        events.append(ControlGranted(holder))
    if events:
        session = replace(
            session,
            token_holder=holder,
            request_queue=queue,
            holder_last_active_ms=last_active,
        )
    return session, events


def route_command(
    session: Session, user: str, command, now_ms: int
) -> tuple[Session, Accepted | Rejected]:
    """Accept a command from the controlling user; refreshes holder activity."""
    if user not in session.users:
        return session, Rejected("not-joined")
    if session.policy is Policy.LAST_WRITER:
        return session, Accepted(command)
    if session.token_holder != user:
        return session, Rejected("not-controller")
    session = replace(session, holder_last_active_ms=now_ms)
    return session, Accepted(command)
