import numpy as np
import pytest

from handpilot import arbitration as arb
from handpilot.arbitration import Policy


def fresh(policy=Policy.EXCLUSIVE_TOKEN, users=("u1", "u2", "u3")):
    session = arb.new_session("s", policy)
    for u in users:
        session = arb.join(session, u, 0)
    return session


class TestJoin:
    def test_join_adds_user(self):
        session = arb.join(arb.new_session("s"), "u1", 0)
        assert session.users == {"u1"}
        assert session.token_holder is None

    def test_join_idempotent(self):
        a = arb.join(arb.new_session("s"), "u1", 0)
        b = arb.join(a, "u1", 5)
        assert a == b

    def test_join_never_transfers_control(self):
        session = fresh(users=("u1",))
        session, res = arb.request_control(session, "u1", 0)
        session = arb.join(session, "u2", 1)
        assert session.token_holder == "u1"


class TestRequestControl:
    def test_granted_when_free(self):
        session, res = arb.request_control(fresh(), "u1", 0)
        assert res == arb.Granted("u1")
        assert session.token_holder == "u1"

    def test_fifo_queue_positions(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, r2 = arb.request_control(session, "u2", 1)
        session, r3 = arb.request_control(session, "u3", 2)
        assert r2 == arb.Queued(1)
        assert r3 == arb.Queued(2)
        assert session.request_queue == ("u2", "u3")

    def test_request_idempotent_for_holder_and_queued(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, again = arb.request_control(session, "u1", 1)
        assert again == arb.Granted("u1")
        session, _ = arb.request_control(session, "u2", 2)
        session, again = arb.request_control(session, "u2", 3)
        assert again == arb.Queued(1)
        assert session.request_queue == ("u2",)

    def test_last_writer_always_granted(self):
        session = fresh(policy=Policy.LAST_WRITER)
        for user in ("u1", "u2", "u3"):
            session, res = arb.request_control(session, user, 0)
            assert res == arb.Granted(user)

    def test_unknown_user_rejected(self):
        with pytest.raises(ValueError):
            arb.request_control(fresh(), "ghost", 0)


class TestTick:
    def test_idle_timeout_revokes_and_promotes(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, _ = arb.request_control(session, "u2", 1)
        session, events = arb.tick(session, 5001)
        assert arb.ControlRevoked("u1", "idle-timeout") in events
        assert arb.ControlGranted("u2") in events
        assert session.token_holder == "u2"

    def test_no_holder_empty_queue_no_events(self):
        session, events = arb.tick(fresh(), 1000)
        assert events == []

    def test_second_tick_same_millisecond_is_noop(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, _ = arb.request_control(session, "u2", 1)
        after_one, e1 = arb.tick(session, 5001)
        after_two, e2 = arb.tick(after_one, 5001)
        assert after_one == after_two
        assert e2 == []

    def test_activity_defers_timeout(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session = arb.touch(session, "u1", 4000)
        session, events = arb.tick(session, 5001)
        assert events == []
        assert session.token_holder == "u1"


class TestRouteCommand:
    def test_holder_accepted(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, res = arb.route_command(session, "u1", "MOVE", 10)
        assert res == arb.Accepted("MOVE")
        assert session.holder_last_active_ms == 10

    def test_non_holder_rejected(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, res = arb.route_command(session, "u2", "MOVE", 10)
        assert res == arb.Rejected("not-controller")

    def test_last_writer_accepts_everything(self):
        session = fresh(policy=Policy.LAST_WRITER)
        for user in ("u1", "u2"):
            session, res = arb.route_command(session, user, f"CMD-{user}", 0)
            assert isinstance(res, arb.Accepted)

    def test_leave_releases_and_promotes(self):
        session, _ = arb.request_control(fresh(), "u1", 0)
        session, _ = arb.request_control(session, "u2", 1)
        session, events = arb.leave(session, "u1", 2)
        assert arb.ControlRevoked("u1", "left") in events
        assert arb.ControlGranted("u2") in events
        assert session.token_holder == "u2"
        assert "u1" not in session.users


def random_walk(steps, seed, users=("a", "b", "c", "d", "e")):
    rng = np.random.default_rng(seed)
    session = arb.new_session("s", Policy.EXCLUSIVE_TOKEN)
    now = 0
    trace = []
    for _ in range(steps):
        now += int(rng.integers(0, 400))
        op = int(rng.integers(0, 6))
        user = users[int(rng.integers(0, len(users)))]
        trace.append((op, user, now))
        session = _apply(session, op, user, now)
    return session, trace


def _apply(session, op, user, now):
    if op == 0:
        return arb.join(session, user, now)
    if op == 1 and user in session.users:
        return arb.request_control(session, user, now)[0]
    if op == 2:
        return arb.tick(session, now)[0]
    if op == 3 and user in session.users:
        return arb.route_command(session, user, "CMD", now)[0]
    if op == 4:
        return arb.touch(session, user, now)
    if op == 5 and user in session.users:
        return arb.leave(session, user, now)[0]
    return session


class TestProperties:
    def test_exclusive_token_safety_100k_steps(self):
        rng = np.random.default_rng(77)
        session = arb.new_session("s", Policy.EXCLUSIVE_TOKEN)
        users = ("a", "b", "c", "d", "e")
        now = 0
        for _ in range(100_000):
            now += int(rng.integers(0, 400))
            session = _apply(
                session, int(rng.integers(0, 6)), users[int(rng.integers(0, 5))], now
            )
            holders = [session.token_holder] if session.token_holder else []
            assert len(holders) <= 1
            assert len(set(session.request_queue)) == len(session.request_queue)
            assert session.token_holder not in session.request_queue

    def test_liveness_queued_users_granted_under_idleness(self):
        session = fresh()
        session, _ = arb.request_control(session, "u1", 0)
        session, _ = arb.request_control(session, "u2", 0)
        session, _ = arb.request_control(session, "u3", 0)
        timeout = session.idle_timeout_ms
        granted_at = {}
        now = 0
        while len(granted_at) < 2 and now <= 3 * (timeout + 1):
            now += timeout + 1
            session, events = arb.tick(session, now)
            for event in events:
                if isinstance(event, arb.ControlGranted):
                    granted_at[event.user] = now
        assert granted_at["u2"] <= 1 * (timeout + 1)
        assert granted_at["u3"] <= 2 * (timeout + 1)

    def test_replaying_log_reproduces_state(self):
        final_a, trace = random_walk(5000, seed=13)
        session = arb.new_session("s", Policy.EXCLUSIVE_TOKEN)
        for op, user, now in trace:
            session = _apply(session, op, user, now)
        assert session == final_a
