import pytest

from handpilot import arbitration as arb
from handpilot import scenario
from handpilot.gestures import GripperSet, MoveTcp
from handpilot.pipeline import TeleopPipeline, replay_trace
from handpilot.protocol import command_payload
from conftest import make_frame


@pytest.fixture(scope="module")
def golden_frames():
    return scenario.golden_trace()


class TestReplayDeterminism:
    def test_identical_runs(self, trained_model, golden_frames):
        a = replay_trace(golden_frames, trained_model)
        b = replay_trace(golden_frames, trained_model)
        assert a == b
        assert len(a) > 0

    def test_expected_phase_structure(self, trained_model, golden_frames):
        commands = replay_trace(golden_frames, trained_model)
        kinds = []
        for accepted in commands:
            kind = command_payload(accepted.command)["kind"]
            if not kinds or kinds[-1] != kind:
                kinds.append(kind)
        # approach, close, carry, fingerdistance open
        assert kinds == ["move_tcp", "gripper_set", "move_tcp", "gripper_set"]

    def test_fingerdistance_phase_opens_gripper(self, trained_model, golden_frames):
        commands = replay_trace(golden_frames, trained_model)
        closing = [
            c for c in commands if isinstance(c.command, GripperSet) and c.timestamp_ms < 5000
        ]
        opening = [
            c for c in commands if isinstance(c.command, GripperSet) and c.timestamp_ms > 8000
        ]
        assert closing and all(c.command.opening == 0.0 for c in closing)
        assert opening and all(c.command.opening > 0.05 for c in opening)


class TestArbitrationIntegration:
    def test_first_user_auto_granted(self, trained_model, golden_frames):
        pipeline = TeleopPipeline(trained_model)
        result = None
        for frame in golden_frames[:10]:
            result = pipeline.process_frame(frame)
            if result.accepted:
                break
        assert pipeline.session.token_holder == "demo"

    def test_second_user_rejected_while_held(self, trained_model, golden_frames):
        pipeline = TeleopPipeline(trained_model)
        for frame in golden_frames[:10]:
            pipeline.process_frame(frame)
        assert pipeline.session.token_holder == "demo"
        result = pipeline.route_command("demo", MoveTcp(0.5, 0.0, 0.15), 200)
        assert result.accepted
        pipeline.join("intruder", 201)
        result = pipeline.route_command("intruder", MoveTcp(0.6, 0.0, 0.15), 202)
        assert result.rejected == [("intruder", "not-controller")]

    def test_last_writer_accepts_all(self, trained_model):
        pipeline = TeleopPipeline(trained_model, policy=arb.Policy.LAST_WRITER)
        pipeline.join("a", 0)
        pipeline.join("b", 0)
        ra = pipeline.route_command("a", MoveTcp(0.5, 0.0, 0.15), 1)
        rb = pipeline.route_command("b", MoveTcp(0.6, 0.0, 0.15), 2)
        assert ra.accepted and rb.accepted

    def test_degenerate_frame_skipped(self, trained_model):
        pipeline = TeleopPipeline(trained_model)
        frame = make_frame([(0.5, 0.5, 0.0)] * 21, user="demo", ts=0)
        result = pipeline.process_frame(frame)
        assert result.degenerate
        assert not result.accepted and result.telemetry is None


class TestGoldenTraceFixture:
    def test_bundled_trace_matches_generator(self, golden_frames):
        from handpilot.hands import encode_trace_record

        bundled = scenario.load_bundled("pipette_demo.jsonl")
        regenerated = "".join(encode_trace_record(f) + "\n" for f in golden_frames)
        assert bundled == regenerated

    def test_bundled_scene_matches_generator(self):
        assert scenario.load_bundled("pipette.scene") == scenario.bundled_scene_text()

    def test_trace_timestamps_monotone_per_hand(self, golden_frames):
        last = {}
        for frame in golden_frames:
            key = (frame.user_id, frame.hand)
            assert frame.timestamp_ms >= last.get(key, -1)
            last[key] = frame.timestamp_ms
