import math

import numpy as np
import pytest

from conftest import make_frame, random_valid_frame
from handpilot import features, synth
from handpilot.errors import DegenerateHand
from handpilot.hands import GestureClass


def transform_frame(frame, dx=0.0, dy=0.0, scale=1.0):
    """Similarity transform about the wrist, in-plane shift afterwards."""
    wrist = frame.landmarks[0]
    points = []
    for lm in frame.landmarks:
        points.append(
            (
                wrist.x + scale * (lm.x - wrist.x) + dx,
                wrist.y + scale * (lm.y - wrist.y) + dy,
                scale * lm.z,
            )
        )
    return make_frame(points, user=frame.user_id, hand=frame.hand, ts=frame.timestamp_ms)


class TestNormalizeLandmarks:
    def test_wrist_maps_to_origin(self):
        rng = np.random.default_rng(0)
        out = features.normalize_landmarks(random_valid_frame(rng))
        assert out[0] == 0.0 and out[1] == 0.0 and out[2] == 0.0

    def test_translation_and_scale_invariance(self):
        rng = np.random.default_rng(1)
        frame = random_valid_frame(rng)
        moved = transform_frame(frame, dx=0.1, dy=0.2, scale=1.7)
        a = features.normalize_landmarks(frame)
        b = features.normalize_landmarks(moved)
        assert np.abs(a - b).max() < 1e-9

    def test_coincident_landmarks_degenerate(self):
        frame = make_frame([(0.5, 0.5, 0.0)] * 21)
        with pytest.raises(DegenerateHand):
            features.normalize_landmarks(frame)


class TestJointAngles:
    def test_straight_finger_zero_angles(self):
        # Exact binary-representable collinear steps so unit bone vectors
        # are bitwise equal and arccos(1.0) is exactly 0.
        points = [(0.0625, 0.0625, 0.0)] * 21
        direction = (0.03125, 0.015625, 0.0078125)
        for k, idx in enumerate((5, 6, 7, 8), start=1):
            points[idx] = (
                0.0625 + k * direction[0],
                0.0625 + k * direction[1],
                k * direction[2],
            )
        points[9] = (0.5, 0.5, 0.0)  # keep the scale reference sane
        for i, idx in enumerate([1, 2, 3, 4, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]):
            points[idx] = (0.9, 0.02 * (i + 1), 0.0)
        frame = make_frame(points)
        angles = features.joint_angles(frame)
        index_angles = angles[3:6]
        assert np.abs(index_angles).max() < 1e-9

    def test_right_angle_at_pip_only(self):
        points = [(0.1, 0.9, 0.0)] * 21
        # index finger: wrist->MCP->PIP straight along +x, then DIP/TIP along -y
        points[5] = (0.3, 0.9, 0.0)
        points[6] = (0.5, 0.9, 0.0)
        points[7] = (0.5, 0.7, 0.0)
        points[8] = (0.5, 0.5, 0.0)
        points[9] = (0.1, 0.5, 0.0)
        for i, idx in enumerate([1, 2, 3, 4, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]):
            points[idx] = (0.8, 0.05 + 0.02 * i, 0.0)
        frame = make_frame(points)
        angles = features.joint_angles(frame)
        # index finger bends: MCP 0, PIP pi/2, DIP 0
        assert abs(angles[3] - 0.0) < 1e-9
        assert abs(angles[4] - math.pi / 2) < 1e-9
        assert abs(angles[5] - 0.0) < 1e-9

    def test_grab_template_bends(self):
        frame = synth.generate_sample(GestureClass.GRAB, seed=3, noise_scale=0.0)
        angles = features.joint_angles(frame)
        assert np.abs(angles - 1.4).max() < 1e-6

    def test_angles_in_range_random_frames(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            angles = features.joint_angles(random_valid_frame(rng))
            assert np.all(angles >= 0.0) and np.all(angles <= math.pi)

    def test_arccos_agrees_with_atan2_oracle(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            frame = random_valid_frame(rng)
            pts = features.frame_points(frame)
            oracle = []
            for chain in features.FINGER_CHAINS:
                bones = [
                    (pts[b] - pts[a]) / np.linalg.norm(pts[b] - pts[a])
                    for a, b in zip(chain[:-1], chain[1:])
                ]
                for u, v in zip(bones[:-1], bones[1:]):
                    oracle.append(math.atan2(np.linalg.norm(np.cross(u, v)), float(np.dot(u, v))))
            worst = max(worst, float(np.abs(features.joint_angles(frame) - np.array(oracle)).max()))
        assert worst < 1e-9

    def test_zero_length_bone_degenerate(self):
        points = [(0.1 + 0.03 * i, 0.5, 0.0) for i in range(21)]
        points[6] = points[5]  # index MCP == PIP
        with pytest.raises(DegenerateHand):
            features.joint_angles(make_frame(points))


class TestPairwiseDistances:
    def test_scale_reference_pair_is_one(self):
        rng = np.random.default_rng(6)
        dist = features.pairwise_distances(random_valid_frame(rng))
        pair_idx = features.PAIR_ORDER.index((0, 9))
        assert abs(dist[pair_idx] - 1.0) < 1e-9

    def test_all_positive_for_distinct_landmarks(self):
        rng = np.random.default_rng(7)
        dist = features.pairwise_distances(random_valid_frame(rng))
        assert np.all(dist > 0)

    def test_reflection_invariance(self):
        rng = np.random.default_rng(8)
        frame = random_valid_frame(rng)
        mirrored = make_frame([(1.0 - lm.x, lm.y, lm.z) for lm in frame.landmarks])
        a = features.pairwise_distances(frame)
        b = features.pairwise_distances(mirrored)
        assert np.abs(a - b).max() < 1e-9


class TestFeatureVector:
    def test_length_and_finite(self):
        rng = np.random.default_rng(9)
        vec = features.feature_vector(random_valid_frame(rng))
        assert vec.shape == (288,)
        assert np.all(np.isfinite(vec))

    def test_similarity_invariance(self):
        rng = np.random.default_rng(10)
        frame = random_valid_frame(rng)
        moved = transform_frame(frame, dx=0.05, dy=-0.03, scale=1.4)
        assert np.abs(features.feature_vector(frame) - features.feature_vector(moved)).max() < 1e-9

    def test_grab_vs_move_distance(self):
        grab = features.feature_vector(
            synth.generate_sample(GestureClass.GRAB, seed=2, noise_scale=0.0)
        )
        move = features.feature_vector(
            synth.generate_sample(GestureClass.MOVE, seed=2, noise_scale=0.0)
        )
        assert np.linalg.norm(grab - move) > 1.0

    def test_index_map_is_bijection(self):
        assert len(features.FEATURE_NAMES) == 288
        assert len(set(features.FEATURE_NAMES)) == 288
        assert len(features.PAIR_ORDER) == 210
        assert features.PAIR_ORDER[0] == (0, 1)
        assert features.PAIR_ORDER[-1] == (19, 20)
        # family boundaries
        assert features.FEATURE_NAMES[0] == "lm00.x"
        assert features.FEATURE_NAMES[62] == "lm20.z"
        assert features.FEATURE_NAMES[63].startswith("bend.thumb")
        assert features.FEATURE_NAMES[77].startswith("bend.pinky")
        assert features.FEATURE_NAMES[78] == "dist.00.01"
        assert features.FEATURE_NAMES[287] == "dist.19.20"
