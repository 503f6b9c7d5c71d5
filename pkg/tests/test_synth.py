import numpy as np

from handpilot import features, synth
from handpilot.hands import GestureClass, Hand, validate_frame

PALM_IDX = [0, 1, 5, 9, 13, 17]
TIP_IDX = [4, 8, 12, 16, 20]


def tip_to_palm_distances(frame):
    pts = features.frame_points(frame)
    palm_center = pts[PALM_IDX].mean(axis=0)
    return np.linalg.norm(pts[TIP_IDX] - palm_center, axis=1)


class TestGenerateSample:
    def test_deterministic(self):
        a = synth.generate_sample(GestureClass.GRAB, seed=7, noise_scale=0.0)
        b = synth.generate_sample(GestureClass.GRAB, seed=7, noise_scale=0.0)
        assert a == b
        c = synth.generate_sample(GestureClass.GRAB, seed=7, noise_scale=0.1)
        d = synth.generate_sample(GestureClass.GRAB, seed=7, noise_scale=0.1)
        assert c == d

    def test_grab_fingertips_closer_to_palm_than_move(self):
        grab = synth.generate_sample(GestureClass.GRAB, seed=7, noise_scale=0.0)
        move = synth.generate_sample(GestureClass.MOVE, seed=7, noise_scale=0.0)
        assert tip_to_palm_distances(grab).max() < tip_to_palm_distances(move).min()

    def test_noisy_samples_are_valid(self):
        for i in range(1000):
            frame = synth.generate_sample(
                GestureClass.NOGESTURE, seed=3, noise_scale=0.05, index=i
            )
            assert validate_frame(frame) == []

    def test_left_hand_is_mirrored(self):
        right = synth.generate_sample(GestureClass.MOVE, seed=1, noise_scale=0.0)
        left = synth.generate_sample(
            GestureClass.MOVE, seed=1, noise_scale=0.0, hand=Hand.LEFT
        )
        r = features.frame_points(right) - features.frame_points(right)[0]
        l = features.frame_points(left) - features.frame_points(left)[0]
        assert np.allclose(l[:, 0], -r[:, 0], atol=1e-12)
        assert np.allclose(l[:, 1:], r[:, 1:], atol=1e-12)


class TestGenerateDataset:
    def test_paper_shaped_counts(self):
        samples = synth.generate_dataset(
            synth.paper_shaped_counts(), seed=42, noise_scale=0.08
        )
        assert len(samples) == 1000
        tally = {c: 0 for c in GestureClass}
        for s in samples:
            tally[s.label] += 1
        assert tally[GestureClass.MOVE] == 200
        assert tally[GestureClass.ANGLE] == 200
        assert tally[GestureClass.GRAB] == 200
        assert tally[GestureClass.NOGESTURE] == 400

    def test_zero_counts(self):
        assert synth.generate_dataset({c: 0 for c in GestureClass}, seed=1) == []

    def test_deterministic(self):
        counts = {GestureClass.MOVE: 5, GestureClass.GRAB: 5}
        a = synth.generate_dataset(counts, seed=9, noise_scale=0.08)
        b = synth.generate_dataset(counts, seed=9, noise_scale=0.08)
        assert a == b

    def test_timestamps_monotone(self):
        samples = synth.generate_dataset(
            {GestureClass.MOVE: 30, GestureClass.ANGLE: 30}, seed=2
        )
        stamps = [s.frame.timestamp_ms for s in samples]
        assert stamps == sorted(stamps)

    def test_every_sample_valid(self, paper_dataset):
        assert all(validate_frame(s.frame) == [] for s in paper_dataset)


class TestClassSeparation:
    def test_templates_pairwise_distinct_in_feature_space(self):
        vectors = {}
        for cls in GestureClass:
            frame = synth.generate_sample(cls, seed=5, noise_scale=0.0)
            vectors[cls] = features.feature_vector(frame)
        classes = list(vectors)
        for i, a in enumerate(classes):
            for b in classes[i + 1 :]:
                assert np.linalg.norm(vectors[a] - vectors[b]) > 0


class TestStratifiedSplit:
    def test_split_sizes_and_disjoint(self, paper_dataset):
        train, test = synth.stratified_split(paper_dataset, 0.2, seed=42)
        assert len(train) == 800 and len(test) == 200
        per_class = {c: 0 for c in GestureClass}
        for s in test:
            per_class[s.label] += 1
        assert per_class[GestureClass.MOVE] == 40
        assert per_class[GestureClass.NOGESTURE] == 80

    def test_split_deterministic(self, paper_dataset):
        a = synth.stratified_split(paper_dataset, 0.2, seed=42)
        b = synth.stratified_split(paper_dataset, 0.2, seed=42)
        assert a == b
