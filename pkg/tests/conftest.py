import numpy as np
import pytest

from handpilot import features, gbdt, synth
from handpilot.hands import GestureClass, Hand, HandFrame, Landmark


@pytest.fixture(scope="session")
def paper_dataset():
    """The paper-shaped synthetic corpus: 1000 samples, 200/200/200/400."""
    return synth.generate_dataset(synth.paper_shaped_counts(), seed=42, noise_scale=0.08)


@pytest.fixture(scope="session")
def paper_split(paper_dataset):
    train, test = synth.stratified_split(paper_dataset, 0.2, seed=42)
    to_pairs = lambda part: [(features.feature_vector(s.frame), s.label) for s in part]
    return to_pairs(train), to_pairs(test)


@pytest.fixture(scope="session")
def trained_model(paper_split):
    train_pairs, _ = paper_split
    return gbdt.train(train_pairs, gbdt.TrainConfig())


@pytest.fixture(scope="session")
def model_file(trained_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.bin"
    path.write_bytes(gbdt.save_model(trained_model))
    return path


def make_frame(points, user="u1", hand=Hand.RIGHT, ts=0, conf=0.9) -> HandFrame:
    landmarks = tuple(Landmark(float(x), float(y), float(z)) for x, y, z in points)
    return HandFrame(
        user_id=user, hand=hand, landmarks=landmarks, timestamp_ms=ts, confidence=conf
    )


def random_valid_frame(rng: np.random.Generator, ts=0) -> HandFrame:
    cls = list(GestureClass)[int(rng.integers(0, 4))]
    return synth.generate_sample(
        cls, seed=int(rng.integers(0, 2**31)), noise_scale=0.05, timestamp_ms=ts
    )
