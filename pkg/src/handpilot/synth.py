"""Synthetic labeled hand frames from a parametric 21-point skeleton.

No public gesture dataset exists for this pipeline, so training data is
generated by posing a palm-plus-five-finger skeleton with per-class bend
templates, jittering the bend angles and the global pose with Gaussian
noise, and projecting into image coordinates.  Everything is a pure
function of (class, seed, noise_scale).
"""

from __future__ import annotations

import math

import numpy as np

from .hands import (
    CLASS_INDEX,
    CLASS_ORDER,
    FINGER_BASES,
    GestureClass,
    Hand,
    HandFrame,
    LabeledSample,
    Landmark,
)

# Canonical skeleton, in units of the wrist-to-middle-MCP distance.
# Palm: five MCP base points on an arc around the wrist; each finger is a
# three-segment chain that curls out of the palm plane.
MCP_ANGLES = (-1.05, -0.30, 0.0, 0.28, 0.58)  # radians from the palm axis
MCP_RADII = (0.42, 0.95, 1.0, 0.97, 0.88)
SEGMENT_LENGTHS = (
    (0.40, 0.32, 0.26),  # thumb
    (0.47, 0.27, 0.21),  # index
    (0.50, 0.30, 0.22),  # middle
    (0.47, 0.28, 0.21),  # ring
    (0.38, 0.22, 0.18),  # pinky
)

CURL_FULL = 1.4  # template bend, radians per joint

# Per-class bend templates: 5 fingers x 3 joints.
_OPEN = np.zeros((5, 3))
_FIST = np.full((5, 3), CURL_FULL)
_POINT = np.array(
    [
        [CURL_FULL] * 3,  # thumb
        [0.0] * 3,        # index
        [0.0] * 3,        # middle
        [CURL_FULL] * 3,  # ring
        [CURL_FULL] * 3,  # pinky
    ]
)

BEND_TEMPLATES = {
    GestureClass.MOVE: _OPEN,
    GestureClass.ANGLE: _POINT,
    GestureClass.GRAB: _FIST,
}
NOGESTURE_BEND_RANGE = (0.3, 1.0)

IMAGE_CENTER = (0.5, 0.5)
BASE_SCALE = 0.14
DEFAULT_NOISE = 0.08
DEFAULT_CONFIDENCE = 0.95


def pose_skeleton(bends: np.ndarray, hand: Hand = Hand.RIGHT) -> np.ndarray:
    """Pose the canonical skeleton with the given 5x3 bend angles.

    Returns a (21, 3) array in canonical hand coordinates: wrist at the
    origin, palm in the xy plane, fingers curling toward +z.  Left hands are
    mirrored about x.
    """
    pts = np.zeros((21, 3))
    for f in range(5):
        phi = MCP_ANGLES[f]
        direction = np.array([math.sin(phi), math.cos(phi), 0.0])
        mcp = MCP_RADII[f] * direction
        base = FINGER_BASES[f]
        pts[base] = mcp
        pos = mcp.copy()
        cumulative = 0.0
        for j in range(3):
            cumulative += float(bends[f, j])
            # Curl rotates the bone direction out of the palm plane; for a
            # fixed finger the axis is constant, so consecutive bone
            # directions differ by exactly the joint bend.
            bone_dir = direction * math.cos(cumulative) + np.array(
                [0.0, 0.0, math.sin(cumulative)]
            )
            pos = pos + SEGMENT_LENGTHS[f][j] * bone_dir
            pts[base + 1 + j] = pos
    if hand is Hand.LEFT:
        pts[:, 0] *= -1.0
    return pts


def project_to_image(
    pts: np.ndarray,
    translation: tuple[float, float] = IMAGE_CENTER,
    rotation: float = 0.0,
    scale: float = BASE_SCALE,
) -> np.ndarray:
    """Apply an in-plane similarity transform and clamp xy into [0, 1]."""
    c, s = math.cos(rotation), math.sin(rotation)
    out = np.empty_like(pts)
    out[:, 0] = translation[0] + scale * (c * pts[:, 0] - s * pts[:, 1])
    out[:, 1] = translation[1] + scale * (s * pts[:, 0] + c * pts[:, 1])
    out[:, 2] = scale * pts[:, 2]
    out[:, 0] = np.clip(out[:, 0], 0.0, 1.0)
    out[:, 1] = np.clip(out[:, 1], 0.0, 1.0)
    return out


def frame_from_points(
    pts: np.ndarray,
    user_id: str = "synth",
    hand: Hand = Hand.RIGHT,
    timestamp_ms: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
) -> HandFrame:
    landmarks = tuple(Landmark(float(x), float(y), float(z)) for x, y, z in pts)
    return HandFrame(
        user_id=user_id,
        hand=hand,
        landmarks=landmarks,
        timestamp_ms=timestamp_ms,
        confidence=confidence,
    )


def template_bends(gesture: GestureClass, rng: np.random.Generator | None = None) -> np.ndarray:
    if gesture is GestureClass.NOGESTURE:
        if rng is None:
            raise ValueError("NoGesture template needs an rng")
        lo, hi = NOGESTURE_BEND_RANGE
        return rng.uniform(lo, hi, size=(5, 3))
    return BEND_TEMPLATES[gesture].copy()


def _sample_rng(seed: int, gesture: GestureClass, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed, CLASS_INDEX[gesture], index))
    )


def generate_sample(
    gesture: GestureClass,
    seed: int,
    noise_scale: float = DEFAULT_NOISE,
    index: int = 0,
    hand: Hand = Hand.RIGHT,
    user_id: str = "synth",
    timestamp_ms: int = 0,
) -> HandFrame:
    """Generate one synthetic frame of the given class, deterministically."""
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    rng = _sample_rng(seed, gesture, index)
    bends = template_bends(gesture, rng)
    if noise_scale > 0:
        bends = bends + rng.normal(0.0, noise_scale, size=(5, 3))
    else:
        # Keep the rng stream identical whether or not noise applies.
        rng.normal(0.0, 1.0, size=(5, 3))
    jitter = rng.normal(0.0, 1.0, size=4)  # tx, ty, rotation, log-scale
    if noise_scale > 0:
        tx = IMAGE_CENTER[0] + 0.5 * noise_scale * jitter[0]
        ty = IMAGE_CENTER[1] + 0.5 * noise_scale * jitter[1]
        rotation = noise_scale * jitter[2]
        scale = BASE_SCALE * math.exp(0.5 * noise_scale * jitter[3])
    else:
        tx, ty = IMAGE_CENTER
        rotation = 0.0
        scale = BASE_SCALE
    pts = pose_skeleton(bends, hand)
    img = project_to_image(pts, (tx, ty), rotation, scale)
    return frame_from_points(
        img, user_id=user_id, hand=hand, timestamp_ms=timestamp_ms
    )


def generate_dataset(
    counts: dict[GestureClass, int],
    seed: int,
    noise_scale: float = DEFAULT_NOISE,
    frame_period_ms: int = 33,
) -> list[LabeledSample]:
    """Deterministic labeled dataset with the requested per-class counts.

    Per-sample randomness is keyed by (seed, class, index) so any subset is
    reproducible; the final order is a seeded shuffle, and timestamps are
    assigned after shuffling so the file is a valid (monotone) trace.
    """
    for cls, n in counts.items():
        if n < 0:
            raise ValueError(f"negative count for {cls}")
    samples = []
    for cls in CLASS_ORDER:
        n = counts.get(cls, 0)
        for i in range(n):
            hand = Hand.RIGHT if i % 2 == 0 else Hand.LEFT
            frame = generate_sample(
                cls, seed, noise_scale, index=i, hand=hand
            )
            samples.append(LabeledSample(frame=frame, label=cls))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5A1AD)))
    order = shuffle_rng.permutation(len(samples))
    shuffled = [samples[i] for i in order]
    out = []
    for pos, sample in enumerate(shuffled):
        frame = sample.frame
        stamped = HandFrame(
            user_id=frame.user_id,
            hand=frame.hand,
            landmarks=frame.landmarks,
            timestamp_ms=pos * frame_period_ms,
            confidence=frame.confidence,
        )
        out.append(LabeledSample(frame=stamped, label=sample.label))
    return out


def paper_shaped_counts() -> dict[GestureClass, int]:
    """Class balance of the 1000-sample training corpus this stands in for."""
    return {
        GestureClass.MOVE: 200,
        GestureClass.ANGLE: 200,
        GestureClass.GRAB: 200,
        GestureClass.NOGESTURE: 400,
    }


def stratified_split(
    samples: list[LabeledSample], holdout_fraction: float, seed: int
) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Deterministic per-class split into (train, heldout)."""
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in [0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5F17)))
    by_class: dict[GestureClass, list[int]] = {c: [] for c in CLASS_ORDER}
    for i, s in enumerate(samples):
        by_class[s.label].append(i)
    test_idx = set()
    for cls in CLASS_ORDER:
        idx = by_class[cls]
        if not idx:
            continue
        n_test = int(round(holdout_fraction * len(idx)))
        picked = rng.permutation(len(idx))[:n_test]
        test_idx.update(idx[int(p)] for p in picked)
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test
