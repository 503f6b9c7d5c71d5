"""288-dimensional per-frame feature vector for the gesture classifier.

Three families, concatenated in fixed order:

  [0..62]    normalized landmark coordinates (x, y, z per landmark),
             wrist translated to the origin and the hand scaled so the
             wrist-to-middle-MCP distance is 1
  [63..77]   joint bend angles, radians, thumb..pinky and proximal..distal
             (0 = straight finger)
  [78..287]  Euclidean distances between all 210 landmark pairs of the
             normalized hand, pairs (i, j) with i < j in lexicographic order

All three families are invariant under in-plane translation and uniform
scaling of the input frame.  Global rotation is deliberately kept as signal
(the angle gesture encodes orientation).
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateHand
from .hands import FINGER_BASES, FINGER_NAMES, HandFrame, MIDDLE_MCP, N_LANDMARKS, WRIST

EPSILON = 1e-6
N_FEATURES = 288
N_COORDS = 63
N_ANGLES = 15
N_DISTANCES = 210

PAIR_ORDER: tuple[tuple[int, int], ...] = tuple(
    (i, j) for i in range(N_LANDMARKS) for j in range(i + 1, N_LANDMARKS)
)

# Human-readable name for every feature index; a bijection onto [0, 288).
FEATURE_NAMES: tuple[str, ...] = (
    tuple(f"lm{i:02d}.{axis}" for i in range(N_LANDMARKS) for axis in "xyz")
    + tuple(
        f"bend.{name}.{joint}" for name in FINGER_NAMES for joint in range(3)
    )
    + tuple(f"dist.{i:02d}.{j:02d}" for i, j in PAIR_ORDER)
)

# Bone chains used for joint angles: wrist -> MCP -> PIP -> DIP -> TIP.
FINGER_CHAINS: tuple[tuple[int, ...], ...] = tuple(
    (WRIST, base, base + 1, base + 2, base + 3) for base in FINGER_BASES
)


def frame_points(frame: HandFrame) -> np.ndarray:
    """Landmarks as a (21, 3) float array."""
    return np.array([[lm.x, lm.y, lm.z] for lm in frame.landmarks], dtype=np.float64)


def _normalize_points(pts: np.ndarray) -> np.ndarray:
    centered = pts - pts[WRIST]
    scale = float(np.linalg.norm(centered[MIDDLE_MCP]))
    if scale < EPSILON:
        raise DegenerateHand(
            f"wrist-to-middle-MCP distance {scale:.3g} below {EPSILON}"
        )
    return centered / scale


def normalize_landmarks(frame: HandFrame) -> np.ndarray:
    """63 coordinates of the wrist-anchored, unit-scaled hand."""
    return _normalize_points(frame_points(frame)).reshape(-1)


def joint_angles(frame: HandFrame) -> np.ndarray:
    """15 bend angles in [0, pi]; 0 means a perfectly straight finger."""
    pts = frame_points(frame)
    angles = np.empty(N_ANGLES)
    k = 0
    for chain in FINGER_CHAINS:
        bones = []
        for a, b in zip(chain[:-1], chain[1:]):
            v = pts[b] - pts[a]
            norm = float(np.linalg.norm(v))
            if norm < EPSILON:
                raise DegenerateHand(f"zero-length bone {a}-{b}")
            bones.append(v / norm)
        for u, v in zip(bones[:-1], bones[1:]):
            dot = float(np.clip(np.dot(u, v), -1.0, 1.0))
            angles[k] = np.arccos(dot)
            k += 1
    return angles


def pairwise_distances(frame: HandFrame) -> np.ndarray:
    """210 distances between normalized landmarks, pair order (0,1)..(19,20)."""
    pts = _normalize_points(frame_points(frame))
    diffs = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diffs * diffs, axis=-1))
    iu = np.triu_indices(N_LANDMARKS, k=1)
    return dist[iu]


def feature_vector(frame: HandFrame) -> np.ndarray:
    """Full 288-entry vector: [normalized coords | bend angles | distances]."""
    return np.concatenate(
        [normalize_landmarks(frame), joint_angles(frame), pairwise_distances(frame)]
    )


def thumb_index_distance(frame: HandFrame) -> float:
    """Normalized thumb-tip to index-tip distance (the fingerdistance signal)."""
    from .hands import INDEX_TIP, THUMB_TIP

    pts = _normalize_points(frame_points(frame))
    return float(np.linalg.norm(pts[THUMB_TIP] - pts[INDEX_TIP]))
