"""Gesture-driven teleoperation of a simulated robot cell.

Hand-landmark streams are classified into gestures by a from-scratch
gradient-boosted tree ensemble, debounced into stable commands, arbitrated
across users, and executed by a deterministic 6-DoF arm + gripper + tactile
simulator, all reachable over a versioned wire protocol.
"""

__version__ = "0.1.0"

from .hands import GestureClass, Hand, HandFrame, Landmark  # noqa: F401
