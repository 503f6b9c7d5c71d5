"""Serial-arm kinematics: DH chains, FK, geometric Jacobian, and DLS IK.

The default chain is a generic 6-DoF elbow manipulator with link lengths at
the scale of a large collaborative arm.  The numbers are configuration, not
manufacturer data; everything that matters is verified by FK/IK
self-consistency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Unreachable


@dataclass(frozen=True)
class DhRow:
    a: float
    d: float
    alpha: float
    theta_offset: float = 0.0


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    quaternion: tuple[float, float, float, float]  # (w, x, y, z), w >= 0

    def position_array(self) -> np.ndarray:
        return np.array(self.position)

    def quaternion_array(self) -> np.ndarray:
        return np.array(self.quaternion)


@dataclass(frozen=True)
class KinematicChain:
    rows: tuple[DhRow, ...]
    joint_limits: tuple[tuple[float, float], ...]
    max_joint_speed: float = 1.0  # rad/s

    def __post_init__(self):
        if len(self.rows) != len(self.joint_limits):
            raise ValueError("one joint limit pair per DH row required")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError("joint limits must satisfy lo < hi")

    @property
    def dof(self) -> int:
        return len(self.rows)

    def clamp(self, q: np.ndarray) -> np.ndarray:
        lims = np.array(self.joint_limits)
        return np.clip(q, lims[:, 0], lims[:, 1])


_TWO_PI = 2.0 * math.pi

DEFAULT_CHAIN = KinematicChain(
    rows=(
        DhRow(a=0.0, d=0.128, alpha=math.pi / 2),
        DhRow(a=-0.612, d=0.0, alpha=0.0),
        DhRow(a=-0.572, d=0.0, alpha=0.0),
        DhRow(a=0.0, d=0.164, alpha=math.pi / 2),
        DhRow(a=0.0, d=0.116, alpha=-math.pi / 2),
        DhRow(a=0.0, d=0.092, alpha=0.0),
    ),
    joint_limits=((-_TWO_PI, _TWO_PI),) * 6,
    max_joint_speed=1.0,
)


# --- quaternions (w, x, y, z) -------------------------------------------------


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix, canonical w >= 0 form."""
    t = float(np.trace(R))
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(R)))
        if i == 0:
            s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            w = (R[2, 1] - R[1, 2]) / s
            x = 0.25 * s
            y = (R[0, 1] + R[1, 0]) / s
            z = (R[0, 2] + R[2, 0]) / s
        elif i == 1:
            s = math.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
            w = (R[0, 2] - R[2, 0]) / s
            x = (R[0, 1] + R[1, 0]) / s
            y = 0.25 * s
            z = (R[1, 2] + R[2, 1]) / s
        else:
            s = math.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
            w = (R[1, 0] - R[0, 1]) / s
            x = (R[0, 2] + R[2, 0]) / s
            y = (R[1, 2] + R[2, 1]) / s
            z = 0.25 * s
    return quat_normalize(np.array([w, x, y, z]))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, angle in [0, pi]) of a unit quaternion."""
    q = quat_normalize(q)
    w = min(max(float(q[0]), -1.0), 1.0)
    v = q[1:]
    s = float(np.linalg.norm(v))
    if s < 1e-12:
        return np.zeros(3)
    angle = 2.0 * math.atan2(s, w)
    return (angle / s) * v


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return quat_normalize(
        np.array(
            [
                math.cos(half),
                axis[0] * math.sin(half),
                axis[1] * math.sin(half),
                axis[2] * math.sin(half),
            ]
        )
    )


def rotation_error(q_target: np.ndarray, q_current: np.ndarray) -> np.ndarray:
    """Rotation vector carrying the current orientation onto the target."""
    return quat_log(quat_multiply(np.asarray(q_target), quat_conjugate(np.asarray(q_current))))


# --- forward kinematics ---------------------------------------------------------


def dh_transform(row: DhRow, q: float) -> np.ndarray:
    theta = q + row.theta_offset
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, row.a * ct],
            [st, ct * ca, -ct * sa, row.a * st],
            [0.0, sa, ca, row.d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def fk_transforms(chain: KinematicChain, q: np.ndarray) -> list[np.ndarray]:
    """Cumulative base-to-joint transforms; last entry is base-to-TCP."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (chain.dof,):
        raise ValueError(f"expected {chain.dof} joint angles, got {q.shape}")
    out = []
    T = np.eye(4)
    for row, qi in zip(chain.rows, q):
        T = T @ dh_transform(row, float(qi))
        out.append(T)
    return out


def fk(chain: KinematicChain, q: np.ndarray) -> Pose:
    T = fk_transforms(chain, q)[-1]
    quat = quat_from_matrix(T[:3, :3])
    return Pose(position=tuple(float(v) for v in T[:3, 3]), quaternion=tuple(float(v) for v in quat))


def jacobian(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (linear rows over angular rows) for revolute joints."""
    transforms = fk_transforms(chain, q)
    p_end = transforms[-1][:3, 3]
    J = np.zeros((6, chain.dof))
    z_prev = np.array([0.0, 0.0, 1.0])
    p_prev = np.zeros(3)
    for i in range(chain.dof):
        J[:3, i] = np.cross(z_prev, p_end - p_prev)
        J[3:, i] = z_prev
        z_prev = transforms[i][:3, 2]
        p_prev = transforms[i][:3, 3]
    return J


# --- inverse kinematics ----------------------------------------------------------


@dataclass(frozen=True)
class IkSettings:
    tol_pos: float = 1e-4  # meters
    tol_rot: float = 1e-3  # radians
    max_iters: int = 200
    damping: float = 0.1


def pose_error(target: Pose, current: Pose) -> np.ndarray:
    e = np.empty(6)
    e[:3] = target.position_array() - current.position_array()
    e[3:] = rotation_error(target.quaternion_array(), current.quaternion_array())
    return e


def ik(
    chain: KinematicChain,
    target: Pose,
    q0: np.ndarray,
    settings: IkSettings | None = None,
) -> np.ndarray:
    """Damped-least-squares IK from q0; raises Unreachable on failure.

    Each step solves dq = J^T (J J^T + lambda^2 I)^-1 e and clamps to joint
    limits, so the iteration stays stable near singularities.
    """
    settings = settings or IkSettings()
    q = chain.clamp(np.asarray(q0, dtype=np.float64).copy())
    lam2 = settings.damping * settings.damping
    eye = np.eye(6)

    def converged(err: np.ndarray) -> bool:
        return (
            np.linalg.norm(err[:3]) <= settings.tol_pos
            and np.linalg.norm(err[3:]) <= settings.tol_rot
        )

    e = pose_error(target, fk(chain, q))
    if converged(e):
        return q
    for _ in range(settings.max_iters):
        J = jacobian(chain, q)
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * eye, e)
        q = chain.clamp(q + dq)
        e = pose_error(target, fk(chain, q))
        if converged(e):
            return q
    raise Unreachable(
        f"IK did not converge within {settings.max_iters} iterations"
    )


def tool_down_pose(x: float, y: float, z: float, yaw: float) -> Pose:
    """Tool pointing straight down (-z), rotated about the vertical by yaw."""
    q_down = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), math.pi)
    q_yaw = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    quat = quat_normalize(quat_multiply(q_yaw, q_down))
    return Pose(position=(x, y, z), quaternion=tuple(float(v) for v in quat))
