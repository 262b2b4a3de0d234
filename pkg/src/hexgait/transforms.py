"""Homogeneous 4x4 rigid transforms.

All kinematics in this package passes poses around as plain (4, 4) numpy
arrays: a 3x3 rotation block, a translation column and a (0, 0, 0, 1)
bottom row. Frames are right-handed, x forward, y left, z up.
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.eye(4)


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    t = np.eye(4)
    t[1, 1], t[1, 2] = c, -s
    t[2, 1], t[2, 2] = s, c
    return t


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    t = np.eye(4)
    t[0, 0], t[0, 2] = c, s
    t[2, 0], t[2, 2] = -s, c
    return t


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    t = np.eye(4)
    t[0, 0], t[0, 1] = c, -s
    t[1, 0], t[1, 1] = s, c
    return t


def translation(xyz) -> np.ndarray:
    t = np.eye(4)
    t[:3, 3] = xyz
    return t


def from_xyz_rpy(xyz, rpy) -> np.ndarray:
    """Pose from translation and roll/pitch/yaw (applied as Rz*Ry*Rx)."""
    t = rot_z(rpy[2]) @ rot_y(rpy[1]) @ rot_x(rpy[0])
    t[:3, 3] = xyz
    return t


def to_xyz_rpy(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`from_xyz_rpy` (pitch taken in [-pi/2, pi/2])."""
    r = t[:3, :3]
    pitch = np.arcsin(np.clip(-r[2, 0], -1.0, 1.0))
    if abs(r[2, 0]) < 1.0 - 1e-12:
        roll = np.arctan2(r[2, 1], r[2, 2])
        yaw = np.arctan2(r[1, 0], r[0, 0])
    else:
        # gimbal lock: yaw/roll indistinguishable, fold into roll
        roll = np.arctan2(-r[1, 2], r[1, 1])
        yaw = 0.0
    return t[:3, 3].copy(), np.array([roll, pitch, yaw])


def invert(t: np.ndarray) -> np.ndarray:
    """Inverse of a rigid transform (uses R^T, never a general inverse)."""
    out = np.eye(4)
    r = t[:3, :3]
    out[:3, :3] = r.T
    out[:3, 3] = -r.T @ t[:3, 3]
    return out


def apply(t: np.ndarray, point) -> np.ndarray:
    """Transform a 3-point (or (n, 3) array of points)."""
    p = np.asarray(point, dtype=float)
    if p.ndim == 1:
        return t[:3, :3] @ p + t[:3, 3]
    return p @ t[:3, :3].T + t[:3, 3]


def rotate(t: np.ndarray, vector) -> np.ndarray:
    """Rotate a direction vector (no translation)."""
    return t[:3, :3] @ np.asarray(vector, dtype=float)


def is_rigid(t: np.ndarray, tol: float = 1e-9) -> bool:
    """Check orthonormality, det(R) = +1 and the (0,0,0,1) bottom row."""
    if t.shape != (4, 4) or not np.all(np.isfinite(t)):
        return False
    r = t[:3, :3]
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        return False
    if abs(np.linalg.det(r) - 1.0) > tol:
        return False
    return bool(np.max(np.abs(t[3] - np.array([0.0, 0.0, 0.0, 1.0]))) <= tol)


def rotation_vector(r: np.ndarray) -> np.ndarray:
    """Axis-angle (rotation vector) of a 3x3 rotation matrix."""
    cos_a = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_a)
    if angle < 1e-12:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # near pi: extract axis from R + I
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(m), 0.0))
        # fix signs from off-diagonals
        if m[0, 1] < 0:
            axis[1] = -axis[1]
        if m[0, 2] < 0:
            axis[2] = -axis[2]
        n = np.linalg.norm(axis)
        return axis / n * angle if n > 0 else np.zeros(3)
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return axis / (2.0 * np.sin(angle)) * angle


def align_z_to(normal) -> np.ndarray:
    """Minimal rotation taking +z onto the given (unit) direction."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(z, n)
    s = np.linalg.norm(axis)
    c = float(z @ n)
    t = np.eye(4)
    if s < 1e-12:
        if c < 0:  # antiparallel: flip about x
            t[:3, :3] = np.diag([1.0, -1.0, -1.0])
        return t
    axis = axis / s
    angle = np.arctan2(s, c)
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    t[:3, :3] = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
    return t
