"""Small rigid-transform helpers (quaternions stored as xyzw)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q)


def quat_multiply(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def quat_conjugate(q) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) v by quaternion q."""
    v = np.asarray(v, dtype=np.float64)
    x, y, z, w = q
    u = np.array([x, y, z])
    single = v.ndim == 1
    vv = np.atleast_2d(v)
    t = 2.0 * np.cross(u, vv)
    out = vv + w * t + np.cross(u, t)
    return out[0] if single else out


def quat_angle_between(a, b) -> float:
    d = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    return 2.0 * np.arccos(min(1.0, d))


def quat_slerp(a, b, t: float) -> np.ndarray:
    a = quat_normalize(a)
    b = quat_normalize(b)
    d = float(np.dot(a, b))
    if d < 0.0:
        b = -b
        d = -d
    if d > 1.0 - 1e-10:
        return quat_normalize(a + t * (b - a))
    theta = np.arccos(d)
    return (np.sin((1 - t) * theta) * a + np.sin(t * theta) * b) / np.sin(theta)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-15 or abs(angle) < 1e-15:
        return IDENTITY_QUAT.copy()
    axis = axis / n
    s = np.sin(angle / 2.0)
    return np.array([axis[0] * s, axis[1] * s, axis[2] * s, np.cos(angle / 2.0)])


def random_quat(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (Shoemake's method)."""
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1 - u1), np.sqrt(u1)
    return np.array([
        a * np.sin(2 * np.pi * u2),
        a * np.cos(2 * np.pi * u2),
        b * np.sin(2 * np.pi * u3),
        b * np.cos(2 * np.pi * u3),
    ])


@dataclass
class Pose:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).copy()
        self.quaternion = quat_normalize(self.quaternion)

    def transform(self, local) -> np.ndarray:
        return quat_rotate(self.quaternion, local) + self.position

    def inverse_transform(self, world) -> np.ndarray:
        return quat_rotate(quat_conjugate(self.quaternion), np.asarray(world) - self.position)

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.quaternion.copy())
