"""Quaternion and Euler-angle helpers.

Conventions used throughout the package:

* quaternions are numpy arrays ``[w, x, y, z]`` with unit norm, mapping
  body-frame vectors into the world frame;
* Euler angles are aerospace Z-Y-X intrinsic (yaw about z, then pitch
  about y, then roll about x), radians;
* the world frame is z-up, so a level, static accelerometer reads
  ``(0, 0, +g)``.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

GIMBAL_SIN_LIMIT = 1.0 - 1e-6


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
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


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_rotate(q: np.ndarray, v) -> np.ndarray:
    """Rotate a body-frame vector into the world frame."""
    p = np.array([0.0, v[0], v[1], v[2]])
    return quat_mul(quat_mul(q, p), quat_conj(q))[1:]


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle of ``q`` in [0, pi], insensitive to the double cover."""
    vec = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return 2.0 * math.atan2(vec, abs(q[0]))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    ax = np.asarray(axis, dtype=float)
    n = np.linalg.norm(ax)
    if n == 0.0:
        return IDENTITY.copy()
    half = 0.5 * angle
    s = math.sin(half) / n
    return np.array([math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s])


def quat_slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation from ``a`` (t=0) to ``b`` (t=1), shortest arc."""
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + t * (b - a))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return (math.sin((1.0 - t) * theta) / s) * a + (math.sin(t * theta) / s) * b


def euler_to_quat(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll * 0.5), math.sin(roll * 0.5)
    cp, sp = math.cos(pitch * 0.5), math.sin(pitch * 0.5)
    cy, sy = math.cos(yaw * 0.5), math.sin(yaw * 0.5)
    return np.array(
        [
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        ]
    )


def quat_to_euler(q: np.ndarray) -> np.ndarray:
    """Z-Y-X intrinsic (roll, pitch, yaw) of a unit quaternion.

    Near the pitch singularity (|sin pitch| > 1 - 1e-6) roll is fixed to 0
    and yaw absorbs the remaining free angle.
    """
    w, x, y, z = q
    sinp = 2.0 * (w * y - x * z)
    if abs(sinp) > GIMBAL_SIN_LIMIT:
        pitch = math.copysign(math.pi / 2.0, sinp)
        return np.array([0.0, pitch, 2.0 * math.atan2(z, w)])
    pitch = math.asin(sinp)
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return np.array([roll, pitch, yaw])


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a
