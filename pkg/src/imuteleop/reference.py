"""Zero-reference management: manual pose reset, slow drift correction of
the stored reference (zero-back), and the finger-gesture lock that holds
while the wrist is issuing flight commands."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .rotations import quat_angle, quat_conj, quat_mul, quat_slerp, quat_to_euler

ZERO_BACK_BAND = math.radians(5.0)   # only correct inside this deviation
ZERO_BACK_RATE = 0.02                # fraction of remaining deviation per second
STILLNESS_GYRO = 0.05                # rad/s, quasi-static gate
LOCK_DEADZONE = math.radians(5.0)    # matches the command mapper deadzone
LOCK_RELEASE_S = 0.3


class EstimatorCold(RuntimeError):
    """Orientation estimators have not warmed up / no reference is set."""


@dataclass(frozen=True)
class ReferencePose:
    q_ref: np.ndarray         # wrist zero pose, unit quaternion
    finger_ref: np.ndarray    # per-finger pitch offsets, radians
    established: bool = True


def reset_pose(current_wrist: np.ndarray, current_fingers, warm: bool) -> ReferencePose:
    """Capture the current orientations as the new zero reference."""
    if not warm:
        raise EstimatorCold("need >= 1 s of samples before a pose reset")
    return ReferencePose(
        q_ref=np.array(current_wrist, dtype=float),
        finger_ref=np.array(current_fingers, dtype=float),
        established=True,
    )


def relative_orientation(ref: ReferencePose, current: np.ndarray) -> np.ndarray:
    """Euler angles of the wrist relative to the stored reference."""
    if not ref.established:
        raise EstimatorCold("reference pose not established")
    return quat_to_euler(quat_mul(quat_conj(ref.q_ref), current))


def zero_back_update(
    ref: ReferencePose,
    current: np.ndarray,
    gyro_mag: float,
    dt: float,
    band: float = ZERO_BACK_BAND,
    rate: float = ZERO_BACK_RATE,
    stillness: float = STILLNESS_GYRO,
) -> ReferencePose:
    """Slew the reference toward the current pose to absorb slow drift.

    Acts only when the hand is quasi-static and already near the reference,
    so intentional commands are never fought; otherwise returns ``ref``
    unchanged (the same object).
    """
    if not ref.established or gyro_mag >= stillness:
        return ref
    deviation = quat_angle(quat_mul(quat_conj(ref.q_ref), current))
    if deviation >= band:
        return ref
    t = min(rate * dt, 1.0)
    return replace(ref, q_ref=quat_slerp(ref.q_ref, np.asarray(current, dtype=float), t))


@dataclass(frozen=True)
class LockState:
    locked: bool = False
    unlock_timer: float = 0.0


def finger_lock_update(
    lock: LockState,
    wrist_relative,
    dt: float,
    deadzone: float = LOCK_DEADZONE,
    release_s: float = LOCK_RELEASE_S,
) -> LockState:
    """Gesture lock driven by wrist command activity.

    Locks whenever |roll| or |pitch| leaves the control deadzone; once back
    inside, stays locked until ``release_s`` of quiet time has elapsed.
    """
    active = abs(float(wrist_relative[0])) > deadzone or abs(float(wrist_relative[1])) > deadzone
    if active:
        return LockState(locked=True, unlock_timer=release_s)
    if not lock.locked:
        return lock
    timer = lock.unlock_timer - dt
    if timer <= 1e-12:
        return LockState(locked=False, unlock_timer=0.0)
    return LockState(locked=True, unlock_timer=timer)
