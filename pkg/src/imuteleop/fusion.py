"""Orientation estimation stack: median outlier suppression, gyro bias
calibration, complementary roll/pitch fusion for the finger sensors and the
Madgwick quaternion filter for the wrist."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rotations import IDENTITY, quat_to_euler

DEFAULT_ACCEL_MIN = 0.5  # m/s^2, below this the tilt observation is unusable


class DegenerateAccel(ValueError):
    """Accelerometer magnitude too small for a tilt observation."""


class NonPositiveDt(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


class MotionDuringCalibration(ValueError):
    pass


def accel_tilt(accel, accel_min: float = DEFAULT_ACCEL_MIN) -> np.ndarray:
    """Roll/pitch tilt from a body-frame accelerometer vector.

    Returns ``(roll, pitch, 0.0)`` radians; the z component is identically
    zero because heading is unobservable from gravity alone.
    """
    ax, ay, az = float(accel[0]), float(accel[1]), float(accel[2])
    if math.sqrt(ax * ax + ay * ay + az * az) <= accel_min:
        raise DegenerateAccel(f"|a| <= {accel_min} m/s^2")
    roll = math.atan2(ay, az)
    pitch = math.atan2(-ax, math.sqrt(ay * ay + az * az))
    return np.array([roll, pitch, 0.0])


class MedianWindow:
    """Streaming (2n+1)-sample median, the outlier gate ahead of fusion.

    The centered window is realized as a delay-n filter; until the window
    fills, samples pass through unchanged.
    """

    def __init__(self, half_width: int = 2):
        if half_width < 1:
            raise ValueError("half_width must be >= 1")
        self.half_width = half_width
        self._buf = np.empty(2 * half_width + 1)
        self._fill = 0
        self._idx = 0

    @property
    def warm(self) -> bool:
        return self._fill == self._buf.shape[0]

    def push(self, x: float) -> float:
        self._buf[self._idx] = x
        self._idx = (self._idx + 1) % self._buf.shape[0]
        if self._fill < self._buf.shape[0]:
            self._fill += 1
            if self._fill < self._buf.shape[0]:
                return x
        return float(kernels.window_median(self._buf))

    def run(self, xs) -> np.ndarray:
        """Filter a whole array as if pushed sample by sample from empty."""
        return kernels.sliding_median(np.asarray(xs, dtype=float), self.half_width)


@dataclass(frozen=True)
class ZeroOffset:
    """Frozen per-axis gyro bias, the mean of a stationary capture window."""

    bias: np.ndarray
    sample_count: int

    def apply(self, gyro) -> np.ndarray:
        return np.asarray(gyro, dtype=float) - self.bias


def zero_offset_calibrate(
    gyro_samples,
    min_samples: int = 100,
    motion_tolerance: float = 0.1,
) -> ZeroOffset:
    """Estimate the gyro bias from samples captured at rest.

    Raises ``MotionDuringCalibration`` if any sample strays more than
    ``motion_tolerance`` rad/s (per axis) from the running mean, which
    indicates the glove was moving during the capture.
    """
    samples = np.asarray(gyro_samples, dtype=float).reshape(-1, 3)
    if samples.shape[0] < min_samples:
        raise InsufficientSamples(f"{samples.shape[0]} < {min_samples} samples")
    running_sum = np.zeros(3)
    for k in range(samples.shape[0]):
        running_sum += samples[k]
        running_mean = running_sum / (k + 1)
        if np.max(np.abs(samples[k] - running_mean)) > motion_tolerance:
            raise MotionDuringCalibration(f"sample {k} deviates from running mean")
    return ZeroOffset(bias=running_sum / samples.shape[0], sample_count=samples.shape[0])


class ComplementaryFilter:
    """First-order roll/pitch fusion for a finger sensor.

    Blends integrated gyro angles with accelerometer tilt through the
    coefficient ``alpha`` in [0, 1] (1 = pure gyro, 0 = pure tilt).  Heading
    is fixed at zero: finger motion is treated as planar.
    """

    def __init__(self, alpha: float = 0.98):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        self.alpha = alpha
        self.roll = 0.0
        self.pitch = 0.0
        self.seconds_seen = 0.0

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, 0.0])

    def update(self, gyro, accel, dt: float) -> np.ndarray:
        if dt <= 0.0:
            raise NonPositiveDt(f"dt={dt}")
        a = self.alpha
        roll_gyro = self.roll + float(gyro[0]) * dt
        pitch_gyro = self.pitch + float(gyro[1]) * dt
        try:
            tilt = accel_tilt(accel)
        except DegenerateAccel:
            self.roll, self.pitch = roll_gyro, pitch_gyro
        else:
            self.roll = a * roll_gyro + (1.0 - a) * tilt[0]
            self.pitch = a * pitch_gyro + (1.0 - a) * tilt[1]
        self.seconds_seen += dt
        return self.angles

    def run(self, gyros, accels, dts) -> np.ndarray:
        """Batch-process a trace; returns (N, 2) roll/pitch, state advanced."""
        gyros = np.asarray(gyros, dtype=float).reshape(-1, 3)
        accels = np.asarray(accels, dtype=float).reshape(-1, 3)
        dts = np.asarray(dts, dtype=float)
        if np.any(dts <= 0.0):
            raise NonPositiveDt("all dt must be > 0")
        n = gyros.shape[0]
        tilt_r = np.zeros(n)
        tilt_p = np.zeros(n)
        ok = np.zeros(n, dtype=np.bool_)
        for k in range(n):
            try:
                t = accel_tilt(accels[k])
            except DegenerateAccel:
                continue
            tilt_r[k], tilt_p[k], ok[k] = t[0], t[1], True
        rolls = kernels.complementary_scan(self.roll, gyros[:, 0], tilt_r, ok, self.alpha, dts)
        pitches = kernels.complementary_scan(self.pitch, gyros[:, 1], tilt_p, ok, self.alpha, dts)
        self.roll = float(rolls[-1]) if n else self.roll
        self.pitch = float(pitches[-1]) if n else self.pitch
        self.seconds_seen += float(np.sum(dts))
        return np.column_stack([rolls, pitches])


class MadgwickFilter:
    """Quaternion orientation estimator for the wrist sensor.

    Gyro propagation plus a normalized gradient-descent correction that
    pulls the predicted gravity direction onto the measured accelerometer
    vector; step size ``beta``.  Magnetometer-free, so yaw is relative to
    the startup heading.
    """

    def __init__(self, beta: float = 0.1):
        if beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        self.beta = beta
        self.q = IDENTITY.copy()
        self.seconds_seen = 0.0

    @property
    def euler(self) -> np.ndarray:
        return quat_to_euler(self.q)

    def update(self, gyro, accel, dt: float) -> np.ndarray:
        if dt <= 0.0:
            raise NonPositiveDt(f"dt={dt}")
        self.q = kernels.madgwick_step(
            self.q,
            np.asarray(gyro, dtype=float),
            np.asarray(accel, dtype=float),
            self.beta,
            dt,
            DEFAULT_ACCEL_MIN,
        )
        self.seconds_seen += dt
        return self.q

    def run(self, gyros, accels, dts) -> np.ndarray:
        """Batch-process a trace; returns (N, 4) quaternions, state advanced."""
        gyros = np.asarray(gyros, dtype=float).reshape(-1, 3)
        accels = np.asarray(accels, dtype=float).reshape(-1, 3)
        dts = np.asarray(dts, dtype=float)
        if np.any(dts <= 0.0):
            raise NonPositiveDt("all dt must be > 0")
        qs = kernels.madgwick_batch(self.q, gyros, accels, self.beta, dts, DEFAULT_ACCEL_MIN)
        if qs.shape[0]:
            self.q = qs[-1].copy()
        self.seconds_seen += float(np.sum(dts))
        return qs
