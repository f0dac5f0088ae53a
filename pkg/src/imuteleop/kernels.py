"""Hot numeric kernels for the orientation pipeline.

Every function here is compiled with numba's ``@njit`` when numba is
importable; setting ``IMUTELEOP_PURE_NUMPY=1`` forces the plain
numpy/Python implementations instead.  Both paths execute the same
source, so results are identical; only throughput differs (see
``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os

import numpy as np

PURE_NUMPY_ENV = "IMUTELEOP_PURE_NUMPY"


def _env_truthy(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


NUMBA_ENABLED = False
if not _env_truthy(PURE_NUMPY_ENV):
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def _jit(fn):
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# median filtering
# ---------------------------------------------------------------------------


def _window_median(buf):
    # exact order statistic of an odd-length window; arrival order irrelevant
    return np.sort(buf)[buf.shape[0] // 2]


def _sliding_median(x, half_width):
    # Centered (2n+1)-sample median realized causally as a delay-n filter:
    # once 2n+1 samples have arrived, y[k] is the median of x[k-2n .. k].
    # During warm-up the input passes through unchanged.
    n = half_width
    w = 2 * n + 1
    y = np.empty_like(x)
    for k in range(x.shape[0]):
        if k + 1 < w:
            y[k] = x[k]
        else:
            y[k] = np.sort(x[k - w + 1 : k + 1])[n]
    return y


# ---------------------------------------------------------------------------
# complementary filter (per-axis scan)
# ---------------------------------------------------------------------------


def _complementary_scan(theta0, omega, theta_acc, acc_ok, alpha, dts):
    # theta[k] = alpha*(theta[k-1] + omega[k]*dt[k]) + (1-alpha)*theta_acc[k],
    # falling back to pure gyro integration where acc_ok[k] is False.
    out = np.empty_like(omega)
    prev = theta0
    for k in range(omega.shape[0]):
        integrated = prev + omega[k] * dts[k]
        if acc_ok[k]:
            prev = alpha * integrated + (1.0 - alpha) * theta_acc[k]
        else:
            prev = integrated
        out[k] = prev
    return out


# ---------------------------------------------------------------------------
# Madgwick gradient-descent orientation update (gyro + accelerometer)
# ---------------------------------------------------------------------------


def _madgwick_step(q, gyro, accel, beta, dt, accel_min):
    w, x, y, z = q[0], q[1], q[2], q[3]
    gx, gy, gz = gyro[0], gyro[1], gyro[2]

    # quaternion rate from gyro: 0.5 * q (x) (0, gyro)
    dw = 0.5 * (-x * gx - y * gy - z * gz)
    dx = 0.5 * (w * gx + y * gz - z * gy)
    dy = 0.5 * (w * gy - x * gz + z * gx)
    dz = 0.5 * (w * gz + x * gy - y * gx)

    anorm = np.sqrt(accel[0] * accel[0] + accel[1] * accel[1] + accel[2] * accel[2])
    if anorm > accel_min:
        ax = accel[0] / anorm
        ay = accel[1] / anorm
        az = accel[2] / anorm
        # objective: gravity direction predicted by q minus measured direction
        f0 = 2.0 * (x * z - w * y) - ax
        f1 = 2.0 * (w * x + y * z) - ay
        f2 = 2.0 * (0.5 - x * x - y * y) - az
        # J^T f with the analytic Jacobian of the objective
        s0 = -2.0 * y * f0 + 2.0 * x * f1
        s1 = 2.0 * z * f0 + 2.0 * w * f1 - 4.0 * x * f2
        s2 = -2.0 * w * f0 + 2.0 * z * f1 - 4.0 * y * f2
        s3 = 2.0 * x * f0 + 2.0 * y * f1
        snorm = np.sqrt(s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3)
        if snorm > 0.0:
            dw -= beta * s0 / snorm
            dx -= beta * s1 / snorm
            dy -= beta * s2 / snorm
            dz -= beta * s3 / snorm

    w += dw * dt
    x += dx * dt
    y += dy * dt
    z += dz * dt
    qn = np.sqrt(w * w + x * x + y * y + z * z)
    out = np.empty(4)
    out[0] = w / qn
    out[1] = x / qn
    out[2] = y / qn
    out[3] = z / qn
    return out


def _make_madgwick_batch(step):
    def _madgwick_batch(q0, gyros, accels, beta, dts, accel_min):
        q = q0.copy()
        out = np.empty((gyros.shape[0], 4))
        for k in range(gyros.shape[0]):
            q = step(q, gyros[k], accels[k], beta, dts[k], accel_min)
            out[k, 0] = q[0]
            out[k, 1] = q[1]
            out[k, 2] = q[2]
            out[k, 3] = q[3]
        return out

    return _madgwick_batch


window_median = _jit(_window_median)
sliding_median = _jit(_sliding_median)
complementary_scan = _jit(_complementary_scan)
madgwick_step = _jit(_madgwick_step)
madgwick_batch = _jit(_make_madgwick_batch(madgwick_step))

# undecorated references, kept for the numba-vs-numpy benchmark and for
# equivalence tests between the two paths
PY_IMPLS = {
    "window_median": _window_median,
    "sliding_median": _sliding_median,
    "complementary_scan": _complementary_scan,
    "madgwick_step": _madgwick_step,
    "madgwick_batch": _make_madgwick_batch(_madgwick_step),
}
