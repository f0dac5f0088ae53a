"""Synthetic glove: turns scripted or interactively-steered hand poses into
the same packet stream the hardware would produce.

The synthesis inverts the estimation model: gyro rates are the finite
difference of the scripted orientation (exact quaternion log for the
wrist), accelerometer vectors are world gravity rotated into the scripted
body frame, both plus configurable Gaussian noise.  Scripts are JSON
keyframes in degrees, linearly interpolated:

    {"frames":[{"t":0.0,"wrist_deg":[0,0,0],"fingers_deg":[0,0]}, ...]}
"""

from __future__ import annotations

import json
import math
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .protocol import (
    EMULATOR_CTL_PORT,
    GLOVE_PORT,
    GlovePacket,
    ImuReading,
    SessionHeader,
    serialize_header,
    serialize_packet,
)
from .rotations import euler_to_quat, quat_conj, quat_mul, quat_rotate

GRAVITY = 9.81


class ScriptParseError(ValueError):
    pass


@dataclass(frozen=True)
class PoseKeyframe:
    t: float                 # seconds from script start
    wrist: np.ndarray        # roll, pitch, yaw radians
    fingers: np.ndarray      # per-finger pitch radians


class PoseScript:
    """Piecewise-linear pose trajectory from timed keyframes."""

    def __init__(self, frames: Sequence[PoseKeyframe]):
        if not frames:
            raise ScriptParseError("script has no frames")
        times = [f.t for f in frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScriptParseError("keyframe times must strictly increase")
        counts = {len(f.fingers) for f in frames}
        if len(counts) != 1:
            raise ScriptParseError("finger count must be constant")
        self.frames = list(frames)
        self.finger_count = counts.pop()
        self.duration = times[-1]

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PoseScript":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ScriptParseError(f"cannot read script: {e}") from e
        return cls.from_obj(data)

    @classmethod
    def from_obj(cls, data) -> "PoseScript":
        if not isinstance(data, dict) or "frames" not in data:
            raise ScriptParseError("script must be an object with a frames array")
        frames = []
        for i, fr in enumerate(data["frames"]):
            try:
                frames.append(
                    PoseKeyframe(
                        t=float(fr["t"]),
                        wrist=np.radians(np.asarray(fr["wrist_deg"], dtype=float)),
                        fingers=np.radians(np.asarray(fr["fingers_deg"], dtype=float)),
                    )
                )
                if frames[-1].wrist.shape != (3,):
                    raise ValueError("wrist_deg must have 3 entries")
            except (KeyError, TypeError, ValueError) as e:
                raise ScriptParseError(f"bad frame {i}: {e}") from e
        return cls(frames)

    def sample(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """(wrist_rpy, finger_pitches) at time t, clamped to the ends."""
        frames = self.frames
        if t <= frames[0].t:
            return frames[0].wrist.copy(), frames[0].fingers.copy()
        if t >= frames[-1].t:
            return frames[-1].wrist.copy(), frames[-1].fingers.copy()
        hi = 1
        while frames[hi].t < t:
            hi += 1
        lo = hi - 1
        u = (t - frames[lo].t) / (frames[hi].t - frames[lo].t)
        wrist = frames[lo].wrist + u * (frames[hi].wrist - frames[lo].wrist)
        fingers = frames[lo].fingers + u * (frames[hi].fingers - frames[lo].fingers)
        return wrist, fingers


def _body_gravity(q: np.ndarray) -> np.ndarray:
    # accelerometer at rest reads +g along world z, expressed in body axes
    return quat_rotate(quat_conj(q), np.array([0.0, 0.0, GRAVITY]))


def _wrist_gyro(q_prev: np.ndarray, q_next: np.ndarray, dt: float) -> np.ndarray:
    """Body angular rate taking q_prev to q_next in dt (quaternion log)."""
    dq = quat_mul(quat_conj(q_prev), q_next)
    vec = dq[1:]
    norm = float(np.linalg.norm(vec))
    if norm < 1e-15:
        return np.zeros(3)
    angle = 2.0 * math.atan2(norm, float(dq[0]))
    if angle > math.pi:
        angle -= 2.0 * math.pi
    return vec * (angle / norm / dt)


class GloveSynthesizer:
    """Pose trajectory -> glove packets at a fixed sample rate."""

    def __init__(
        self,
        finger_count: int,
        rate_hz: float = 100.0,
        gyro_noise: float = 0.0,
        accel_noise: float = 0.0,
        seed: int = 0,
    ):
        self.finger_count = finger_count
        self.rate_hz = rate_hz
        self.dt = 1.0 / rate_hz
        self.gyro_noise = gyro_noise
        self.accel_noise = accel_noise
        self.rng = np.random.default_rng(seed)
        self.seq = 0
        self._prev_wrist_q: Optional[np.ndarray] = None
        self._prev_fingers: Optional[np.ndarray] = None

    def header(self) -> SessionHeader:
        return SessionHeader(fingers=self.finger_count, rate_hz=self.rate_hz)

    def _noise(self, sigma: float) -> np.ndarray:
        if sigma <= 0.0:
            return np.zeros(3)
        return self.rng.normal(0.0, sigma, 3)

    def packet(self, wrist_rpy: np.ndarray, fingers: np.ndarray) -> GlovePacket:
        """Next packet for the pose at the current sample instant."""
        q = euler_to_quat(*wrist_rpy)
        if self._prev_wrist_q is None:
            wrist_gyro = np.zeros(3)
            finger_rates = np.zeros(self.finger_count)
        else:
            wrist_gyro = _wrist_gyro(self._prev_wrist_q, q, self.dt)
            finger_rates = (fingers - self._prev_fingers) / self.dt
        self._prev_wrist_q = q
        self._prev_fingers = np.asarray(fingers, dtype=float).copy()

        palm = ImuReading(
            gyro=tuple(wrist_gyro + self._noise(self.gyro_noise)),
            accel=tuple(_body_gravity(q) + self._noise(self.accel_noise)),
        )
        readings = []
        for i in range(self.finger_count):
            p = float(fingers[i])
            # finger frame: pure pitch rotation about body y
            accel = np.array([-GRAVITY * math.sin(p), 0.0, GRAVITY * math.cos(p)])
            readings.append(
                ImuReading(
                    gyro=tuple(np.array([0.0, finger_rates[i], 0.0]) + self._noise(self.gyro_noise)),
                    accel=tuple(accel + self._noise(self.accel_noise)),
                )
            )
        t_device = round(self.seq * 1e6 / self.rate_hz)
        pkt = GlovePacket(
            seq=self.seq, t_device=t_device, palm=palm, fingers=tuple(readings)
        )
        self.seq += 1
        return pkt


class EmulatorLoop:
    """Streams a script (or interactively steered pose) over UDP in real time.

    Interactive mode listens on ``ctl_port`` for console-forwarded pose
    targets ``{"emu":{"wrist":[r,p,y],"fingers":[...]}}`` (radians) and
    slews toward them so synthesized gyro rates stay physical.
    """

    SLEW_RATE = math.radians(180.0)  # rad/s toward the interactive target

    def __init__(
        self,
        script: Optional[PoseScript],
        finger_count: int = 2,
        rate_hz: float = 100.0,
        glove_addr: Tuple[str, int] = ("127.0.0.1", GLOVE_PORT),
        ctl_port: int = EMULATOR_CTL_PORT,
        gyro_noise: float = 0.0,
        accel_noise: float = 0.0,
        seed: int = 0,
        hold_end_s: float = 1.0,
    ):
        if script is not None:
            finger_count = script.finger_count
        self.script = script
        self.synth = GloveSynthesizer(
            finger_count, rate_hz, gyro_noise=gyro_noise, accel_noise=accel_noise, seed=seed
        )
        self.glove_addr = glove_addr
        self.ctl_port = ctl_port
        self.hold_end_s = hold_end_s
        self.packets_sent = 0
        self._target_wrist = np.zeros(3)
        self._target_fingers = np.zeros(finger_count)
        self._pose_wrist = np.zeros(3)
        self._pose_fingers = np.zeros(finger_count)
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._ctl_sock: Optional[socket.socket] = None
        self.started_at: Optional[float] = None  # monotonic clock at first packet

    def set_target(self, wrist_rpy, fingers) -> None:
        self._target_wrist = np.asarray(wrist_rpy, dtype=float)
        self._target_fingers = np.asarray(fingers, dtype=float)

    def start(self) -> None:
        self._stop.clear()
        if self.script is None:
            self._ctl_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._ctl_sock.bind(("127.0.0.1", self.ctl_port))
            self._ctl_sock.settimeout(0.2)
            threading.Thread(target=self._ctl_loop, name="emu-ctl", daemon=True).start()
        self._thread = threading.Thread(target=self._run, name="emu-tx", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        if self._ctl_sock is not None:
            self._ctl_sock.close()

    def join(self, timeout: Optional[float] = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def _ctl_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, _ = self._ctl_sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                obj = json.loads(data.decode("utf-8"))
                emu = obj["emu"]
                wrist = [float(v) for v in emu["wrist"]]
                fingers = [float(v) for v in emu["fingers"]]
                if len(wrist) != 3 or len(fingers) != self.synth.finger_count:
                    continue
            except (ValueError, KeyError, TypeError, UnicodeDecodeError):
                continue
            self.set_target(wrist, fingers)

    def _slew_pose(self, dt: float) -> None:
        step = self.SLEW_RATE * dt
        for arr, tgt in (
            (self._pose_wrist, self._target_wrist),
            (self._pose_fingers, self._target_fingers),
        ):
            delta = np.clip(tgt - arr, -step, step)
            arr += delta

    def _run(self) -> None:
        tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            tx.sendto(serialize_header(self.synth.header()), self.glove_addr)
            dt = self.synth.dt
            k = 0
            start = time.monotonic()
            self.started_at = start
            while not self._stop.is_set():
                t = k * dt
                if self.script is not None:
                    if t > self.script.duration + self.hold_end_s:
                        break
                    wrist, fingers = self.script.sample(t)
                else:
                    self._slew_pose(dt)
                    wrist, fingers = self._pose_wrist, self._pose_fingers
                pkt = self.synth.packet(wrist, fingers)
                tx.sendto(serialize_packet(pkt), self.glove_addr)
                self.packets_sent += 1
                k += 1
                delay = start + k * dt - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
        finally:
            tx.close()
