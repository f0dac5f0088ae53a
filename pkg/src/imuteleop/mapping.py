"""Wrist attitude and gesture events to UAV control commands.

Hand pitch (tips down = negative) drives forward velocity, roll drives
lateral velocity, yaw drives yaw rate; each axis through the same
deadzone + linear-to-full-scale shaping.  Altitude is a stepped absolute
target, the gripper a discrete setpoint.  Command wire format:

    {"cmd":{"vf":0.0,"vl":0.0,"alt":1.0,"yr":0.0,"grip":"open"},"t":0}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Tuple

from .gestures import GestureEvent, GestureKind
from .protocol import SchemaViolation, _load_json, _require_number, _require_uint, dumps_canonical

V_MAX = 1.0                      # m/s
OMEGA_MAX = 0.8                  # rad/s
DEADZONE = math.radians(5.0)
FULL_SCALE = math.radians(30.0)
ACCEL_LIMIT = 2.0                # m/s^2 slew on velocity channels
YAW_ACCEL_LIMIT = 4.0            # rad/s^2 slew on yaw rate
ALTITUDE_STEP = 0.25             # m per altitude gesture


class GripSetpoint(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class ControlCommand:
    v_forward: float = 0.0       # m/s, +forward
    v_lateral: float = 0.0       # m/s, +right
    altitude_target: float = 0.0  # m, absolute
    yaw_rate: float = 0.0        # rad/s, +counterclockwise
    gripper: GripSetpoint = GripSetpoint.OPEN
    t_device: int = 0            # microseconds

    def hover(self) -> "ControlCommand":
        """Zero the motion channels, keep altitude and gripper."""
        return replace(self, v_forward=0.0, v_lateral=0.0, yaw_rate=0.0)


def _shape(theta: float, scale: float, deadzone: float, full_scale: float) -> float:
    mag = (abs(theta) - deadzone) / (full_scale - deadzone)
    if mag <= 0.0:
        return 0.0
    return scale * min(mag, 1.0) * math.copysign(1.0, theta)


def map_attitude(
    wrist: Sequence[float],
    v_max: float = V_MAX,
    omega_max: float = OMEGA_MAX,
    deadzone: float = DEADZONE,
    full_scale: float = FULL_SCALE,
) -> Tuple[float, float, float]:
    """(v_forward, v_lateral, yaw_rate) from relative wrist Euler angles."""
    roll, pitch, yaw = (float(a) for a in wrist)
    v_forward = _shape(-pitch, v_max, deadzone, full_scale)
    v_lateral = _shape(roll, v_max, deadzone, full_scale)
    yaw_rate = _shape(yaw, omega_max, deadzone, full_scale)
    return v_forward, v_lateral, yaw_rate


def apply_events(
    cmd: ControlCommand,
    events: Sequence[GestureEvent],
    altitude_step: float = ALTITUDE_STEP,
) -> ControlCommand:
    """Fold discrete gesture events into the command."""
    if altitude_step <= 0.0:
        raise ValueError("altitude_step must be > 0")
    grip = cmd.gripper
    alt = cmd.altitude_target
    for ev in events:
        if ev.kind is GestureKind.GRIP_CLOSE:
            grip = GripSetpoint.CLOSED
        elif ev.kind is GestureKind.GRIP_OPEN:
            grip = GripSetpoint.OPEN
        elif ev.kind is GestureKind.ALT_STEP_UP:
            alt += altitude_step
        elif ev.kind is GestureKind.ALT_STEP_DOWN:
            alt = max(0.0, alt - altitude_step)
    return replace(cmd, gripper=grip, altitude_target=alt)


class RateLimiter:
    """Slew limiter on the continuous channels; discrete fields pass through.

    When the remaining gap is within one slew step (plus a float-noise
    margin) the output snaps to the setpoint, so a step input completes in
    exactly ceil(target / (limit*dt)) ticks.
    """

    def __init__(self, accel_limit: float = ACCEL_LIMIT, yaw_accel_limit: float = YAW_ACCEL_LIMIT):
        self.accel_limit = accel_limit
        self.yaw_accel_limit = yaw_accel_limit
        self.v_forward = 0.0
        self.v_lateral = 0.0
        self.yaw_rate = 0.0

    @staticmethod
    def _slew(prev: float, target: float, max_step: float) -> float:
        delta = target - prev
        if abs(delta) <= max_step * (1.0 + 1e-9):
            return target
        return prev + math.copysign(max_step, delta)

    def limit(self, cmd: ControlCommand, dt: float) -> ControlCommand:
        if dt <= 0.0:
            raise ValueError("dt must be > 0")
        self.v_forward = self._slew(self.v_forward, cmd.v_forward, self.accel_limit * dt)
        self.v_lateral = self._slew(self.v_lateral, cmd.v_lateral, self.accel_limit * dt)
        self.yaw_rate = self._slew(self.yaw_rate, cmd.yaw_rate, self.yaw_accel_limit * dt)
        return replace(
            cmd, v_forward=self.v_forward, v_lateral=self.v_lateral, yaw_rate=self.yaw_rate
        )


def command_obj(cmd: ControlCommand) -> dict:
    return {
        "cmd": {
            "vf": cmd.v_forward,
            "vl": cmd.v_lateral,
            "alt": cmd.altitude_target,
            "yr": cmd.yaw_rate,
            "grip": cmd.gripper.value,
        },
        "t": cmd.t_device,
    }


def serialize_command(cmd: ControlCommand) -> bytes:
    return dumps_canonical(command_obj(cmd)).encode("utf-8")


def parse_command(datagram: bytes) -> ControlCommand:
    obj = _load_json(datagram)
    if set(obj.keys()) != {"cmd", "t"}:
        raise SchemaViolation("command must have exactly keys cmd, t")
    body = obj["cmd"]
    if not isinstance(body, dict) or set(body.keys()) != {"vf", "vl", "alt", "yr", "grip"}:
        raise SchemaViolation("cmd body must have keys vf, vl, alt, yr, grip")
    try:
        grip = GripSetpoint(body["grip"])
    except ValueError as e:
        raise SchemaViolation("grip must be open or closed") from e
    return ControlCommand(
        v_forward=_require_number(body["vf"], "vf"),
        v_lateral=_require_number(body["vl"], "vl"),
        altitude_target=_require_number(body["alt"], "alt"),
        yaw_rate=_require_number(body["yr"], "yr"),
        gripper=grip,
        t_device=_require_uint(obj["t"], "t", 2**64),
    )
