"""Kinematic UAV plant with a gripper.

First-order velocity tracking in the heading frame, a first-order position
loop on the stepped altitude target, direct yaw-rate integration and a
timed open/close gripper.  Deliberately not a rigid-body model: the
artifact exercises the command loop, and low-level stabilization is the
autopilot's job on a real platform.  Telemetry wire format:

    {"tel":{"p":[x,y,z],"v":[vx,vy,vz],"yaw":0.0,"grip":"open","speed":0.0},"seq":0,"t":0.0}
"""

from __future__ import annotations

import math
import socket
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .channels import LatestSlot
from .mapping import ControlCommand, GripSetpoint, OMEGA_MAX, V_MAX, parse_command
from .protocol import (
    COMMAND_PORT,
    ParseError,
    SchemaViolation,
    TELEMETRY_PORT,
    _load_json,
    _require_number,
    dumps_canonical,
)
from .rotations import wrap_angle

TAU_XY = 0.3            # s, horizontal velocity tracking
TAU_Z = 1.0             # s, altitude position loop
VZ_MAX = 0.5            # m/s vertical speed clamp
SIM_DT = 0.01           # s, fixed integrator step
TELEMETRY_HZ = 50.0
GRIPPER_TRAVEL_S = 0.5
GRASP_RADIUS = 0.3      # m


class InvalidDt(ValueError):
    pass


class GripPhase:
    OPEN = "open"
    CLOSED = "closed"
    MOVING = "moving"


@dataclass(frozen=True)
class UavState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    gripper_pos: float = 0.0     # 0 = open, 1 = closed
    gripper_target: float = 0.0
    t_sim: float = 0.0

    @property
    def grip_phase(self) -> str:
        if self.gripper_pos <= 0.0:
            return GripPhase.OPEN
        if self.gripper_pos >= 1.0:
            return GripPhase.CLOSED
        return GripPhase.MOVING

    @property
    def grip_progress(self) -> float:
        """Progress toward the current target, 0..1."""
        if self.gripper_target >= 1.0:
            return self.gripper_pos
        return 1.0 - self.gripper_pos


@dataclass(frozen=True)
class TelemetryPacket:
    position: Tuple[float, float, float]
    velocity: Tuple[float, float, float]
    yaw: float
    grip: str
    speed: float
    seq: int
    t_sim: float


def sim_step(
    state: UavState,
    cmd: ControlCommand,
    dt: float,
    tau_xy: float = TAU_XY,
    tau_z: float = TAU_Z,
    vz_max: float = VZ_MAX,
    gripper_travel_s: float = GRIPPER_TRAVEL_S,
) -> UavState:
    """Advance the plant one step (explicit Euler, dt in (0, 0.1])."""
    if not 0.0 < dt <= 0.1:
        raise InvalidDt(f"dt={dt}")

    # command velocities are in the heading frame: rotate into world
    cy, sy = math.cos(state.yaw), math.sin(state.yaw)
    vcx = cmd.v_forward * cy + cmd.v_lateral * sy
    vcy = cmd.v_forward * sy - cmd.v_lateral * cy

    vx = state.velocity[0] + (vcx - state.velocity[0]) * dt / tau_xy
    vy = state.velocity[1] + (vcy - state.velocity[1]) * dt / tau_xy
    vz = max(-vz_max, min(vz_max, (cmd.altitude_target - state.position[2]) / tau_z))

    x = state.position[0] + vx * dt
    y = state.position[1] + vy * dt
    z = state.position[2] + vz * dt
    if z < 0.0:  # ground plane
        z = 0.0
        vz = 0.0

    yaw = wrap_angle(state.yaw + cmd.yaw_rate * dt)

    target = 1.0 if cmd.gripper is GripSetpoint.CLOSED else 0.0
    pos = state.gripper_pos
    if pos != target:
        step = dt / gripper_travel_s
        if abs(target - pos) <= step * (1.0 + 1e-9):
            pos = target
        else:
            pos += math.copysign(step, target - pos)

    return UavState(
        position=np.array([x, y, z]),
        velocity=np.array([vx, vy, vz]),
        yaw=yaw,
        gripper_pos=pos,
        gripper_target=target,
        t_sim=state.t_sim + dt,
    )


def emit_telemetry(state: UavState, seq: int) -> TelemetryPacket:
    v = state.velocity
    return TelemetryPacket(
        position=(float(state.position[0]), float(state.position[1]), float(state.position[2])),
        velocity=(float(v[0]), float(v[1]), float(v[2])),
        yaw=state.yaw,
        grip=state.grip_phase,
        speed=float(np.linalg.norm(v)),
        seq=seq,
        t_sim=state.t_sim,
    )


def telemetry_obj(tel: TelemetryPacket) -> dict:
    return {
        "tel": {
            "p": list(tel.position),
            "v": list(tel.velocity),
            "yaw": tel.yaw,
            "grip": tel.grip,
            "speed": tel.speed,
        },
        "seq": tel.seq,
        "t": tel.t_sim,
    }


def serialize_telemetry(tel: TelemetryPacket) -> bytes:
    return dumps_canonical(telemetry_obj(tel)).encode("utf-8")


def parse_telemetry(datagram: bytes) -> TelemetryPacket:
    obj = _load_json(datagram)
    if set(obj.keys()) != {"tel", "seq", "t"}:
        raise SchemaViolation("telemetry must have exactly keys tel, seq, t")
    body = obj["tel"]
    if not isinstance(body, dict) or set(body.keys()) != {"p", "v", "yaw", "grip", "speed"}:
        raise SchemaViolation("tel body must have keys p, v, yaw, grip, speed")
    for key in ("p", "v"):
        if not isinstance(body[key], list) or len(body[key]) != 3:
            raise SchemaViolation(f"tel.{key} must be a 3-element array")
    if body["grip"] not in (GripPhase.OPEN, GripPhase.CLOSED, GripPhase.MOVING):
        raise SchemaViolation("tel.grip must be open, closed or moving")
    seq = obj["seq"]
    if isinstance(seq, bool) or not isinstance(seq, int) or seq < 0:
        raise SchemaViolation("seq must be a non-negative integer")
    return TelemetryPacket(
        position=tuple(_require_number(v, "p") for v in body["p"]),
        velocity=tuple(_require_number(v, "v") for v in body["v"]),
        yaw=_require_number(body["yaw"], "yaw"),
        grip=body["grip"],
        speed=_require_number(body["speed"], "speed"),
        seq=seq,
        t_sim=_require_number(obj["t"], "t"),
    )


@dataclass(frozen=True)
class GraspZone:
    center: Tuple[float, float, float]
    radius: float = GRASP_RADIUS

    def contains(self, position) -> bool:
        d = np.asarray(self.center, dtype=float) - np.asarray(position, dtype=float)
        return float(np.linalg.norm(d)) <= self.radius


class Simulator:
    """Fixed-rate sim loop with UDP command intake and telemetry fanout.

    Commands land in a single-slot mailbox (latest wins, zero-order hold);
    telemetry goes to UDP subscribers and in-process callbacks at
    ``telemetry_hz`` regardless of the command rate.
    """

    def __init__(
        self,
        spawn=(0.0, 0.0, 0.0),
        spawn_altitude_target: Optional[float] = None,
        grasp_zone: Optional[GraspZone] = None,
        command_port: int = COMMAND_PORT,
        telemetry_port: int = TELEMETRY_PORT,
        telemetry_addr: str = "127.0.0.1",
        dt: float = SIM_DT,
        telemetry_hz: float = TELEMETRY_HZ,
        v_max: float = V_MAX,
        omega_max: float = OMEGA_MAX,
    ):
        spawn = np.asarray(spawn, dtype=float)
        self.state = UavState(position=spawn.copy())
        alt0 = float(spawn[2]) if spawn_altitude_target is None else spawn_altitude_target
        self._hold = ControlCommand(altitude_target=alt0)
        self.mailbox: LatestSlot = LatestSlot()
        self.grasp_zone = grasp_zone
        self.grasped = False
        self.dt = dt
        self.telemetry_every = max(1, round(1.0 / (telemetry_hz * dt)))
        self.v_max = v_max
        self.omega_max = omega_max
        self.command_port = command_port
        self.telemetry_dest = (telemetry_addr, telemetry_port)
        self.telemetry_seq = 0
        self.callbacks: List[Callable[[TelemetryPacket], None]] = []
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []
        self._rx: Optional[socket.socket] = None
        self._tx: Optional[socket.socket] = None
        self._step_count = 0
        self._lock = threading.Lock()

    def _clamp(self, cmd: ControlCommand) -> ControlCommand:
        lim = self.v_max
        return replace(
            cmd,
            v_forward=max(-lim, min(lim, cmd.v_forward)),
            v_lateral=max(-lim, min(lim, cmd.v_lateral)),
            yaw_rate=max(-self.omega_max, min(self.omega_max, cmd.yaw_rate)),
            altitude_target=max(0.0, cmd.altitude_target),
        )

    def offer_command(self, cmd: ControlCommand) -> None:
        self.mailbox.store(self._clamp(cmd))

    def step(self) -> List[TelemetryPacket]:
        """One integrator step; returns telemetry due this step (0 or 1)."""
        with self._lock:
            latest = self.mailbox.latest()
            if latest is not None:
                self._hold = latest
            closing = self._hold.gripper is GripSetpoint.CLOSED and self.state.gripper_pos < 1.0
            self.state = sim_step(self.state, self._hold, self.dt)
            if (
                closing
                and self.state.gripper_pos >= 1.0
                and self.grasp_zone is not None
                and self.grasp_zone.contains(self.state.position)
            ):
                self.grasped = True
            self._step_count += 1
            out: List[TelemetryPacket] = []
            if self._step_count % self.telemetry_every == 0:
                tel = emit_telemetry(self.state, self.telemetry_seq)
                self.telemetry_seq += 1
                out.append(tel)
            return out

    # -- threaded operation over UDP ------------------------------------

    def start(self) -> None:
        self._rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._rx.bind(("127.0.0.1", self.command_port))
        self._rx.settimeout(0.2)
        self._tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._stop.clear()
        self._threads = [
            threading.Thread(target=self._command_loop, name="sim-cmd", daemon=True),
            threading.Thread(target=self._sim_loop, name="sim-step", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        if self._rx is not None:
            self._rx.close()
        if self._tx is not None:
            self._tx.close()

    def _command_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, _ = self._rx.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                cmd = parse_command(data)
            except ParseError:
                continue
            self.offer_command(cmd)

    def _sim_loop(self) -> None:
        next_t = time.monotonic()
        while not self._stop.is_set():
            for tel in self.step():
                payload = serialize_telemetry(tel)
                try:
                    self._tx.sendto(payload, self.telemetry_dest)
                except OSError:
                    pass
                for cb in self.callbacks:
                    cb(tel)
            next_t += self.dt
            delay = next_t - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_t = time.monotonic()  # fell behind; don't burst-catch-up
