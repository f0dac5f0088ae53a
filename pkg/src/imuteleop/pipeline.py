"""The processing pipeline: glove packets in, control commands and events out.

``PipelineCore`` is the deterministic heart: a pure state machine advanced
one accepted packet at a time, with no clocks or sockets, so a recorded
session replayed through it reproduces the live command and event streams
byte for byte.  ``PipelineApp`` wraps the core with the live transport:
UDP ingestion, command output, telemetry-driven haptics, the console
WebSocket bridge, session logging and the stream-loss watchdog.
``ReplayRunner`` drives the same core from a recorded session.
"""

from __future__ import annotations

import json
import math
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import numpy as np

from .config import Config
from .fusion import (
    ComplementaryFilter,
    MadgwickFilter,
    MedianWindow,
    MotionDuringCalibration,
    ZeroOffset,
    zero_offset_calibrate,
)
from .gestures import GestureEngine, GestureEvent, classify_finger
from .haptics import HapticEvent, SpeedMonitor, serialize_haptic
from .mapping import (
    ControlCommand,
    GripSetpoint,
    RateLimiter,
    apply_events,
    command_obj,
    map_attitude,
    serialize_command,
)
from .protocol import (
    Disposition,
    FingerCountMismatch,
    GlovePacket,
    Ingestor,
    ParseError,
    SessionHeader,
    dumps_canonical,
    header_from_obj,
    packet_from_obj,
    parse_message,
    serialize_header,
)
from .reference import (
    LockState,
    ReferencePose,
    finger_lock_update,
    relative_orientation,
    reset_pose,
    zero_back_update,
)
from .sessionlog import (
    STREAM_COMMAND,
    STREAM_EVENT,
    STREAM_GLOVE,
    STREAM_TELEMETRY,
    STREAM_WATCHDOG,
    SessionReader,
    SessionWriter,
)
from .sim import parse_telemetry, telemetry_obj
from .wsbridge import ConsoleBridge


@dataclass
class FeedResult:
    command: ControlCommand
    command_bytes: bytes
    events: List[GestureEvent] = field(default_factory=list)
    reset_applied: bool = False
    armed_change: Optional[bool] = None
    calibrating: bool = False
    calibration_restarted: bool = False


class PipelineCore:
    """Deterministic per-packet processing: filters, pose, gestures, mapper.

    The first ``calib_samples`` packets are treated as a stationary capture
    for gyro bias estimation (hover commands are emitted meanwhile).  If
    motion spoils the capture, collection restarts.  Orientation filters
    run from the packet after calibration completes; attitude commands flow
    once a pose reset has established the zero reference.
    """

    def __init__(self, cfg: Config, finger_count: Optional[int] = None):
        self.cfg = cfg
        self.finger_count = finger_count if finger_count is not None else cfg.wire.fingers
        n = cfg.filters.median_half_width
        self.palm_medians = [MedianWindow(n) for _ in range(6)]
        self.finger_medians = [[MedianWindow(n) for _ in range(6)] for _ in range(self.finger_count)]
        self.wrist = MadgwickFilter(beta=cfg.filters.beta)
        self.fingers = [ComplementaryFilter(alpha=cfg.filters.alpha) for _ in range(self.finger_count)]
        self.engine = GestureEngine(
            self.finger_count,
            flick_max_s=cfg.gestures.flick_max_s,
            alt_down_roll=math.radians(cfg.gestures.alt_down_roll_deg),
        )
        self.limiter = RateLimiter(cfg.mapping.accel_limit, cfg.mapping.yaw_accel_limit)
        self.lock = LockState()
        self.reference: Optional[ReferencePose] = None
        self.armed = cfg.pipeline.armed_on_start
        self.altitude_target = cfg.mapping.initial_altitude
        self.grip = GripSetpoint.OPEN
        self.wrist_relative = np.zeros(3)
        self.finger_pitches = np.zeros(self.finger_count)

        self._calib: List[np.ndarray] = []  # palm + per-finger gyro rows per packet
        self.bias_palm: Optional[ZeroOffset] = None
        self.bias_fingers: List[Optional[ZeroOffset]] = [None] * self.finger_count
        self._pending_reset = False
        self._pending_armed: Optional[bool] = None
        self._t0_us: Optional[int] = None
        self._prev_t_us: Optional[int] = None
        self._nominal_dt = 1.0 / cfg.wire.rate_hz

    # -- operator intents (applied at the next sample boundary) ----------

    def request_reset(self) -> None:
        self._pending_reset = True

    def request_armed(self, armed: bool) -> None:
        self._pending_armed = armed

    @property
    def calibrated(self) -> bool:
        return self.bias_palm is not None

    @property
    def warm(self) -> bool:
        warmup = self.cfg.reference.warmup_s
        return (
            self.calibrated
            and self.wrist.seconds_seen >= warmup
            and all(f.seconds_seen >= warmup for f in self.fingers)
        )

    # -- internals --------------------------------------------------------

    def _median_reading(self, medians, gyro, accel) -> Tuple[np.ndarray, np.ndarray]:
        g = np.array([medians[i].push(gyro[i]) for i in range(3)])
        a = np.array([medians[i + 3].push(accel[i]) for i in range(3)])
        return g, a

    def _calibration_step(self, rows: np.ndarray, result: FeedResult) -> None:
        self._calib.append(rows)
        if len(self._calib) < self.cfg.filters.calib_samples:
            return
        stacked = np.stack(self._calib)  # (N, 1+F, 3)
        try:
            self.bias_palm = zero_offset_calibrate(
                stacked[:, 0, :],
                min_samples=self.cfg.filters.calib_samples,
                motion_tolerance=self.cfg.filters.calib_motion_tol,
            )
            self.bias_fingers = [
                zero_offset_calibrate(
                    stacked[:, 1 + i, :],
                    min_samples=self.cfg.filters.calib_samples,
                    motion_tolerance=self.cfg.filters.calib_motion_tol,
                )
                for i in range(self.finger_count)
            ]
        except MotionDuringCalibration:
            self._calib.clear()
            result.calibration_restarted = True

    def _hover_command(self, t_us: int) -> ControlCommand:
        return ControlCommand(
            altitude_target=self.altitude_target,
            gripper=self.grip,
            t_device=t_us,
        )

    def feed(self, p: GlovePacket) -> FeedResult:
        """Advance the pipeline by one accepted packet."""
        cfg = self.cfg
        if self._t0_us is None:
            self._t0_us = p.t_device
        dt = (
            (p.t_device - self._prev_t_us) * 1e-6
            if self._prev_t_us is not None
            else self._nominal_dt
        )
        self._prev_t_us = p.t_device

        result = FeedResult(command=self._hover_command(p.t_device), command_bytes=b"")

        if self._pending_armed is not None:
            self.armed = self._pending_armed
            result.armed_change = self.armed
            self._pending_armed = None

        palm_g, palm_a = self._median_reading(self.palm_medians, p.palm.gyro, p.palm.accel)
        finger_ga = [
            self._median_reading(self.finger_medians[i], p.fingers[i].gyro, p.fingers[i].accel)
            for i in range(self.finger_count)
        ]

        if not self.calibrated:
            rows = np.stack([palm_g] + [g for g, _ in finger_ga])
            self._calibration_step(rows, result)
            result.calibrating = not self.calibrated
            result.command_bytes = serialize_command(result.command)
            return result

        palm_g = self.bias_palm.apply(palm_g)
        self.wrist.update(palm_g, palm_a, dt)
        for i, (g, a) in enumerate(finger_ga):
            self.fingers[i].update(self.bias_fingers[i].apply(g), a, dt)
        self.finger_pitches = np.array([f.pitch for f in self.fingers])

        auto_s = cfg.pipeline.auto_reset_after_s
        want_reset = self._pending_reset or (
            auto_s > 0.0
            and self.reference is None
            and (p.t_device - self._t0_us) * 1e-6 >= auto_s
        )
        if want_reset and self.warm:
            self.reference = reset_pose(self.wrist.q, self.finger_pitches, warm=True)
            self._pending_reset = False
            result.reset_applied = True

        events: List[GestureEvent] = []
        if self.reference is not None:
            self.wrist_relative = relative_orientation(self.reference, self.wrist.q)
            gyro_mag = float(np.linalg.norm(palm_g))
            self.reference = zero_back_update(
                self.reference,
                self.wrist.q,
                gyro_mag,
                dt,
                band=math.radians(cfg.reference.zero_back_band_deg),
                rate=cfg.reference.zero_back_rate,
                stillness=cfg.reference.stillness_gyro,
            )
            self.lock = finger_lock_update(
                self.lock,
                self.wrist_relative,
                dt,
                deadzone=math.radians(cfg.mapping.deadzone_deg),
                release_s=cfg.reference.lock_release_s,
            )
            rel_pitches = self.finger_pitches - self.reference.finger_ref
            labels = [
                classify_finger(
                    float(rel_pitches[i]),
                    self.engine.labels[i],
                    close_threshold=math.radians(cfg.gestures.close_deg),
                    open_threshold=math.radians(cfg.gestures.open_deg),
                )
                for i in range(self.finger_count)
            ]
            events = self.engine.step(
                p.t_device, labels, self.lock.locked, wrist_roll=float(self.wrist_relative[0])
            )

            vf, vl, yr = map_attitude(
                self.wrist_relative,
                v_max=cfg.mapping.v_max,
                omega_max=cfg.mapping.omega_max,
                deadzone=math.radians(cfg.mapping.deadzone_deg),
                full_scale=math.radians(cfg.mapping.full_scale_deg),
            )
        else:
            vf = vl = yr = 0.0

        cmd = ControlCommand(
            v_forward=vf,
            v_lateral=vl,
            altitude_target=self.altitude_target,
            yaw_rate=yr,
            gripper=self.grip,
            t_device=p.t_device,
        )
        if self.armed:
            cmd = apply_events(cmd, events, altitude_step=cfg.mapping.altitude_step)
            self.altitude_target = cmd.altitude_target
            self.grip = cmd.gripper
            cmd = self.limiter.limit(cmd, dt)
        else:
            cmd = cmd.hover()
            self.limiter.v_forward = self.limiter.v_lateral = self.limiter.yaw_rate = 0.0

        result.command = cmd
        result.command_bytes = serialize_command(cmd)
        result.events = events
        return result

    def state_obj(self, ingest_report=None) -> dict:
        """Console state snapshot (radians; the UI converts for display)."""
        obj = {
            "state": {
                "wrist": [float(v) for v in self.wrist_relative],
                "fingers": [l.value for l in self.engine.labels],
                "finger_pitch": [
                    float(self.finger_pitches[i] - self.reference.finger_ref[i])
                    if self.reference is not None
                    else 0.0
                    for i in range(self.finger_count)
                ],
                "locked": self.lock.locked,
                "armed": self.armed,
                "calibrated": self.calibrated,
                "reference_set": self.reference is not None,
                "altitude_target": self.altitude_target,
                "grip": self.grip.value,
            }
        }
        if ingest_report is not None:
            obj["state"]["ingest"] = {
                "received": ingest_report.received,
                "dropped": ingest_report.dropped,
                "reordered": ingest_report.reordered,
                "malformed": ingest_report.malformed,
            }
        return obj


class PipelineApp:
    """Live pipeline over UDP with console bridge, logging and watchdog."""

    def __init__(self, cfg: Config, session_path: Optional[str] = None,
                 static_dir: Optional[str] = None):
        self.cfg = cfg
        self.core: Optional[PipelineCore] = None
        self.ingestor: Optional[Ingestor] = None
        self.monitor = SpeedMonitor(
            thresholds=(cfg.haptics.threshold_1, cfg.haptics.threshold_2),
            hysteresis=cfg.haptics.hysteresis,
        )
        self.writer = SessionWriter(session_path) if session_path else None
        self.bridge = ConsoleBridge(
            host=cfg.wire.host,
            port=cfg.wire.http_port,
            on_message=self._on_console_message,
            static_dir=static_dir,
        )
        self.last_telemetry: Optional[dict] = None
        self._proc_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []
        self._glove_rx: Optional[socket.socket] = None
        self._tel_rx: Optional[socket.socket] = None
        self._tx: Optional[socket.socket] = None
        self._last_rx_wall = time.monotonic()
        self._last_watchdog_tx = 0.0
        self._glove_addr: Optional[Tuple[str, int]] = None
        self.header: Optional[SessionHeader] = None
        self.fatal: Optional[str] = None

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        cfg = self.cfg
        self._glove_rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._glove_rx.bind((cfg.wire.host, cfg.wire.glove_port))
        self._glove_rx.settimeout(0.05)
        self._tel_rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._tel_rx.bind((cfg.wire.host, cfg.wire.telemetry_port))
        self._tel_rx.settimeout(0.2)
        self._tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.bridge.start()
        self._stop.clear()
        self._threads = [
            threading.Thread(target=self._glove_loop, name="pipe-glove", daemon=True),
            threading.Thread(target=self._telemetry_loop, name="pipe-tel", daemon=True),
            threading.Thread(target=self._state_loop, name="pipe-state", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        self.bridge.stop()
        for s in (self._glove_rx, self._tel_rx, self._tx):
            if s is not None:
                s.close()
        if self.writer is not None:
            self.writer.close()

    def report(self):
        return self.ingestor.report if self.ingestor is not None else None

    # -- console intents ---------------------------------------------------

    def _on_console_message(self, text: str) -> None:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            return
        if not isinstance(obj, dict):
            return
        if obj.get("cmd") == "reset_pose":
            self.request_reset()
        elif obj.get("cmd") == "arm":
            self.request_armed(True)
        elif obj.get("cmd") == "disarm":
            self.request_armed(False)
        elif "emu" in obj:
            # steer the emulator's interactive mode
            try:
                self._tx.sendto(
                    dumps_canonical(obj).encode("utf-8"),
                    (self.cfg.wire.host, self.cfg.wire.emulator_ctl_port),
                )
            except OSError:
                pass

    def request_reset(self) -> None:
        with self._proc_lock:
            if self.core is not None:
                self.core.request_reset()

    def request_armed(self, armed: bool) -> None:
        with self._proc_lock:
            if self.core is not None:
                self.core.request_armed(armed)

    # -- loops --------------------------------------------------------------

    def _ensure_session(self, header: Optional[SessionHeader], packet_fingers: Optional[int] = None) -> None:
        if self.core is None:
            # headerless streams (lost datagram) fall back to the packet shape
            if header is not None:
                fingers = header.fingers
            elif packet_fingers is not None:
                fingers = packet_fingers
            else:
                fingers = self.cfg.wire.fingers
            self.core = PipelineCore(self.cfg, finger_count=fingers)
            self.ingestor = Ingestor(expected_fingers=fingers)
            self.header = header
        elif header is not None:
            if header.fingers != self.core.finger_count:
                raise FingerCountMismatch(
                    f"header declares {header.fingers} fingers, session has {self.core.finger_count}"
                )

    def _log(self, stream: str, payload: dict, t_host: Optional[int] = None) -> None:
        if self.writer is None:
            return
        if t_host is None:
            t_host = time.time_ns()
        if self.writer.last_t is not None and t_host < self.writer.last_t:
            t_host = self.writer.last_t  # wall clock stepped back; keep the file ordered
        self.writer.append(stream, payload, t_host)

    def _glove_loop(self) -> None:
        cfg = self.cfg
        while not self._stop.is_set():
            try:
                data, addr = self._glove_rx.recvfrom(65536)
            except socket.timeout:
                self._watchdog_tick()
                continue
            except OSError:
                break
            t_host = time.time_ns()
            self._last_rx_wall = time.monotonic()
            try:
                msg = parse_message(data, t_host)
            except ParseError:
                with self._proc_lock:
                    if self.ingestor is not None:
                        self.ingestor.note_malformed()
                continue
            self._glove_addr = (addr[0], cfg.wire.haptic_port)
            try:
                with self._proc_lock:
                    if isinstance(msg, SessionHeader):
                        self._ensure_session(msg)
                        self.ingestor.note_header()
                        self._log(STREAM_GLOVE, json.loads(serialize_header(msg)), t_host)
                        continue
                    self._ensure_session(None, packet_fingers=len(msg.fingers))
                    self._log(STREAM_GLOVE, json.loads(data.decode("utf-8")), t_host)
                    if self.ingestor.step(msg) is not Disposition.ACCEPT:
                        continue
                    result = self.core.feed(msg)
                    self._emit_command(result)
            except FingerCountMismatch as e:
                self.fatal = str(e)
                self._stop.set()
                break

    def _emit_command(self, result: FeedResult) -> None:
        cfg = self.cfg
        try:
            self._tx.sendto(result.command_bytes, (cfg.wire.host, cfg.wire.command_port))
        except OSError:
            pass
        self._log(STREAM_COMMAND, command_obj(result.command))
        self.bridge.broadcast(result.command_bytes.decode("utf-8"))
        for ev in result.events:
            obj = ev.wire_obj()
            self._log(STREAM_EVENT, obj)
            self.bridge.broadcast(dumps_canonical(obj))
        if result.reset_applied:
            self._log(STREAM_EVENT, {"ctl": "reset_pose", "at_seq": self.ingestor.last_seq})
        if result.armed_change is not None:
            self._log(
                STREAM_EVENT,
                {"ctl": "armed", "value": result.armed_change, "at_seq": self.ingestor.last_seq},
            )

    def _watchdog_tick(self) -> None:
        cfg = self.cfg
        with self._proc_lock:
            if self.core is None or not self.core.calibrated:
                return
            silent = time.monotonic() - self._last_rx_wall
            if silent < cfg.mapping.watchdog_s:
                return
            if time.monotonic() - self._last_watchdog_tx < 0.1:
                return
            self._last_watchdog_tx = time.monotonic()
            hover = self.core._hover_command(self.core._prev_t_us or 0)
            payload = serialize_command(hover)
            try:
                self._tx.sendto(payload, (cfg.wire.host, cfg.wire.command_port))
            except OSError:
                pass
            self._log(STREAM_WATCHDOG, command_obj(hover))

    def _telemetry_loop(self) -> None:
        cfg = self.cfg
        while not self._stop.is_set():
            try:
                data, _ = self._tel_rx.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            t_host = time.time_ns()
            try:
                tel = parse_telemetry(data)
            except ParseError:
                continue
            with self._proc_lock:
                obj = telemetry_obj(tel)
                self.last_telemetry = obj
                self._log(STREAM_TELEMETRY, obj, t_host)
                events = self.monitor.step(tel.speed, tel.t_sim)
                for ev in events:
                    self._emit_haptic(ev)
            self.bridge.broadcast(dumps_canonical(obj))

    def _emit_haptic(self, ev: HapticEvent) -> None:
        if self._glove_addr is not None:
            try:
                self._tx.sendto(serialize_haptic(ev), self._glove_addr)
            except OSError:
                pass
        self._log(STREAM_EVENT, ev.log_obj())
        self.bridge.broadcast(dumps_canonical(ev.log_obj()))

    def _state_loop(self) -> None:
        while not self._stop.is_set():
            time.sleep(0.05)
            with self._proc_lock:
                if self.core is None:
                    continue
                obj = self.core.state_obj(self.report())
            self.bridge.broadcast(dumps_canonical(obj))


@dataclass
class ReplayResult:
    commands: List[bytes] = field(default_factory=list)
    events: List[bytes] = field(default_factory=list)
    accepted: int = 0
    haptic_events: int = 0


class ReplayRunner:
    """Batch replay of a recorded session through a fresh pipeline core.

    Records are processed in file order; operator intents recorded as
    ``{"ctl": ...}`` events are re-applied at the same packet seq, so the
    derived command/event streams are byte-identical to the live run.
    """

    def __init__(self, cfg: Config):
        self.cfg = cfg

    def run(self, records, writer: Optional[SessionWriter] = None) -> ReplayResult:
        records = list(records)
        reset_seqs: Set[int] = set()
        armed_seqs = {}
        for rec in records:
            if rec.stream == STREAM_EVENT and "ctl" in rec.payload:
                if rec.payload["ctl"] == "reset_pose":
                    reset_seqs.add(rec.payload["at_seq"])
                elif rec.payload["ctl"] == "armed":
                    armed_seqs[rec.payload["at_seq"]] = rec.payload["value"]

        core: Optional[PipelineCore] = None
        ingestor: Optional[Ingestor] = None
        monitor = SpeedMonitor(
            thresholds=(self.cfg.haptics.threshold_1, self.cfg.haptics.threshold_2),
            hysteresis=self.cfg.haptics.hysteresis,
        )
        out = ReplayResult()

        def log(stream: str, payload: dict) -> None:
            if writer is not None:
                writer.append(stream, payload)

        for rec in records:
            if rec.stream == STREAM_GLOVE:
                if "hdr" in rec.payload:
                    header = header_from_obj(rec.payload)
                    if core is None:
                        core = PipelineCore(self.cfg, finger_count=header.fingers)
                        ingestor = Ingestor(expected_fingers=header.fingers)
                    continue
                pkt = packet_from_obj(rec.payload, rec.t_host)
                if core is None:
                    core = PipelineCore(self.cfg, finger_count=len(pkt.fingers))
                    ingestor = Ingestor(expected_fingers=len(pkt.fingers))
                if ingestor.step(pkt) is not Disposition.ACCEPT:
                    continue
                if pkt.seq in reset_seqs:
                    core.request_reset()
                if pkt.seq in armed_seqs:
                    core.request_armed(armed_seqs[pkt.seq])
                result = core.feed(pkt)
                out.accepted += 1
                out.commands.append(result.command_bytes)
                log(STREAM_COMMAND, command_obj(result.command))
                for ev in result.events:
                    payload = ev.wire_obj()
                    out.events.append(dumps_canonical(payload).encode("utf-8"))
                    log(STREAM_EVENT, payload)
            elif rec.stream == STREAM_TELEMETRY:
                tel = parse_telemetry(dumps_canonical(rec.payload).encode("utf-8"))
                for ev in monitor.step(tel.speed, tel.t_sim):
                    payload = ev.log_obj()
                    out.events.append(dumps_canonical(payload).encode("utf-8"))
                    out.haptic_events += 1
                    log(STREAM_EVENT, payload)
            # event and watchdog records are derived streams: not replayed

        return out


def replay_session(path: str, cfg: Config, out_path: Optional[str] = None) -> ReplayResult:
    reader = SessionReader(path)
    writer = SessionWriter(out_path) if out_path else None
    try:
        return ReplayRunner(cfg).run(reader, writer)
    finally:
        if writer is not None:
            writer.close()
