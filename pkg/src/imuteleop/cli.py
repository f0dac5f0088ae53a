"""Operator entry point.

Subcommands wire the modules into runnable loops:

* ``pipeline``   live processing: glove in, commands out, console bridge
* ``sim``        the UAV plant: commands in, telemetry out
* ``emulate``    synthetic glove from a pose script or interactive steering
* ``record``     passive capture of the glove and telemetry ports
* ``replay``     re-emit a session over UDP, or batch-reprocess it offline
* ``export-csv`` flatten a session file for external plotting

Exit codes: 0 clean, 1 configuration error, 2 runtime bind/IO failure.
"""

from __future__ import annotations

import argparse
import json
import math
import socket
import sys
import time
from typing import List, Optional

from .config import Config, ConfigInvalid, load_config, save_config
from .emulator import EmulatorLoop, PoseScript, ScriptParseError
from .pipeline import PipelineApp, replay_session
from .sessionlog import (
    STREAM_GLOVE,
    STREAM_TELEMETRY,
    SessionReader,
    SessionWriter,
    export_csv,
    iter_replay,
    read_records,
)
from .sim import GraspZone, Simulator

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _load(args) -> Config:
    cfg = load_config(getattr(args, "config", None))
    for name, target in (
        ("glove_port", "wire.glove_port"),
        ("telemetry_port", "wire.telemetry_port"),
        ("command_port", "wire.command_port"),
        ("http_port", "wire.http_port"),
        ("auto_reset", "pipeline.auto_reset_after_s"),
    ):
        value = getattr(args, name, None)
        if value is not None:
            section, key = target.split(".")
            setattr(getattr(cfg, section), key, value)
    return cfg


def _wait_interrupt(duration: Optional[float]) -> None:
    deadline = None if duration is None else time.monotonic() + duration
    try:
        while deadline is None or time.monotonic() < deadline:
            time.sleep(0.1)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)


def _keybinding_loop(app: PipelineApp) -> None:
    # operator keys on stdin: r = reset pose, a = arm, d = disarm
    try:
        for line in sys.stdin:
            key = line.strip().lower()
            if key == "r":
                app.request_reset()
                print("pose reset requested")
            elif key == "a":
                app.request_armed(True)
                print("armed")
            elif key == "d":
                app.request_armed(False)
                print("disarmed")
    except (OSError, ValueError):
        pass  # stdin closed or not attached


def cmd_pipeline(args) -> int:
    cfg = _load(args)
    app = PipelineApp(cfg, session_path=args.record, static_dir=args.console_dir)
    try:
        app.start()
    except OSError as e:
        print(f"bind failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(
        f"pipeline up: glove :{cfg.wire.glove_port} -> commands :{cfg.wire.command_port}, "
        f"console ws://{cfg.wire.host}:{cfg.wire.http_port}/ws"
    )
    print("keys: r + Enter = reset pose, a = arm, d = disarm")
    import threading

    threading.Thread(target=_keybinding_loop, args=(app,), daemon=True).start()
    _wait_interrupt(args.duration)
    app.stop()
    report = app.report()
    if report is not None:
        print(
            f"ingest: received={report.received} dropped={report.dropped} "
            f"reordered={report.reordered} malformed={report.malformed}"
        )
    if app.fatal:
        print(f"fatal: {app.fatal}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sim(args) -> int:
    cfg = _load(args)
    zone = None
    if cfg.sim.grasp_zone_enabled:
        zone = GraspZone(tuple(cfg.sim.grasp_zone_center), cfg.sim.grasp_zone_radius)
    sim = Simulator(
        spawn=cfg.sim.spawn,
        grasp_zone=zone,
        command_port=cfg.wire.command_port,
        telemetry_port=cfg.wire.telemetry_port,
        telemetry_addr=cfg.wire.host,
        dt=cfg.sim.dt,
        telemetry_hz=cfg.sim.telemetry_hz,
        v_max=cfg.mapping.v_max,
        omega_max=cfg.mapping.omega_max,
    )
    try:
        sim.start()
    except OSError as e:
        print(f"bind failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"sim up: commands :{cfg.wire.command_port} -> telemetry :{cfg.wire.telemetry_port}")
    _wait_interrupt(args.duration)
    sim.stop()
    s = sim.state
    print(
        f"final state: p=({s.position[0]:.3f},{s.position[1]:.3f},{s.position[2]:.3f}) "
        f"yaw={s.yaw:.3f} grip={s.grip_phase} grasped={sim.grasped} t={s.t_sim:.2f}s"
    )
    return EXIT_OK


def cmd_emulate(args) -> int:
    cfg = _load(args)
    script = None
    if args.script:
        try:
            script = PoseScript.load(args.script)
        except ScriptParseError as e:
            print(f"bad script: {e}", file=sys.stderr)
            return EXIT_CONFIG
    elif not args.interactive:
        print("need --script FILE or --interactive", file=sys.stderr)
        return EXIT_CONFIG
    noise_g = cfg.emulator.gyro_noise if args.noise else 0.0
    noise_a = cfg.emulator.accel_noise if args.noise else 0.0
    loop = EmulatorLoop(
        script,
        finger_count=cfg.wire.fingers,
        rate_hz=cfg.wire.rate_hz,
        glove_addr=(cfg.wire.host, cfg.wire.glove_port),
        ctl_port=cfg.wire.emulator_ctl_port,
        gyro_noise=noise_g,
        accel_noise=noise_a,
        seed=cfg.emulator.seed,
        hold_end_s=cfg.emulator.hold_end_s,
    )
    try:
        loop.start()
    except OSError as e:
        print(f"bind failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if script is not None:
        print(f"emulating script {args.script} ({script.duration:.1f}s)")
        loop.join()
    else:
        print("interactive emulator: steer via the console or UDP pose targets")
        _wait_interrupt(args.duration)
    loop.stop()
    print(f"sent {loop.packets_sent} packets")
    return EXIT_OK


def cmd_record(args) -> int:
    cfg = _load(args)
    stop = [False]

    def _capture(port: int, stream: str, writer: SessionWriter, lock) -> None:
        rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        rx.bind((cfg.wire.host, port))
        rx.settimeout(0.2)
        while not stop[0]:
            try:
                data, _ = rx.recvfrom(65536)
            except socket.timeout:
                continue
            t_host = time.time_ns()
            try:
                obj = json.loads(data.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                continue
            with lock:
                writer.append(stream, obj, t_host)
        rx.close()

    import threading

    writer = SessionWriter(args.out)
    lock = threading.Lock()
    threads = [
        threading.Thread(
            target=_capture, args=(cfg.wire.glove_port, STREAM_GLOVE, writer, lock), daemon=True
        ),
        threading.Thread(
            target=_capture,
            args=(cfg.wire.telemetry_port, STREAM_TELEMETRY, writer, lock),
            daemon=True,
        ),
    ]
    try:
        for t in threads:
            t.start()
    except OSError as e:
        print(f"bind failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"recording glove :{cfg.wire.glove_port} + telemetry :{cfg.wire.telemetry_port} -> {args.out}")
    _wait_interrupt(args.duration)
    stop[0] = True
    for t in threads:
        t.join(timeout=1.0)
    writer.close()
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _load(args)
    if args.batch:
        result = replay_session(args.session, cfg, out_path=args.out)
        print(
            f"batch replay: {result.accepted} packets -> {len(result.commands)} commands, "
            f"{len(result.events)} events"
        )
        return EXIT_OK
    speed = math.inf if args.speed == 0 else args.speed
    tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    ports = {STREAM_GLOVE: cfg.wire.glove_port, STREAM_TELEMETRY: cfg.wire.telemetry_port}
    count = 0
    reader = SessionReader(args.session)
    for rec in iter_replay(reader, speed=speed):
        port = ports.get(rec.stream)
        if port is None:
            continue
        tx.sendto(rec.payload_bytes(), (cfg.wire.host, port))
        count += 1
    tx.close()
    skipped = reader.corrupt
    print(f"re-emitted {count} records" + (f" ({skipped} corrupt lines skipped)" if skipped else ""))
    return EXIT_OK


def cmd_export_csv(args) -> int:
    rows = export_csv(read_records(args.session), args.out)
    print(f"wrote {rows} rows to {args.out}")
    return EXIT_OK


def cmd_show_config(args) -> int:
    cfg = _load(args)
    save_config(cfg, args.out)
    print(f"effective config written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imuteleop", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, duration_default=None):
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--duration", type=float, default=duration_default,
                        help="stop after this many seconds (default: run until Ctrl-C)")

    sp = sub.add_parser("pipeline", help="run the live processing pipeline")
    common(sp)
    sp.add_argument("--record", help="write a session log to this file")
    sp.add_argument("--console-dir", help="serve the operator console bundle from this directory")
    sp.add_argument("--glove-port", type=int)
    sp.add_argument("--telemetry-port", type=int)
    sp.add_argument("--command-port", type=int)
    sp.add_argument("--http-port", type=int)
    sp.add_argument("--auto-reset", type=float, help="auto pose reset after N device seconds")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("sim", help="run the UAV simulator")
    common(sp)
    sp.add_argument("--command-port", type=int)
    sp.add_argument("--telemetry-port", type=int)
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("emulate", help="run the glove emulator")
    common(sp)
    sp.add_argument("--script", help="JSON pose keyframe script")
    sp.add_argument("--interactive", action="store_true",
                    help="steer via console {\"emu\":...} messages instead of a script")
    sp.add_argument("--noise", action="store_true", help="add MEMS-like sensor noise")
    sp.add_argument("--glove-port", type=int)
    sp.set_defaults(func=cmd_emulate)

    sp = sub.add_parser("record", help="passively capture glove + telemetry traffic")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--glove-port", type=int)
    sp.add_argument("--telemetry-port", type=int)
    sp.set_defaults(func=cmd_record)

    sp = sub.add_parser("replay", help="re-emit or batch-reprocess a session")
    common(sp)
    sp.add_argument("session")
    sp.add_argument("--speed", type=float, default=1.0,
                    help="time-scale for re-emission; 0 = no delays")
    sp.add_argument("--batch", action="store_true",
                    help="reprocess offline through the pipeline (no sockets)")
    sp.add_argument("--out", help="with --batch: write derived streams to this session file")
    sp.add_argument("--glove-port", type=int)
    sp.add_argument("--telemetry-port", type=int)
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("export-csv", help="flatten a session file to CSV")
    sp.add_argument("session")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export_csv)

    sp = sub.add_parser("show-config", help="write the effective configuration to a file")
    sp.add_argument("--config", help="TOML configuration file")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_show_config)

    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ScriptParseError as e:
        print(f"script error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
