"""PipelineCore determinism and the live app's transport behavior."""

import json
import math
import socket
import time

import numpy as np
import pytest

from imuteleop.config import load_config
from imuteleop.emulator import GloveSynthesizer
from imuteleop.gestures import GestureKind
from imuteleop.mapping import parse_command
from imuteleop.pipeline import PipelineApp, PipelineCore, ReplayRunner
from imuteleop.protocol import serialize_packet, serialize_header
from imuteleop.sessionlog import STREAM_COMMAND, read_records
from imuteleop.protocol import dumps_canonical


def make_core(auto_reset=2.0, fingers=2):
    cfg = load_config()
    cfg.pipeline.auto_reset_after_s = auto_reset
    return PipelineCore(cfg, finger_count=fingers)


def drive(core, synth, poses, start_seq=0):
    """poses: iterable of (wrist_rpy, finger_pitches); returns feed results."""
    results = []
    for wrist, fingers in poses:
        pkt = synth.packet(np.asarray(wrist), np.asarray(fingers))
        results.append(core.feed(pkt))
    return results


def static_poses(n, wrist=(0, 0, 0), fingers=(0, 0)):
    return [(wrist, fingers)] * n


def test_calibration_then_warmup_then_reset():
    core = make_core(auto_reset=2.0)
    synth = GloveSynthesizer(2, 100.0)
    results = drive(core, synth, static_poses(100))
    assert core.calibrated
    assert results[-1].calibrating is False
    assert core.reference is None  # not warm yet
    results = drive(core, synth, static_poses(120))
    assert core.reference is not None  # auto reset once t_device passes 2.0 s
    assert any(r.reset_applied for r in results)
    assert np.allclose(core.wrist_relative, [0, 0, 0], atol=1e-9)


def test_hover_commands_until_reference():
    core = make_core(auto_reset=0.0)  # no auto reset
    synth = GloveSynthesizer(2, 100.0)
    results = drive(core, synth, static_poses(250))
    for r in results:
        assert r.command.v_forward == 0.0
        assert r.command.v_lateral == 0.0
        assert r.command.altitude_target == 1.0
    assert core.reference is None
    core.request_reset()
    results = drive(core, synth, static_poses(1))
    assert results[0].reset_applied


def test_pitch_maps_to_forward_after_reset():
    core = make_core(auto_reset=1.5)
    synth = GloveSynthesizer(2, 100.0)
    drive(core, synth, static_poses(300))
    # ramp to -20 deg pitch over 0.5 s, hold 1 s
    poses = []
    for k in range(50):
        poses.append(((0.0, math.radians(-20.0) * k / 50.0, 0.0), (0, 0)))
    poses += static_poses(100, wrist=(0.0, math.radians(-20.0), 0.0))
    results = drive(core, synth, poses)
    vf = results[-1].command.v_forward
    assert vf == pytest.approx((20 - 5) / 25, abs=0.02)
    assert core.lock.locked  # wrist active: finger gestures suppressed


def test_finger_close_emits_grip_event_and_sets_gripper():
    core = make_core(auto_reset=1.5)
    synth = GloveSynthesizer(2, 100.0)
    drive(core, synth, static_poses(300))
    poses = []
    for k in range(30):
        p = math.radians(-60.0) * (k + 1) / 30.0
        poses.append(((0, 0, 0), (p, p)))
    poses += static_poses(50, fingers=(math.radians(-60),) * 2)
    results = drive(core, synth, poses)
    events = [e for r in results for e in r.events]
    assert [e.kind for e in events] == [GestureKind.GRIP_CLOSE]
    assert results[-1].command.gripper.value == "closed"


def test_locked_wrist_suppresses_finger_gestures():
    core = make_core(auto_reset=1.5)
    synth = GloveSynthesizer(2, 100.0)
    drive(core, synth, static_poses(300))
    # deflect wrist AND close fingers simultaneously
    poses = []
    for k in range(30):
        u = (k + 1) / 30.0
        poses.append(((0.0, math.radians(-20) * u, 0.0), (math.radians(-60) * u,) * 2))
    poses += static_poses(100, wrist=(0, math.radians(-20), 0), fingers=(math.radians(-60),) * 2)
    results = drive(core, synth, poses)
    assert [e for r in results for e in r.events] == []
    assert results[-1].command.gripper.value == "open"


def ramp_poses(n, wrist_to, fingers=(0.0, 0.0), wrist_from=(0.0, 0.0, 0.0)):
    """Physical pose ramp; a teleporting wrist would be eaten by the median gate."""
    a, b = np.asarray(wrist_from, float), np.asarray(wrist_to, float)
    return [(tuple(a + (b - a) * (k + 1) / n), fingers) for k in range(n)]


def test_disarm_pins_hover():
    core = make_core(auto_reset=1.5)
    synth = GloveSynthesizer(2, 100.0)
    drive(core, synth, static_poses(300))
    core.request_armed(False)
    tilted = (0.0, math.radians(-25.0), 0.0)
    poses = ramp_poses(30, tilted) + static_poses(50, wrist=tilted)
    results = drive(core, synth, poses)
    assert results[0].armed_change is False
    assert all(r.command.v_forward == 0.0 for r in results)
    core.request_armed(True)
    results = drive(core, synth, static_poses(100, wrist=tilted))
    assert results[-1].command.v_forward == pytest.approx(0.8, abs=0.02)


def test_core_is_deterministic():
    def run():
        core = make_core(auto_reset=1.5)
        synth = GloveSynthesizer(2, 100.0, gyro_noise=0.005, accel_noise=0.05, seed=9)
        poses = static_poses(300)
        for k in range(200):
            u = k / 200.0
            poses.append(((0.0, -0.4 * u, 0.1 * u), (-1.0 * u, -0.3 * u)))
        return [r.command_bytes for r in drive(core, synth, poses)]

    assert run() == run()


# ------------------------------------------------------------- live app


def test_live_app_end_to_end(cfg, tmp_path):
    """Raw UDP packets in, commands out, session recorded, replay identical."""
    cfg.pipeline.auto_reset_after_s = 1.5
    session = tmp_path / "session.jsonl"
    app = PipelineApp(cfg, session_path=str(session))
    app.start()
    cmd_rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    cmd_rx.bind((cfg.wire.host, cfg.wire.command_port))
    cmd_rx.settimeout(2.0)
    tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    synth = GloveSynthesizer(2, 100.0)
    dest = (cfg.wire.host, cfg.wire.glove_port)
    tx.sendto(serialize_header(synth.header()), dest)
    for k in range(400):
        pitch = math.radians(-20.0) * min(max((k - 250) / 50.0, 0.0), 1.0)
        pkt = synth.packet(np.array([0.0, pitch, 0.0]), np.zeros(2))
        tx.sendto(serialize_packet(pkt), dest)
        time.sleep(0.002)  # paced, but faster than real time

    got = []
    try:
        for _ in range(400):
            got.append(parse_command(cmd_rx.recv(65536)))
    except socket.timeout:
        pass
    app.stop()
    cmd_rx.close()
    tx.close()

    assert len(got) >= 390
    assert got[-1].v_forward > 0.5  # pitch ramp made it through the whole loop
    assert app.report().received == 401

    # recorded command stream replays byte-identically
    records = read_records(session)
    live_cmds = [dumps_canonical(r.payload).encode() for r in records if r.stream == STREAM_COMMAND]
    result = ReplayRunner(cfg).run(records)
    assert result.commands == live_cmds


def test_live_app_handles_malformed_and_reordered(cfg):
    app = PipelineApp(cfg)
    app.start()
    tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    dest = (cfg.wire.host, cfg.wire.glove_port)
    synth = GloveSynthesizer(2, 100.0)
    tx.sendto(serialize_header(synth.header()), dest)
    pkts = [synth.packet(np.zeros(3), np.zeros(2)) for _ in range(5)]
    for i in (0, 2, 1, 3, 4):  # one regression
        tx.sendto(serialize_packet(pkts[i]), dest)
    tx.sendto(b"not json at all", dest)
    time.sleep(0.3)
    app.stop()
    tx.close()
    rep = app.report()
    assert rep.received == 6
    assert rep.reordered == 1
    assert rep.dropped == 1  # the gap created by out-of-order delivery
    assert rep.malformed == 1


def test_watchdog_emits_hover_on_stream_loss(cfg):
    cfg.pipeline.auto_reset_after_s = 0.0
    app = PipelineApp(cfg)
    app.start()
    cmd_rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    cmd_rx.bind((cfg.wire.host, cfg.wire.command_port))
    cmd_rx.settimeout(1.5)
    tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    dest = (cfg.wire.host, cfg.wire.glove_port)
    synth = GloveSynthesizer(2, 100.0)
    tx.sendto(serialize_header(synth.header()), dest)
    for _ in range(101):  # exactly enough to finish calibration
        tx.sendto(serialize_packet(synth.packet(np.zeros(3), np.zeros(2))), dest)
        time.sleep(0.002)
    for _ in range(101):
        cmd_rx.recv(65536)
    # stream stops; the watchdog must start emitting hover
    wd = parse_command(cmd_rx.recv(65536))
    assert wd.v_forward == 0.0 and wd.v_lateral == 0.0 and wd.yaw_rate == 0.0
    app.stop()
    cmd_rx.close()
    tx.close()
