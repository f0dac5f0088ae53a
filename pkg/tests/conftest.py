import socket
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # tests import oracles/scenario helpers

from imuteleop.config import load_config


def _free_udp_ports(n: int):
    socks = [socket.socket(socket.AF_INET, socket.SOCK_DGRAM) for _ in range(n)]
    ports = []
    for s in socks:
        s.bind(("127.0.0.1", 0))
        ports.append(s.getsockname()[1])
    for s in socks:
        s.close()
    return ports


def _free_tcp_port():
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


@pytest.fixture
def cfg():
    """Default config rehomed onto free ports so tests never collide."""
    cfg = load_config()
    (
        cfg.wire.glove_port,
        cfg.wire.telemetry_port,
        cfg.wire.command_port,
        cfg.wire.haptic_port,
        cfg.wire.emulator_ctl_port,
    ) = _free_udp_ports(5)
    cfg.wire.http_port = _free_tcp_port()
    return cfg


@pytest.fixture
def repo_root():
    return Path(__file__).resolve().parents[1]
