import json
import time
import urllib.request

import pytest
from websockets.sync.client import connect

from imuteleop.wsbridge import ConsoleBridge


@pytest.fixture
def bridge(cfg):
    received = []
    b = ConsoleBridge(host=cfg.wire.host, port=cfg.wire.http_port, on_message=received.append)
    b.start()
    yield b, received, f"ws://{cfg.wire.host}:{cfg.wire.http_port}/ws"
    b.stop()


def test_broadcast_reaches_client(bridge):
    b, _, url = bridge
    with connect(url) as client:
        deadline = time.monotonic() + 2.0
        while b.client_count() == 0 and time.monotonic() < deadline:
            time.sleep(0.01)
        b.broadcast('{"state":{"armed":true}}')
        msg = json.loads(client.recv(timeout=2.0))
        assert msg == {"state": {"armed": True}}


def test_inbound_messages_hit_callback(bridge):
    b, received, url = bridge
    with connect(url) as client:
        client.send('{"cmd":"reset_pose"}')
        deadline = time.monotonic() + 2.0
        while not received and time.monotonic() < deadline:
            time.sleep(0.01)
    assert received == ['{"cmd":"reset_pose"}']


def test_multiple_clients_fanout(bridge):
    b, _, url = bridge
    with connect(url) as c1, connect(url) as c2:
        deadline = time.monotonic() + 2.0
        while b.client_count() < 2 and time.monotonic() < deadline:
            time.sleep(0.01)
        b.broadcast("x")
        assert c1.recv(timeout=2.0) == "x"
        assert c2.recv(timeout=2.0) == "x"


def test_disconnect_cleanup(bridge):
    b, _, url = bridge
    client = connect(url)
    deadline = time.monotonic() + 2.0
    while b.client_count() == 0 and time.monotonic() < deadline:
        time.sleep(0.01)
    client.close()
    deadline = time.monotonic() + 2.0
    while b.client_count() > 0 and time.monotonic() < deadline:
        time.sleep(0.01)
    assert b.client_count() == 0
    b.broadcast("into the void")  # must not raise


def test_static_file_serving(cfg, tmp_path):
    (tmp_path / "index.html").write_text("<html>console</html>")
    b = ConsoleBridge(host=cfg.wire.host, port=cfg.wire.http_port, static_dir=str(tmp_path))
    b.start()
    try:
        url = f"http://{cfg.wire.host}:{cfg.wire.http_port}/"
        body = urllib.request.urlopen(url, timeout=2.0).read()
        assert body == b"<html>console</html>"
        with pytest.raises(urllib.error.HTTPError):
            urllib.request.urlopen(f"http://{cfg.wire.host}:{cfg.wire.http_port}/../etc/passwd", timeout=2.0)
    finally:
        b.stop()


def test_http_404_without_bundle(bridge):
    b, _, url = bridge
    http = url.replace("ws://", "http://").replace("/ws", "/")
    with pytest.raises(urllib.error.HTTPError) as e:
        urllib.request.urlopen(http, timeout=2.0)
    assert e.value.code == 404
