"""WebSocket bridge for the operator console.

Serves ``/ws`` on the pipeline's HTTP port and fans pipeline/sim/haptic
messages out to every connected console; inbound messages (reset, arm,
disarm, emulated-pose updates) go to a single callback.  Each client gets
a bounded send queue drained by its own writer thread, so a stalled
browser can never back-pressure the pipeline: the oldest frames are shed
instead.  Plain HTTP requests are served from the static console bundle
when one is configured, so a browser needs only one port.
"""

from __future__ import annotations

import mimetypes
import threading
from http import HTTPStatus
from pathlib import Path
from typing import Callable, Dict, Optional

from websockets.sync.server import Server, ServerConnection, serve

from .channels import BoundedChannel

SEND_QUEUE_LEN = 512


class ConsoleBridge:
    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 8080,
        on_message: Optional[Callable[[str], None]] = None,
        static_dir: Optional[str] = None,
    ):
        self.host = host
        self.port = port
        self.on_message = on_message
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self._queues: Dict[ServerConnection, BoundedChannel] = {}
        self._lock = threading.Lock()
        self._server: Optional[Server] = None
        self._thread: Optional[threading.Thread] = None

    # -- lifecycle -------------------------------------------------------

    def start(self) -> None:
        self._server = serve(
            self._handler,
            self.host,
            self.port,
            process_request=self._process_request,
        )
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="console-ws", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        with self._lock:
            items = list(self._queues.items())
        for conn, queue in items:
            queue.close()
            try:
                conn.close()
            except Exception:
                pass
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    # -- traffic ---------------------------------------------------------

    def broadcast(self, text: str) -> None:
        """Queue a frame for every client; never blocks the caller."""
        with self._lock:
            queues = list(self._queues.values())
        for queue in queues:
            queue.put(text)

    def client_count(self) -> int:
        with self._lock:
            return len(self._queues)

    def _writer(self, connection: ServerConnection, queue: BoundedChannel) -> None:
        while True:
            text = queue.get(timeout=1.0)
            if text is None:
                if queue._closed:  # drained and closed
                    return
                continue
            try:
                connection.send(text)
            except Exception:
                return

    def _handler(self, connection: ServerConnection) -> None:
        queue = BoundedChannel(SEND_QUEUE_LEN)
        with self._lock:
            self._queues[connection] = queue
        writer = threading.Thread(
            target=self._writer, args=(connection, queue), name="console-tx", daemon=True
        )
        writer.start()
        try:
            for message in connection:
                if isinstance(message, bytes):
                    continue
                if self.on_message is not None:
                    self.on_message(message)
        except Exception:
            pass
        finally:
            with self._lock:
                self._queues.pop(connection, None)
            queue.close()

    # -- plain HTTP (static console bundle) -------------------------------

    def _process_request(self, connection: ServerConnection, request):
        upgrade = request.headers.get("Upgrade", "")
        if request.path == "/ws" or upgrade.lower() == "websocket":
            return None  # proceed with the WebSocket handshake
        if self.static_dir is None:
            return connection.respond(HTTPStatus.NOT_FOUND, "operator console not bundled\n")
        rel = request.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir)) or not target.is_file():
            return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        response = connection.respond(HTTPStatus.OK, "")
        response.headers["Content-Type"] = ctype
        response.body = target.read_bytes()
        del response.headers["Content-Length"]
        response.headers["Content-Length"] = str(len(response.body))
        return response
