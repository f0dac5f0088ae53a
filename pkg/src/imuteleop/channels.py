"""Thread-communication primitives used between the pipeline loops."""

from __future__ import annotations

import threading
from collections import deque
from typing import Any, Optional


class BoundedChannel:
    """FIFO with a hard bound: writers never block, the oldest item is shed
    on overflow and counted."""

    def __init__(self, maxlen: int = 256):
        self._items: deque = deque()
        self.maxlen = maxlen
        self.overflowed = 0
        self._cond = threading.Condition()
        self._closed = False

    def put(self, item: Any) -> None:
        with self._cond:
            if self._closed:
                return
            if len(self._items) >= self.maxlen:
                self._items.popleft()
                self.overflowed += 1
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout: Optional[float] = None) -> Optional[Any]:
        """Next item, or None on timeout / closed-and-drained."""
        with self._cond:
            if not self._items:
                if self._closed:
                    return None
                self._cond.wait(timeout)
            if self._items:
                return self._items.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


class LatestSlot:
    """Single-slot mailbox: writers overwrite, readers see the most recent."""

    def __init__(self):
        self._value: Optional[Any] = None
        self._lock = threading.Lock()

    def store(self, value: Any) -> None:
        with self._lock:
            self._value = value

    def latest(self) -> Optional[Any]:
        with self._lock:
            return self._value
