"""Session recording, replay and time alignment.

One UTF-8 JSON record per line: ``{"s":"glove","t":1690000000000000000,"d":{...}}``
where ``s`` tags the stream, ``t`` is the host receive clock in ns and
``d`` carries the payload exactly as it appeared on the wire.  Host
receipt time is the synchronization base for every stream: device and sim
clocks are unsynchronized, loopback jitter (~1 ms) is the documented error.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .protocol import dumps_canonical

STREAM_GLOVE = "glove"
STREAM_COMMAND = "command"
STREAM_TELEMETRY = "telemetry"
STREAM_EVENT = "event"
STREAM_WATCHDOG = "watchdog"  # wall-clock keep-alive hovers, excluded from replay comparisons

KNOWN_STREAMS = (STREAM_GLOVE, STREAM_COMMAND, STREAM_TELEMETRY, STREAM_EVENT, STREAM_WATCHDOG)


class ClockRegression(ValueError):
    pass


@dataclass(frozen=True)
class SessionRecord:
    stream: str
    t_host: int  # ns since epoch
    payload: dict

    def payload_bytes(self) -> bytes:
        return dumps_canonical(self.payload).encode("utf-8")


class SessionWriter:
    """Single-writer append-only session file."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._last_t: Optional[int] = None

    @property
    def last_t(self) -> Optional[int]:
        return self._last_t

    def append(self, stream: str, payload: dict, t_host: Optional[int] = None) -> SessionRecord:
        if t_host is None:
            t_host = time.time_ns()
        if self._last_t is not None and t_host < self._last_t:
            raise ClockRegression(f"t_host {t_host} < last {self._last_t}")
        rec = SessionRecord(stream=stream, t_host=t_host, payload=payload)
        self._fh.write(dumps_canonical({"s": stream, "t": t_host, "d": payload}))
        self._fh.write("\n")
        self._fh.flush()
        self._last_t = t_host
        return rec

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "SessionWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class SessionReader:
    """Iterates records, skipping corrupt lines with a count."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.corrupt = 0

    def __iter__(self) -> Iterator[SessionRecord]:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    rec = SessionRecord(stream=obj["s"], t_host=int(obj["t"]), payload=obj["d"])
                    if not isinstance(rec.payload, dict) or isinstance(obj["t"], bool):
                        raise ValueError
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    self.corrupt += 1
                    continue
                yield rec


def read_records(path: Union[str, Path]) -> List[SessionRecord]:
    return list(SessionReader(path))


def iter_replay(
    records: Iterable[SessionRecord], speed: float = math.inf
) -> Iterator[SessionRecord]:
    """Re-emit records with inter-record delays scaled by 1/speed.

    ``speed=math.inf`` is batch mode: no delays at all.  Payloads are
    yielded untouched.
    """
    if speed <= 0:
        raise ValueError("speed must be > 0")
    prev_t: Optional[int] = None
    for rec in records:
        if prev_t is not None and math.isfinite(speed):
            gap_s = (rec.t_host - prev_t) / 1e9 / speed
            if gap_s > 0:
                time.sleep(gap_s)
        prev_t = rec.t_host
        yield rec


NO_PRIOR_GLOVE = -1


def align(
    glove: Sequence[SessionRecord], telemetry: Sequence[SessionRecord]
) -> Tuple[List[SessionRecord], List[int]]:
    """Merge the two streams by t_host and pair each telemetry record with
    the nearest preceding glove record.

    Returns ``(merged, pairs)`` where ``pairs[i]`` is the glove index for
    telemetry record i, or ``NO_PRIOR_GLOVE`` when none precedes it.
    Ties keep glove records ahead of telemetry (stable for pre-interleaved
    streams).
    """
    merged: List[SessionRecord] = []
    pairs: List[int] = []
    gi = ti = 0
    while gi < len(glove) or ti < len(telemetry):
        take_glove = ti >= len(telemetry) or (
            gi < len(glove) and glove[gi].t_host <= telemetry[ti].t_host
        )
        if take_glove:
            merged.append(glove[gi])
            gi += 1
        else:
            merged.append(telemetry[ti])
            pairs.append(gi - 1 if gi > 0 else NO_PRIOR_GLOVE)
            ti += 1
    return merged, pairs


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}{k}.", v, out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}{i}.", v, out)
    else:
        out[prefix[:-1]] = obj


def export_csv(records: Iterable[SessionRecord], out_path: Union[str, Path]) -> int:
    """Flatten a session to one wide CSV (union of columns); returns rows."""
    rows: List[dict] = []
    columns: List[str] = ["stream", "t_host"]
    seen = set(columns)
    for rec in records:
        flat: dict = {}
        _flatten("", rec.payload, flat)
        row = {"stream": rec.stream, "t_host": rec.t_host, **flat}
        for key in flat:
            if key not in seen:
                seen.add(key)
                columns.append(key)
        rows.append(row)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, restval="")
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)
