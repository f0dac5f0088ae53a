"""Wire codec and ingestion bookkeeping for the glove packet stream.

One JSON object per UDP datagram.  Data packets:

    {"seq":0,"t":0,"palm":{"g":[0,0,0],"a":[0,0,9.81]},"fingers":[{"g":[...],"a":[...]}]}

Session header (first datagram of a session):

    {"hdr":1,"fingers":2,"rate_hz":100}

``seq`` is an unsigned 32-bit counter, ``t`` the device clock in
microseconds (unsigned 64-bit).  All gyro/accel values are SI (rad/s,
m/s^2) in the sensor body frame.  The host receive timestamp ``t_host``
(ns since epoch) is attached on receipt and never travels on the wire.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

MAX_SEQ = 2**32
MAX_T_DEVICE = 2**64
MAX_FINGERS = 5

GLOVE_PORT = 47800
TELEMETRY_PORT = 47801
COMMAND_PORT = 47802
HAPTIC_PORT = 47803
EMULATOR_CTL_PORT = 47804


class ParseError(ValueError):
    """Base class for every packet decoding failure."""


class MalformedSyntax(ParseError):
    """Datagram is not a UTF-8 JSON object."""


class SchemaViolation(ParseError):
    """Valid JSON that does not match the wire schema."""


class NonFiniteValue(ParseError):
    """A numeric field is NaN or infinite."""


class FingerCountMismatch(RuntimeError):
    """Packet finger count differs from the session header: fatal misconfig."""


@dataclass(frozen=True)
class ImuReading:
    gyro: tuple   # rad/s, body frame
    accel: tuple  # m/s^2, body frame

    def __post_init__(self):
        object.__setattr__(self, "gyro", tuple(float(v) for v in self.gyro))
        object.__setattr__(self, "accel", tuple(float(v) for v in self.accel))
        if len(self.gyro) != 3 or len(self.accel) != 3:
            raise ValueError("gyro and accel must be 3-vectors")
        if not all(math.isfinite(v) for v in self.gyro + self.accel):
            raise ValueError("non-finite component")


@dataclass(frozen=True)
class GlovePacket:
    seq: int
    t_device: int  # microseconds since device boot
    palm: ImuReading
    fingers: tuple
    t_host: Optional[int] = field(default=None, compare=False)  # ns since epoch


@dataclass(frozen=True)
class SessionHeader:
    fingers: int = 2
    rate_hz: float = 100.0
    t_host: Optional[int] = field(default=None, compare=False)


def _require_number(obj, name: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise SchemaViolation(f"{name} must be a number")
    v = float(obj)
    if not math.isfinite(v):
        raise NonFiniteValue(f"{name} is not finite")
    return v


def _require_uint(obj, name: str, bound: int) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise SchemaViolation(f"{name} must be an integer")
    if not 0 <= obj < bound:
        raise SchemaViolation(f"{name} out of range")
    return obj


def _parse_reading(obj, name: str) -> ImuReading:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{name} must be an object")
    if set(obj.keys()) != {"g", "a"}:
        raise SchemaViolation(f"{name} must have exactly keys g and a")
    vecs = []
    for key in ("g", "a"):
        arr = obj[key]
        if not isinstance(arr, list) or len(arr) != 3:
            raise SchemaViolation(f"{name}.{key} must be a 3-element array")
        vecs.append(tuple(_require_number(v, f"{name}.{key}[{i}]") for i, v in enumerate(arr)))
    return ImuReading(gyro=vecs[0], accel=vecs[1])


def _load_json(datagram: bytes) -> dict:
    try:
        text = datagram.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedSyntax("not UTF-8") from e
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, RecursionError, ValueError) as e:
        raise MalformedSyntax("not JSON") from e
    if not isinstance(obj, dict):
        raise SchemaViolation("top level must be an object")
    return obj


def packet_from_obj(obj: dict, t_host: Optional[int] = None) -> GlovePacket:
    if set(obj.keys()) != {"seq", "t", "palm", "fingers"}:
        raise SchemaViolation("packet must have exactly keys seq, t, palm, fingers")
    seq = _require_uint(obj["seq"], "seq", MAX_SEQ)
    t_device = _require_uint(obj["t"], "t", MAX_T_DEVICE)
    palm = _parse_reading(obj["palm"], "palm")
    raw_fingers = obj["fingers"]
    if not isinstance(raw_fingers, list) or not 1 <= len(raw_fingers) <= MAX_FINGERS:
        raise SchemaViolation(f"fingers must be an array of 1..{MAX_FINGERS}")
    fingers = tuple(_parse_reading(f, f"fingers[{i}]") for i, f in enumerate(raw_fingers))
    return GlovePacket(seq=seq, t_device=t_device, palm=palm, fingers=fingers, t_host=t_host)


def parse_packet(datagram: bytes, t_host: Optional[int] = None) -> GlovePacket:
    """Decode one data datagram; raises a ``ParseError`` subclass on any
    malformed input, never anything else."""
    return packet_from_obj(_load_json(datagram), t_host)


def header_from_obj(obj: dict, t_host: Optional[int] = None) -> SessionHeader:
    if set(obj.keys()) != {"hdr", "fingers", "rate_hz"}:
        raise SchemaViolation("header must have exactly keys hdr, fingers, rate_hz")
    if obj["hdr"] != 1:
        raise SchemaViolation("unsupported header version")
    fingers = _require_uint(obj["fingers"], "fingers", MAX_FINGERS + 1)
    if fingers < 1:
        raise SchemaViolation("fingers must be >= 1")
    rate = _require_number(obj["rate_hz"], "rate_hz")
    if rate <= 0:
        raise SchemaViolation("rate_hz must be > 0")
    return SessionHeader(fingers=fingers, rate_hz=rate, t_host=t_host)


def parse_header(datagram: bytes, t_host: Optional[int] = None) -> SessionHeader:
    return header_from_obj(_load_json(datagram), t_host)


def parse_message(
    datagram: bytes, t_host: Optional[int] = None
) -> Union[GlovePacket, SessionHeader]:
    """Dispatch a glove-port datagram to the header or data decoder."""
    obj = _load_json(datagram)
    if "hdr" in obj:
        return parse_header(datagram, t_host)
    return parse_packet(datagram, t_host)


def _reading_obj(r: ImuReading) -> dict:
    return {"g": list(r.gyro), "a": list(r.accel)}


def packet_obj(p: GlovePacket) -> dict:
    return {
        "seq": p.seq,
        "t": p.t_device,
        "palm": _reading_obj(p.palm),
        "fingers": [_reading_obj(f) for f in p.fingers],
    }


def dumps_canonical(obj) -> str:
    """The one JSON formatting used everywhere: compact, insertion-ordered,
    shortest round-trip floats.  Byte-stable so replays compare equal."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def serialize_packet(p: GlovePacket) -> bytes:
    return dumps_canonical(packet_obj(p)).encode("utf-8")


def serialize_header(h: SessionHeader) -> bytes:
    rate = h.rate_hz
    rate_out = int(rate) if float(rate).is_integer() else rate
    return dumps_canonical({"hdr": 1, "fingers": h.fingers, "rate_hz": rate_out}).encode("utf-8")


class Disposition(Enum):
    ACCEPT = "accept"
    DISCARD = "discard"


@dataclass
class IngestReport:
    received: int = 0        # datagrams that parsed OK
    dropped: int = 0         # inferred from seq gaps
    reordered: int = 0       # seq regressions, discarded
    malformed: int = 0       # datagrams that failed to parse
    time_regressed: int = 0  # t_device regressions with increasing seq, discarded
    overflowed: int = 0      # accepted packets shed by a full downstream buffer


class Ingestor:
    """Single-writer sequence tracking for the lossy, unordered transport.

    Accepts a packet iff its seq advances past the last accepted one and
    the finger count matches the session header; everything else is
    discarded with the reason counted.
    """

    def __init__(self, expected_fingers: int):
        self.expected_fingers = expected_fingers
        self.last_seq: Optional[int] = None
        self.last_t: Optional[int] = None
        self.report = IngestReport()

    def note_malformed(self) -> None:
        self.report.malformed += 1

    def note_header(self) -> None:
        # session headers are valid traffic; count them so
        # received + malformed always equals datagrams seen
        self.report.received += 1

    def step(self, p: GlovePacket) -> Disposition:
        self.report.received += 1
        if len(p.fingers) != self.expected_fingers:
            raise FingerCountMismatch(
                f"packet has {len(p.fingers)} fingers, session declares {self.expected_fingers}"
            )
        if self.last_seq is not None and p.seq <= self.last_seq:
            self.report.reordered += 1
            return Disposition.DISCARD
        if self.last_t is not None and p.t_device <= self.last_t:
            self.report.time_regressed += 1
            return Disposition.DISCARD
        gap = p.seq - (self.last_seq + 1 if self.last_seq is not None else 0)
        if gap > 0:
            self.report.dropped += gap
        self.last_seq = p.seq
        self.last_t = p.t_device
        return Disposition.ACCEPT
