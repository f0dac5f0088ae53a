"""Speed-threshold warning monitor.

A two-level Schmitt trigger over the telemetry speed: level 1 and level 2
turn on when speed crosses their thresholds and off only after speed falls
back below threshold minus the hysteresis margin, so an oscillating speed
near a threshold produces no event chatter.  Events stand in for the
glove's vibration motors; the actuator wire message is

    {"vib":{"level":1,"on":true}}
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .protocol import dumps_canonical

SPEED_THRESHOLDS = (0.7, 0.9)  # m/s, scaled to v_max = 1.0
HYSTERESIS = 0.1               # m/s


class BadThresholds(ValueError):
    pass


@dataclass(frozen=True)
class HapticEvent:
    level: int            # 1-based warning level
    on: bool              # True = WarnOn, False = WarnOff
    speed_at_trigger: float
    t_sim: float

    def wire_obj(self) -> dict:
        return {"vib": {"level": self.level, "on": self.on}}

    def log_obj(self) -> dict:
        return {"vib": {"level": self.level, "on": self.on},
                "speed": self.speed_at_trigger, "t": self.t_sim}


def serialize_haptic(ev: HapticEvent) -> bytes:
    return dumps_canonical(ev.wire_obj()).encode("utf-8")


class SpeedMonitor:
    """Stateful threshold watcher; feed it every telemetry packet."""

    def __init__(
        self,
        thresholds: Sequence[float] = SPEED_THRESHOLDS,
        hysteresis: float = HYSTERESIS,
    ):
        thresholds = tuple(float(t) for t in thresholds)
        if not thresholds or any(t <= 0 for t in thresholds):
            raise BadThresholds("thresholds must be positive")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise BadThresholds("thresholds must be strictly increasing")
        if hysteresis <= 0 or thresholds[0] - hysteresis <= 0:
            raise BadThresholds("need 0 < hysteresis < lowest threshold")
        self.thresholds = thresholds
        self.hysteresis = hysteresis
        self.active = [False] * len(thresholds)

    @property
    def active_levels(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i, a in enumerate(self.active) if a)

    def step(self, speed: float, t_sim: float) -> List[HapticEvent]:
        events: List[HapticEvent] = []
        # rising crossings in ascending level order
        for i, thr in enumerate(self.thresholds):
            if not self.active[i] and speed > thr:
                self.active[i] = True
                events.append(HapticEvent(i + 1, True, speed, t_sim))
        # falling crossings in descending order so levels un-nest cleanly
        for i in reversed(range(len(self.thresholds))):
            if self.active[i] and speed < self.thresholds[i] - self.hysteresis:
                self.active[i] = False
                events.append(HapticEvent(i + 1, False, speed, t_sim))
        return events
