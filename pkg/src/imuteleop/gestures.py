"""Discrete gesture recognition over classified finger poses.

Three channels come out of the glove: a grip command (all fingers close /
all open), a stepped altitude command (quick flex-and-release of the
designated altitude finger), and the continuous wrist attitude handled by
the command mapper.  Events are edge-triggered: one event per pose
transition, never per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

CLOSE_THRESHOLD = math.radians(-50.0)  # flexion is negative pitch
OPEN_THRESHOLD = math.radians(-30.0)
FLICK_MAX_S = 0.5
ALT_DOWN_ROLL = math.radians(-15.0)    # wrist rolled past this => step down
ALT_FINGER_INDEX = 1                   # needs >= 2 fingers, else disabled


class PoseLabel(Enum):
    OPEN = "open"
    CLOSED = "closed"
    INDETERMINATE = "indeterminate"


class GestureKind(Enum):
    GRIP_CLOSE = "grip_close"
    GRIP_OPEN = "grip_open"
    ALT_STEP_UP = "alt_step_up"
    ALT_STEP_DOWN = "alt_step_down"


@dataclass(frozen=True)
class GestureEvent:
    kind: GestureKind
    t_device: int  # microseconds

    def wire_obj(self) -> dict:
        return {"evt": self.kind.value, "t": self.t_device}


def classify_finger(
    pitch: float,
    prev: PoseLabel,
    close_threshold: float = CLOSE_THRESHOLD,
    open_threshold: float = OPEN_THRESHOLD,
) -> PoseLabel:
    """Hysteresis classifier: the band between the thresholds retains the
    previous label so boundary chatter never toggles the pose."""
    if pitch < close_threshold:
        return PoseLabel.CLOSED
    if pitch > open_threshold:
        return PoseLabel.OPEN
    return prev


class GestureEngine:
    """Edge-triggered gesture state machine.

    Grip events fire on transitions of the all-fingers conjunction, latched
    against the current grip intent so open/close strictly alternate.  The
    altitude step is a flex-and-release of finger ``ALT_FINGER_INDEX``
    completed within ``flick_max_s`` while every other finger stays open;
    wrist roll past ``alt_down_roll`` at release selects a downward step.
    While locked the engine tracks poses silently and latches nothing, so
    an unlock never emits retroactive events.
    """

    def __init__(
        self,
        finger_count: int,
        flick_max_s: float = FLICK_MAX_S,
        alt_down_roll: float = ALT_DOWN_ROLL,
    ):
        if finger_count < 1:
            raise ValueError("need at least one finger")
        self.finger_count = finger_count
        self.flick_max_s = flick_max_s
        self.alt_down_roll = alt_down_roll
        self.alt_index: Optional[int] = ALT_FINGER_INDEX if finger_count >= 2 else None
        self.labels = [PoseLabel.INDETERMINATE] * finger_count
        self.grip_closed = False
        self._flick_started_us: Optional[int] = None

    def step(
        self,
        t_device: int,
        labels: Sequence[PoseLabel],
        locked: bool,
        wrist_roll: float = 0.0,
    ) -> List[GestureEvent]:
        if len(labels) != self.finger_count:
            raise ValueError("label count does not match finger count")
        labels = list(labels)
        if locked:
            # resync silently: no events now, none retroactively at unlock
            self.labels = labels
            if all(l is PoseLabel.CLOSED for l in labels):
                self.grip_closed = True
            elif all(l is PoseLabel.OPEN for l in labels):
                self.grip_closed = False
            self._flick_started_us = None
            return []

        events: List[GestureEvent] = []
        prev = self.labels
        all_closed = all(l is PoseLabel.CLOSED for l in labels)
        all_open = all(l is PoseLabel.OPEN for l in labels)

        if all_closed and not self.grip_closed:
            self.grip_closed = True
            self._flick_started_us = None
            events.append(GestureEvent(GestureKind.GRIP_CLOSE, t_device))
        elif all_open and self.grip_closed:
            self.grip_closed = False
            events.append(GestureEvent(GestureKind.GRIP_OPEN, t_device))

        if self.alt_index is not None:
            i = self.alt_index
            others_open = all(
                labels[j] is PoseLabel.OPEN for j in range(self.finger_count) if j != i
            )
            if self._flick_started_us is not None and not others_open:
                self._flick_started_us = None  # another finger moved: not a flick
            if (
                prev[i] is PoseLabel.OPEN
                and labels[i] is PoseLabel.CLOSED
                and others_open
            ):
                self._flick_started_us = t_device
            elif (
                prev[i] is PoseLabel.CLOSED
                and labels[i] is PoseLabel.OPEN
                and self._flick_started_us is not None
            ):
                held_s = (t_device - self._flick_started_us) * 1e-6
                self._flick_started_us = None
                if held_s <= self.flick_max_s:
                    kind = (
                        GestureKind.ALT_STEP_DOWN
                        if wrist_roll < self.alt_down_roll
                        else GestureKind.ALT_STEP_UP
                    )
                    events.append(GestureEvent(kind, t_device))

        self.labels = labels
        return events
