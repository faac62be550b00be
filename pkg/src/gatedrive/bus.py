"""In-process stand-in for the topic graph: latest-value topics with stamps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

# topic names mirror the original node graph
SCAN = "/scan"
SCAN_IMP = "/scan_imp"
EGO_ODOM = "/ego_racecar/odom"
OPP_ODOM = "/opp_racecar/odom"
PP_CMD = "/pure_pursuit_cmd"
GF_CMD = "/gap_follow_cmd"
DRIVE = "/drive"


@dataclass(frozen=True)
class BusMessage:
    topic: str
    stamp: float
    payload: Any


class StampOrderError(ValueError):
    pass


class MessageBus:
    def __init__(self):
        self._latest: dict[str, BusMessage] = {}
        self.counts: dict[str, int] = {}

    def publish(self, topic: str, stamp: float, payload: Any) -> BusMessage:
        prev = self._latest.get(topic)
        if prev is not None and stamp < prev.stamp:
            raise StampOrderError(f"{topic}: stamp {stamp} precedes {prev.stamp}")
        msg = BusMessage(topic, stamp, payload)
        self._latest[topic] = msg
        self.counts[topic] = self.counts.get(topic, 0) + 1
        return msg

    def latest(self, topic: str) -> BusMessage | None:
        return self._latest.get(topic)

    def payload(self, topic: str):
        msg = self._latest.get(topic)
        return None if msg is None else msg.payload

    def age(self, topic: str, now: float) -> float:
        """Seconds since the last message's stamp; infinite if never published."""
        msg = self._latest.get(topic)
        return math.inf if msg is None else now - msg.stamp


@dataclass
class SimClock:
    control_rate: float = 30.0
    physics_substeps: int = 4
    tick: int = 0

    def __post_init__(self):
        if self.control_rate <= 0 or self.physics_substeps < 1:
            raise ValueError("bad clock configuration")

    @property
    def period(self) -> float:
        return 1.0 / self.control_rate

    @property
    def sim_time(self) -> float:
        # integer tick keeps stamps exact multiples of the period
        return self.tick / self.control_rate

    @property
    def substep(self) -> float:
        return self.period / self.physics_substeps

    def advance(self) -> float:
        self.tick += 1
        return self.sim_time
