"""Timed switching/enable actions driving a run."""

import math
from dataclasses import dataclass, field

from ..errors import ScenarioError

# action names
SOFT_CHARGE_START = "soft_charge_start"
SOFT_CHARGE_END = "soft_charge_end"
ENABLE_WT = "enable_wt"
CLOSE_BREAKER = "close_breaker"
ENERGISE_BLOCK_LOAD = "energise_block_load"
SET_BESS_P_REF = "set_bess_p_ref"
SYNCHROCHECK_ARM = "synchrocheck_arm"

ACTIONS = (
    SOFT_CHARGE_START,
    SOFT_CHARGE_END,
    ENABLE_WT,
    CLOSE_BREAKER,
    ENERGISE_BLOCK_LOAD,
    SET_BESS_P_REF,
    SYNCHROCHECK_ARM,
)


@dataclass
class Event:
    time_s: float
    action: str
    target: str = ""
    value_mw: float = math.nan

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ScenarioError(f"unknown action {self.action!r}")
        if self.time_s < 0:
            raise ScenarioError(f"event time must be >= 0 (got {self.time_s})")


@dataclass
class EventSchedule:
    events: list = field(default_factory=list)
    initial_breakers: dict = field(default_factory=dict)  # overrides of case defaults
    duration_s: float = 25.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        times = [e.time_s for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ScenarioError("event times must be non-decreasing")
        seen_wt = set()
        for e in self.events:
            if e.action == ENABLE_WT:
                if e.target in seen_wt:
                    raise ScenarioError(f"WT {e.target!r} enabled more than once")
                seen_wt.add(e.target)
        if self.duration_s < max(times, default=0.0):
            raise ScenarioError("duration shorter than the last event")

    def shifted(self, offset_s: float) -> "EventSchedule":
        """Copy with every event time moved by ``offset_s``."""
        return EventSchedule(
            events=[
                Event(e.time_s + offset_s, e.action, e.target, e.value_mw)
                for e in self.events
            ],
            initial_breakers=dict(self.initial_breakers),
            duration_s=self.duration_s + offset_s,
        )

    def soft_charge_window(self):
        """(t_start, t_end) of the ramp, or None when absent."""
        t0 = t1 = None
        for e in self.events:
            if e.action == SOFT_CHARGE_START:
                t0 = e.time_s
            elif e.action == SOFT_CHARGE_END:
                t1 = e.time_s
        if t0 is None and t1 is None:
            return None
        if t0 is None or t1 is None or t1 <= t0:
            raise ScenarioError("soft-charge start/end pair is incomplete or inverted")
        return (t0, t1)


def default_schedule(duration_s: float = 25.0) -> EventSchedule:
    """Soft charge, six WT energisations at 3 s intervals, 20 MW block load."""
    ev = [
        Event(0.0, SOFT_CHARGE_START),
        Event(0.5, SOFT_CHARGE_END),
        Event(1.0, ENABLE_WT, "wt1"),
        Event(4.0, ENABLE_WT, "wt2"),
        Event(7.0, ENABLE_WT, "wt3"),
        Event(10.0, ENABLE_WT, "wt4"),
        Event(10.0, ENABLE_WT, "wt5"),
        Event(16.0, ENABLE_WT, "wt6"),
        Event(19.0, ENERGISE_BLOCK_LOAD, "brk_load", 20.0),
    ]
    return EventSchedule(events=ev, duration_s=duration_s)


def hard_switch_schedule(duration_s: float = 4.0) -> EventSchedule:
    """Battery at full voltage on its own bus; the main breaker closes into the
    discharged cable/reactor system at 1 s with no ramp. WTs stay disabled."""
    return EventSchedule(
        events=[Event(1.0, CLOSE_BREAKER, "brk_main")],
        initial_breakers={"brk_main": False},
        duration_s=duration_s,
    )
