"""Reference case, energisation schedules, stage machine and synchrocheck."""

from .case import CaseDefinition, WtUnit, build_default_case
from .runner import ScenarioResult, apply_toggles, compile_run, default_monitors, run_case
from .schedule import Event, EventSchedule, default_schedule, hard_switch_schedule
from .stages import (
    BLACK_START_ISLAND,
    DEAD,
    RESYNC,
    WIND_FARM_ISLAND,
    StageMachine,
    StageObservations,
    advance_stage,
)
from .synchrocheck import SynchrocheckSettings, synchrocheck_evaluate

__all__ = [
    "BLACK_START_ISLAND",
    "CaseDefinition",
    "DEAD",
    "Event",
    "EventSchedule",
    "RESYNC",
    "ScenarioResult",
    "StageMachine",
    "StageObservations",
    "SynchrocheckSettings",
    "WIND_FARM_ISLAND",
    "WtUnit",
    "advance_stage",
    "apply_toggles",
    "build_default_case",
    "compile_run",
    "default_monitors",
    "default_schedule",
    "hard_switch_schedule",
    "run_case",
    "synchrocheck_evaluate",
]
