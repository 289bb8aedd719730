"""Black-start stage machine: Dead -> WindFarmPowerIsland ->
BlackStartPowerIsland -> PowerIslandReSync, strictly forward."""

import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

DEAD = "Dead"
WIND_FARM_ISLAND = "WindFarmPowerIsland"
BLACK_START_ISLAND = "BlackStartPowerIsland"
RESYNC = "PowerIslandReSync"

_ORDER = (DEAD, WIND_FARM_ISLAND, BLACK_START_ISLAND, RESYNC)


@dataclass
class StageObservations:
    bess_voltage_nonzero: bool = False
    block_load_energised: bool = False
    tie_breaker_closed: bool = False


@dataclass
class StageMachine:
    stage: str = DEAD
    log: list = field(default_factory=list)  # (time_s, stage)

    def rank(self) -> int:
        return _ORDER.index(self.stage)


def advance_stage(machine: StageMachine, time_s: float,
                  obs: StageObservations) -> StageMachine:
    """Apply forward transitions implied by the observations; idempotent when
    nothing changed. Observed regressions are logged, never rolled back."""
    want = DEAD
    if obs.bess_voltage_nonzero:
        want = WIND_FARM_ISLAND
    if obs.block_load_energised:
        want = BLACK_START_ISLAND
    if obs.tie_breaker_closed:
        want = RESYNC
    want_rank = _ORDER.index(want)
    have_rank = machine.rank()
    if want_rank < have_rank:
        log.warning(
            "stage regression observed at t=%gs (%s while in %s); ignored",
            time_s, want, machine.stage,
        )
        return machine
    for r in range(have_rank + 1, want_rank + 1):
        machine.stage = _ORDER[r]
        machine.log.append((time_s, machine.stage))
    return machine
