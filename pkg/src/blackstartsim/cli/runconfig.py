"""Run configuration: scenario selection, stepping, outputs and toggles."""

from dataclasses import dataclass, field

from ..errors import ScenarioError
from ..measure.limits import LimitEnvelope

BUILTIN_SCENARIOS = ("default-blackstart", "hard-switch")


@dataclass
class RunConfig:
    scenario: str = "default-blackstart"   # path or built-in name
    dt_s: float = 50e-6
    duration_s: float | None = None        # None -> schedule duration
    out_dir: str = "out"
    decimation: int = 20
    saturation: bool = True
    current_limiter: bool = False
    resync: bool = False
    envelope: LimitEnvelope = field(default_factory=LimitEnvelope)
    backend: str | None = None

    def validate(self, last_event_s: float = 0.0):
        if self.dt_s <= 0:
            raise ScenarioError(f"dt must be > 0 (got {self.dt_s})")
        if self.decimation < 1:
            raise ScenarioError(f"decimation must be >= 1 (got {self.decimation})")
        if self.duration_s is not None and self.duration_s < last_event_s:
            raise ScenarioError(
                f"duration {self.duration_s} s is shorter than the last "
                f"scheduled event at {last_event_s} s"
            )
        return self
