"""Fixed-step three-phase instantaneous-value circuit solver."""

from .assemble import (
    CompiledSystem,
    NetworkState,
    apply_switch_event,
    assemble_system,
    solve_step,
)
from .elements import (
    GROUND,
    Breaker,
    Capacitor,
    ControlledCurrentSource,
    ControlledVoltageSource,
    Inductor,
    Node,
    PiSection,
    Resistor,
    RlLoad,
    SaturationCurve,
    ShuntReactor,
    TwoWindingTransformer,
    default_saturation_curve,
    magnetizing_current,
)
from .engine import (
    BessPlacement,
    ConverterSet,
    ExtSourcePlacement,
    Monitors,
    RunResult,
    SyncSpec,
    WtPlacement,
    run_transient,
)
from .network import Network
from .stamps import BranchState, CompanionStamp, stamp_element
from .timeseries import TimeSeries

__all__ = [
    "GROUND",
    "BessPlacement",
    "BranchState",
    "Breaker",
    "Capacitor",
    "CompanionStamp",
    "CompiledSystem",
    "ConverterSet",
    "ControlledCurrentSource",
    "ControlledVoltageSource",
    "ExtSourcePlacement",
    "Inductor",
    "Monitors",
    "Network",
    "NetworkState",
    "Node",
    "PiSection",
    "Resistor",
    "RlLoad",
    "RunResult",
    "SaturationCurve",
    "ShuntReactor",
    "SyncSpec",
    "TimeSeries",
    "TwoWindingTransformer",
    "WtPlacement",
    "apply_switch_event",
    "assemble_system",
    "default_saturation_curve",
    "magnetizing_current",
    "run_transient",
    "solve_step",
    "stamp_element",
]
