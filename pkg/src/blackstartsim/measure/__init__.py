"""Signal-processing and compliance layer."""

from .limits import LimitEnvelope, Violation, ViolationReport, check_limits
from .waveforms import (
    MeasureError,
    estimate_frequency,
    instantaneous_pq,
    rms_one_cycle,
    sliding_rms,
    thd,
)

__all__ = [
    "LimitEnvelope",
    "MeasureError",
    "Violation",
    "ViolationReport",
    "check_limits",
    "estimate_frequency",
    "instantaneous_pq",
    "rms_one_cycle",
    "sliding_rms",
    "thd",
]
