"""Average-model converters: grid-forming battery and grid-following WTs."""

from .gfl import (
    GflWtParams,
    GflWtState,
    gfl_wt_step,
    wt_frequency_droop,
    wt_reactive_reference,
)
from .gfm import GfmBessParams, GfmBessState, gfm_controller_step, soft_charge_reference
from .park import inverse_park, park
from .pll import PllParams, PllState, pll_step

__all__ = [
    "GflWtParams",
    "GflWtState",
    "GfmBessParams",
    "GfmBessState",
    "PllParams",
    "PllState",
    "gfl_wt_step",
    "gfm_controller_step",
    "inverse_park",
    "park",
    "pll_step",
    "soft_charge_reference",
    "wt_frequency_droop",
    "wt_reactive_reference",
]
