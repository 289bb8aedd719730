"""Synchronous-reference-frame PLL: prefiltered v_q driven to zero by a PI."""

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K

W0_DEFAULT = 2.0 * math.pi * 50.0


@dataclass
class PllParams:
    k_p: float = 0.1            # pu frequency deviation per pu v_q
    t_i_s: float = 2.0          # parallel integral time constant
    prefilter_rad_s: float = 500.0
    w0: float = W0_DEFAULT
    w_min: float = 2.0 * math.pi * 40.0
    w_max: float = 2.0 * math.pi * 60.0

    @property
    def k_i(self) -> float:
        return 1.0 / self.t_i_s

    def prefilter_alpha(self, dt: float) -> float:
        return 1.0 - math.exp(-self.prefilter_rad_s * dt)


@dataclass
class PllState:
    theta: float = 0.0
    omega: float = W0_DEFAULT
    integrator: float = 0.0     # pu frequency deviation
    prefilter_state: float = 0.0

    def copy(self):
        return PllState(self.theta, self.omega, self.integrator, self.prefilter_state)


def pll_step(v_q_measured: float, state: PllState, dt: float,
             params: PllParams | None = None) -> PllState:
    """Advance the PLL one step on a per-unit q-axis voltage sample."""
    p = params or PllParams()
    theta, omega, integ, vqf = K._pll_step(
        float(v_q_measured), dt, state.theta, state.integrator,
        state.prefilter_state, p.prefilter_alpha(dt), p.k_p, p.k_i,
        p.w0, p.w_min, p.w_max,
    )
    return PllState(theta, omega, integ, vqf)
