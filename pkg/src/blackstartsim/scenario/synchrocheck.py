"""Synchrocheck: permit breaker closure only when frequency, voltage and angle
across the breaker match continuously for the dwell time."""

from dataclasses import dataclass

from ..errors import ScenarioError


@dataclass
class SynchrocheckSettings:
    max_df_hz: float = 0.1
    max_dv_pu: float = 0.05
    max_dtheta_deg: float = 10.0
    dwell_s: float = 0.2

    def __post_init__(self):
        for f in ("max_df_hz", "max_dv_pu", "max_dtheta_deg", "dwell_s"):
            if getattr(self, f) <= 0:
                raise ScenarioError(f"synchrocheck {f} must be > 0")


def in_band(island_meas, grid_meas, settings: SynchrocheckSettings) -> bool:
    """True when the (f_hz, v_pu, theta_deg) pair is inside every threshold."""
    fi, vi, thi = island_meas
    fg, vg, thg = grid_meas
    dth = (thi - thg + 180.0) % 360.0 - 180.0
    return (
        abs(fi - fg) <= settings.max_df_hz
        and abs(vi - vg) <= settings.max_dv_pu
        and abs(dth) <= settings.max_dtheta_deg
    )


def synchrocheck_evaluate(island_meas, grid_meas, settings: SynchrocheckSettings,
                          elapsed_in_band_s: float) -> bool:
    """Permit closure iff the measurements are in band now and have been for at
    least the dwell time."""
    return in_band(island_meas, grid_meas, settings) and (
        elapsed_in_band_s >= settings.dwell_s
    )
