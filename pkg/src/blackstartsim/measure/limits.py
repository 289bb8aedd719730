"""Limit-band monitoring: voltage/frequency envelopes and converter current
caps over a completed run, with maximal violation intervals and stage
attribution."""

from dataclasses import dataclass, field

import numpy as np

from ..circuit.timeseries import TimeSeries
from .waveforms import MeasureError, sliding_rms

F0 = 50.0


@dataclass
class LimitEnvelope:
    v_low_pu: float = 0.9
    v_high_pu: float = 1.1
    f_low_hz: float = 47.0
    f_high_hz: float = 52.0
    converter_i_cap_pu: float = 1.0

    def __post_init__(self):
        if self.v_low_pu >= self.v_high_pu or self.f_low_hz >= self.f_high_hz:
            raise MeasureError("envelope lower bound must be below upper bound")


@dataclass
class Violation:
    signal: str
    start_s: float
    end_s: float
    worst: float
    limit: float
    stage: str

    def as_line(self):
        return (
            f"{self.signal}: [{self.start_s:.4f}, {self.end_s:.4f}] s, "
            f"worst {self.worst:.4f} vs limit {self.limit:.4f} ({self.stage})"
        )


@dataclass
class ViolationReport:
    violations: list = field(default_factory=list)

    def __len__(self):
        return len(self.violations)

    @property
    def clean(self):
        return not self.violations


def _stage_at(stage_log, t):
    stage = "Dead"
    for ts, name in stage_log or []:
        if ts <= t:
            stage = name
        else:
            break
    return stage


def _intervals(mask, time, values, limit, signal, stage_log, min_len_s):
    """Maximal True runs of ``mask`` as violations, dropping runs shorter than
    ``min_len_s`` (sub-cycle switching spikes are expected and ignored)."""
    out = []
    n = len(mask)
    i = 0
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and mask[j + 1]:
            j += 1
        t0, t1 = time[i], time[j]
        if t1 - t0 >= min_len_s:
            seg = values[i : j + 1]
            worst_idx = np.argmax(np.abs(seg - limit))
            out.append(
                Violation(signal, float(t0), float(t1), float(seg[worst_idx]),
                          float(limit), _stage_at(stage_log, t0))
            )
        i = j + 1
    return out


def check_limits(ts: TimeSeries, envelope: LimitEnvelope, stage_log=None,
                 voltage_rms_channels=("bess_v_rms",),
                 voltage_waveform_bases=None,
                 frequency_channels=("bess_f",),
                 converter_current_channels=("bess_i",),
                 settle_s=0.02) -> ViolationReport:
    """Scan the run for sustained band violations.

    ``voltage_waveform_bases`` maps a 3-phase channel stem (e.g. ``v_bus66``,
    channels in kV) to its nominal line-to-line kV; a one-cycle sliding RMS in
    pu is derived before checking. Excursions shorter than one fundamental
    cycle are ignored. ``settle_s`` skips the initial dead-start samples.
    """
    time = ts.time
    if len(time) < 2:
        raise MeasureError("time series too short")
    dt = time[1] - time[0]
    cycle = 1.0 / F0
    # the RMS channels are already one-cycle smoothed, so a half-cycle dwell
    # suffices to reject switching-instant spikes without masking real events
    min_len = 0.5 * cycle
    window = max(1, round(cycle / dt))
    live = time >= settle_s
    report = ViolationReport()
    # undervoltage on a bus that has not been energised is not a violation
    # (dead-bus blocking, as protection practice would)
    dead_level = 0.5 * envelope.v_low_pu

    def scan_voltage(name, series):
        v = np.asarray(series)
        in_service = v >= dead_level
        report.violations.extend(
            _intervals((v > envelope.v_high_pu) & live, time, v,
                       envelope.v_high_pu, name, stage_log, min_len)
        )
        report.violations.extend(
            _intervals((v < envelope.v_low_pu) & in_service & live, time, v,
                       envelope.v_low_pu, name, stage_log, min_len)
        )

    def scan(name, series, low, high):
        v = np.asarray(series)
        report.violations.extend(
            _intervals((v > high) & live, time, v, high, name, stage_log, min_len)
        )
        report.violations.extend(
            _intervals((v < low) & live, time, v, low, name, stage_log, min_len)
        )

    for name in voltage_rms_channels:
        if name not in ts:
            raise MeasureError(f"missing channel {name!r}")
        scan_voltage(name, ts.channel(name))

    for stem, kv in (voltage_waveform_bases or {}).items():
        phases = ts.phases(stem) * 1e3  # channels are kV
        base_rms = kv * 1e3 / np.sqrt(3.0)
        rms = np.sqrt(
            sum(sliding_rms(phases[:, ph], window) ** 2 for ph in range(3)) / 3.0
        ) / base_rms
        scan_voltage(stem + "_rms", rms)

    for name in frequency_channels:
        if name not in ts:
            raise MeasureError(f"missing channel {name!r}")
        scan(name, ts.channel(name), envelope.f_low_hz, envelope.f_high_hz)

    for name in converter_current_channels:
        if name not in ts:
            continue
        v = ts.channel(name)
        report.violations.extend(
            _intervals((v > envelope.converter_i_cap_pu) & live, time, v,
                       envelope.converter_i_cap_pu, name, stage_log, min_len)
        )

    report.violations.sort(key=lambda v: v.start_s)
    return report
