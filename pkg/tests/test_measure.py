"""Measurement identities: RMS, p/q, frequency estimation, THD and the
limit-band monitor."""

import math

import numpy as np
import pytest

from blackstartsim.circuit.timeseries import TimeSeries
from blackstartsim.measure import (
    LimitEnvelope,
    MeasureError,
    check_limits,
    estimate_frequency,
    instantaneous_pq,
    rms_one_cycle,
    thd,
)

F0 = 50.0
FS = 20000.0  # 400 samples per cycle
CYCLE = round(FS / F0)


def _sine(n, f=F0, amp=1.0, phase=0.0, fs=FS):
    t = np.arange(n) / fs
    return amp * np.sin(2 * np.pi * f * t + phase)


class TestRms:
    def test_pure_sine(self):
        assert rms_one_cycle(_sine(CYCLE)) == pytest.approx(1 / math.sqrt(2), abs=1e-4)

    def test_dc(self):
        assert rms_one_cycle(np.ones(CYCLE)) == pytest.approx(1.0)

    def test_fifth_harmonic_parseval(self):
        x = _sine(CYCLE) + 0.1 * _sine(CYCLE, f=250.0)
        assert rms_one_cycle(x) == pytest.approx(math.sqrt(0.5 + 0.005), abs=1e-4)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=CYCLE)
        for k in (0.1, 2.0, 37.5):
            assert rms_one_cycle(k * x) == pytest.approx(k * rms_one_cycle(x), rel=1e-12)

    def test_short_window_rejected(self):
        with pytest.raises(MeasureError):
            rms_one_cycle(np.ones(100), samples_per_cycle=400)


def _balanced_series(n, amp=1.0, phase=0.0, fs=FS):
    t = np.arange(n) / fs
    th = 2 * np.pi * F0 * t
    return np.column_stack([
        amp * np.cos(th + phase),
        amp * np.cos(th + phase - 2 * np.pi / 3),
        amp * np.cos(th + phase + 2 * np.pi / 3),
    ])


class TestInstantaneousPq:
    def test_in_phase_current(self):
        v = _balanced_series(2 * CYCLE)
        i = _balanced_series(2 * CYCLE)
        p, q = instantaneous_pq(v, i, avg_window=CYCLE)
        assert p[-1] == pytest.approx(1.5, rel=1e-9)   # 3 * (1/sqrt2)^2
        assert q[-1] == pytest.approx(0.0, abs=1e-9)

    def test_lagging_quarter(self):
        v = _balanced_series(2 * CYCLE)
        i = _balanced_series(2 * CYCLE, phase=-np.pi / 2)
        p, q = instantaneous_pq(v, i, avg_window=CYCLE)
        assert p[-1] == pytest.approx(0.0, abs=1e-9)
        assert q[-1] == pytest.approx(1.5, rel=1e-9)

    @pytest.mark.parametrize("phi_deg", [-60, -30, 10, 45, 80])
    def test_phasor_oracle(self, phi_deg):
        phi = math.radians(phi_deg)
        v = _balanced_series(4 * CYCLE)
        i = _balanced_series(4 * CYCLE, amp=0.7, phase=-phi)
        p, q = instantaneous_pq(v, i, avg_window=CYCLE)
        s = 3 * (1 / math.sqrt(2)) * (0.7 / math.sqrt(2))
        assert p[-1] == pytest.approx(s * math.cos(phi), rel=1e-3)
        assert q[-1] == pytest.approx(s * math.sin(phi), rel=1e-3)

    def test_apparent_power_dominates(self):
        rng = np.random.default_rng(11)
        v = _balanced_series(4 * CYCLE)
        i = _balanced_series(4 * CYCLE, amp=0.5, phase=0.4)
        i += 0.01 * rng.normal(size=i.shape)
        p, q = instantaneous_pq(v, i, avg_window=CYCLE)
        v_rms = math.sqrt(np.mean(v[:, 0] ** 2))
        i_rms = math.sqrt(np.mean(i ** 2) * 3 / 3)
        s = 3 * v_rms * math.sqrt(np.mean(i[:, 0] ** 2))
        assert s ** 2 >= p[-1] ** 2 + q[-1] ** 2 - 1e-9 * s ** 2


class TestFrequency:
    def test_exact_50(self):
        f = estimate_frequency(_sine(10 * CYCLE), 1 / FS)
        assert f == pytest.approx(50.000, abs=0.001)

    def test_50_006(self):
        f = estimate_frequency(_sine(40 * CYCLE, f=50.006), 1 / FS)
        assert f == pytest.approx(50.006, abs=0.002)

    def test_47(self):
        f = estimate_frequency(_sine(10 * CYCLE, f=47.0), 1 / FS)
        assert f == pytest.approx(47.000, abs=0.002)

    def test_too_short_rejected(self):
        with pytest.raises(MeasureError):
            estimate_frequency(_sine(CYCLE // 2), 1 / FS)

    def test_no_crossings_rejected(self):
        with pytest.raises(MeasureError):
            estimate_frequency(np.linspace(0.0, 0.1, 4 * CYCLE), 1 / FS)


class TestThd:
    def test_pure_sine(self):
        assert thd(_sine(4 * CYCLE), 1 / FS) == pytest.approx(0.0, abs=1e-9)

    def test_ten_percent_fifth(self):
        x = _sine(4 * CYCLE) + 0.1 * _sine(4 * CYCLE, f=250.0)
        assert thd(x, 1 / FS) == pytest.approx(0.100, abs=0.001)

    def test_quadrature_sum(self):
        x = (_sine(4 * CYCLE) + 0.05 * _sine(4 * CYCLE, f=150.0)
             + 0.05 * _sine(4 * CYCLE, f=350.0))
        assert thd(x, 1 / FS) == pytest.approx(math.hypot(0.05, 0.05), abs=0.001)

    def test_amplitude_and_phase_invariance(self):
        base = None
        for amp, ph in ((1.0, 0.0), (3.7, 0.0), (1.0, 1.1), (0.2, 2.9)):
            x = amp * (_sine(4 * CYCLE, phase=ph)
                       + 0.08 * _sine(4 * CYCLE, f=250.0, phase=3 * ph))
            val = thd(x, 1 / FS)
            if base is None:
                base = val
            assert val == pytest.approx(base, abs=1e-6)

    def test_non_integer_window_rejected(self):
        with pytest.raises(MeasureError):
            thd(_sine(4 * CYCLE + 13), 1 / FS)


def _flat_ts(n=3000, dt=1e-3, v=1.0, f=50.0, i=0.5):
    t = np.arange(n) * dt
    data = np.column_stack([t, np.full(n, v), np.full(n, f), np.full(n, i)])
    return TimeSeries(["time", "bess_v_rms", "bess_f", "bess_i"],
                      ["s", "pu", "Hz", "pu"], data)


class TestCheckLimits:
    def test_clean_run_empty_report(self):
        report = check_limits(_flat_ts(), LimitEnvelope())
        assert report.clean

    def test_voltage_excursion_flagged(self):
        ts = _flat_ts()
        m = (ts.time >= 1.0) & (ts.time < 1.1)
        ts.data[m, 1] = 1.11
        report = check_limits(ts, LimitEnvelope())
        assert len(report) == 1
        v = report.violations[0]
        assert v.signal == "bess_v_rms"
        assert v.worst == pytest.approx(1.11)
        assert v.limit == 1.1

    def test_subcycle_spike_ignored(self):
        ts = _flat_ts()
        k = np.argmin(np.abs(ts.time - 1.0))
        ts.data[k:k + 5, 1] = 1.3  # 5 ms, below the half-cycle dwell
        assert check_limits(ts, LimitEnvelope()).clean

    def test_dead_bus_not_an_undervoltage(self):
        ts = _flat_ts()
        ts.data[: len(ts.data) // 2, 1] = 0.0
        assert check_limits(ts, LimitEnvelope()).clean

    def test_frequency_and_current_bands(self):
        ts = _flat_ts()
        m = (ts.time >= 0.5) & (ts.time < 0.7)
        ts.data[m, 2] = 46.0
        ts.data[m, 3] = 1.4
        report = check_limits(ts, LimitEnvelope())
        assert {v.signal for v in report.violations} == {"bess_f", "bess_i"}

    def test_monotone_in_envelope(self):
        """Widening any band never adds violations."""
        ts = _flat_ts()
        m = (ts.time >= 1.0) & (ts.time < 1.2)
        ts.data[m, 1] = 1.15
        ts.data[m, 2] = 52.5
        base = len(check_limits(ts, LimitEnvelope()))
        for env in (
            LimitEnvelope(v_high_pu=1.2),
            LimitEnvelope(f_high_hz=53.0),
            LimitEnvelope(v_low_pu=0.85),
            LimitEnvelope(f_low_hz=45.0),
            LimitEnvelope(converter_i_cap_pu=2.0),
        ):
            assert len(check_limits(ts, env)) <= base

    def test_stage_attribution(self):
        ts = _flat_ts()
        m = ts.time >= 2.0
        ts.data[m, 1] = 1.2
        report = check_limits(ts, LimitEnvelope(),
                              stage_log=[(0.0, "WindFarmPowerIsland"),
                                         (1.5, "BlackStartPowerIsland")])
        assert report.violations[0].stage == "BlackStartPowerIsland"

    def test_missing_channel_rejected(self):
        ts = _flat_ts()
        with pytest.raises(MeasureError):
            check_limits(ts, LimitEnvelope(), frequency_channels=("nope",))
