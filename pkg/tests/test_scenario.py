"""Case builder contents, schedules, stage machine and synchrocheck logic."""

import math

import pytest

from blackstartsim.circuit.elements import Breaker, ShuntReactor, TwoWindingTransformer
from blackstartsim.errors import ScenarioError
from blackstartsim.scenario import (
    BLACK_START_ISLAND,
    DEAD,
    RESYNC,
    WIND_FARM_ISLAND,
    StageMachine,
    StageObservations,
    SynchrocheckSettings,
    advance_stage,
    build_default_case,
    default_schedule,
    hard_switch_schedule,
    synchrocheck_evaluate,
)
from blackstartsim.scenario.schedule import (
    CLOSE_BREAKER,
    ENABLE_WT,
    ENERGISE_BLOCK_LOAD,
    SOFT_CHARGE_END,
    SOFT_CHARGE_START,
    Event,
    EventSchedule,
)


class TestDefaultCase:
    def test_battery_ratings(self):
        case = build_default_case()
        b = case.bess_params
        assert (b.s_rated_mva, b.p_rated_mw, b.q_rated_mvar) == (112.0, 50.0, 100.0)
        assert b.v_rated_kv == 33.0

    def test_wt_count_and_rating(self):
        case = build_default_case()
        assert len(case.wts) == 6
        assert case.wt_params.p_rated_mw == 12.0
        case4 = build_default_case(n_wt=4)
        assert len(case4.wts) == 4

    def test_total_reactor_compensation(self):
        case = build_default_case()
        total = sum(e.q_rated_mvar for e in case.elements
                    if isinstance(e, ShuntReactor))
        assert total == pytest.approx(320.0)

    def test_saturable_grid_transformers(self):
        case = build_default_case()
        tx = {e.name: e for e in case.elements
              if isinstance(e, TwoWindingTransformer)}
        assert tx["tx_grid"].core is not None
        assert tx["tx_owf"].core is not None
        assert tx["tx_bess"].core is None
        for w in case.wts:
            assert tx[f"tx_{w.name}"].core is None

    def test_deterministic_and_self_consistent(self):
        c1 = build_default_case()
        c2 = build_default_case()
        assert c1 == c2
        network = c1.build_network()
        breakers = set(network.breakers())
        for e in default_schedule().events:
            if e.action == ENABLE_WT:
                assert c1.wt(e.target).breaker in breakers
            if e.action in (CLOSE_BREAKER, ENERGISE_BLOCK_LOAD):
                target = e.target or c1.block_load_breaker
                assert target in breakers

    def test_network_assembles(self):
        from blackstartsim.circuit import assemble_system

        case = build_default_case(with_external_grid=True)
        system = assemble_system(case.build_network(), 50e-6)
        assert system.dimension == 3 * len(case.nodes)


class TestSchedules:
    def test_default_rows(self):
        sched = default_schedule()
        after_ramp = [e for e in sched.events
                      if e.action not in (SOFT_CHARGE_START, SOFT_CHARGE_END)]
        assert len(after_ramp) == 7
        wt6 = next(e for e in sched.events if e.target == "wt6")
        assert wt6.time_s == 16.0
        block = next(e for e in sched.events if e.action == ENERGISE_BLOCK_LOAD)
        assert block.time_s == 19.0
        assert block.value_mw == 20.0
        assert sched.duration_s == 25.0
        assert sched.soft_charge_window() == (0.0, 0.5)

    def test_hard_switch_rows(self):
        sched = hard_switch_schedule()
        assert sched.soft_charge_window() is None
        assert len(sched.events) == 1
        e = sched.events[0]
        assert (e.time_s, e.action, e.target) == (1.0, CLOSE_BREAKER, "brk_main")
        assert not any(ev.action == ENABLE_WT for ev in sched.events)
        assert sched.initial_breakers == {"brk_main": False}

    def test_shift_property(self):
        sched = default_schedule()
        shifted = sched.shifted(2.5)
        for a, b in zip(sched.events, shifted.events):
            assert b.time_s == pytest.approx(a.time_s + 2.5)
            assert (a.action, a.target) == (b.action, b.target)
        assert shifted.duration_s == pytest.approx(sched.duration_s + 2.5)

    def test_validation(self):
        with pytest.raises(ScenarioError):
            EventSchedule(events=[Event(2.0, ENABLE_WT, "wt1"),
                                  Event(1.0, ENABLE_WT, "wt2")])
        with pytest.raises(ScenarioError):
            EventSchedule(events=[Event(1.0, ENABLE_WT, "wt1"),
                                  Event(2.0, ENABLE_WT, "wt1")])
        with pytest.raises(ScenarioError):
            EventSchedule(events=[Event(30.0, ENABLE_WT, "wt1")], duration_s=25.0)
        with pytest.raises(ScenarioError):
            Event(1.0, "explode")


class TestStageMachine:
    def test_forward_sequence(self):
        m = StageMachine()
        assert m.stage == DEAD
        advance_stage(m, 0.0001, StageObservations(bess_voltage_nonzero=True))
        assert m.stage == WIND_FARM_ISLAND
        advance_stage(m, 19.0, StageObservations(True, block_load_energised=True))
        assert m.stage == BLACK_START_ISLAND
        advance_stage(m, 21.0, StageObservations(True, True, tie_breaker_closed=True))
        assert m.stage == RESYNC
        assert [s for _, s in m.log] == [WIND_FARM_ISLAND, BLACK_START_ISLAND, RESYNC]

    def test_idempotent(self):
        m = StageMachine()
        obs = StageObservations(bess_voltage_nonzero=True)
        advance_stage(m, 1.0, obs)
        advance_stage(m, 2.0, obs)
        assert len(m.log) == 1

    def test_skipping_straight_to_resync_logs_all(self):
        m = StageMachine()
        advance_stage(m, 5.0, StageObservations(True, True, True))
        assert [s for _, s in m.log] == [WIND_FARM_ISLAND, BLACK_START_ISLAND, RESYNC]

    def test_regression_logged_not_rolled_back(self, caplog):
        m = StageMachine()
        advance_stage(m, 19.0, StageObservations(True, True))
        with caplog.at_level("WARNING"):
            advance_stage(m, 20.0, StageObservations(True, False))
        assert m.stage == BLACK_START_ISLAND
        assert "regression" in caplog.text


class TestSynchrocheck:
    def test_matched_and_held_permits(self):
        s = SynchrocheckSettings()
        assert synchrocheck_evaluate((50.0, 1.0, 0.0), (50.0, 1.0, 0.0), s, 0.3)

    def test_angle_threshold_denies(self):
        s = SynchrocheckSettings(max_dtheta_deg=10.0)
        assert not synchrocheck_evaluate((50.0, 1.0, 30.0), (50.0, 1.0, 0.0), s, 1.0)

    def test_island_at_50_006_permits(self):
        s = SynchrocheckSettings(max_df_hz=0.1)
        assert synchrocheck_evaluate((50.006, 1.0, 2.0), (50.0, 1.0, 0.0), s, 0.25)

    def test_dwell_required(self):
        s = SynchrocheckSettings(dwell_s=0.2)
        assert not synchrocheck_evaluate((50.0, 1.0, 0.0), (50.0, 1.0, 0.0), s, 0.1)

    def test_angle_wraps(self):
        s = SynchrocheckSettings()
        assert synchrocheck_evaluate((50.0, 1.0, 359.0), (50.0, 1.0, 0.0), s, 1.0)

    def test_monotone_in_thresholds(self):
        """Tightening any threshold never converts a deny into a permit."""
        cases = [
            ((50.05, 1.02, 5.0), (50.0, 1.0, 0.0), 0.25),
            ((50.2, 1.0, 0.0), (50.0, 1.0, 0.0), 1.0),
            ((50.0, 1.2, 0.0), (50.0, 1.0, 0.0), 1.0),
            ((50.0, 1.0, 15.0), (50.0, 1.0, 0.0), 1.0),
        ]
        loose = SynchrocheckSettings(0.1, 0.05, 10.0, 0.2)
        for df, dv, dth, dwell in (
            (0.05, 0.05, 10.0, 0.2), (0.1, 0.02, 10.0, 0.2),
            (0.1, 0.05, 5.0, 0.2), (0.1, 0.05, 10.0, 0.5),
        ):
            tight = SynchrocheckSettings(df, dv, dth, dwell)
            for isl, grid, held in cases:
                if synchrocheck_evaluate(isl, grid, tight, held):
                    assert synchrocheck_evaluate(isl, grid, loose, held)

    def test_invalid_settings(self):
        with pytest.raises(ScenarioError):
            SynchrocheckSettings(max_df_hz=0.0)


def test_run_shift_property():
    """Shifting every event by +T shifts logged events and stage transitions
    by exactly +T (checked on a short soft-charge + block-load variant)."""
    from blackstartsim.scenario import run_case

    base = EventSchedule(events=[
        Event(0.1, SOFT_CHARGE_START),
        Event(0.3, SOFT_CHARGE_END),
        Event(0.4, ENERGISE_BLOCK_LOAD, "brk_load", 20.0),
    ], duration_s=0.6)
    r1 = run_case(build_default_case(n_wt=1), base, backend="numpy")
    r2 = run_case(build_default_case(n_wt=1), base.shifted(0.2), backend="numpy")
    t1 = [t for t, *_ in r1.run.events]
    t2 = [t for t, *_ in r2.run.events]
    assert t2 == pytest.approx([t + 0.2 for t in t1])
    s1 = [t for t, _ in r1.stages.log]
    s2 = [t for t, _ in r2.stages.log]
    assert len(s1) == 2
    assert s2 == pytest.approx([t + 0.2 for t in s1])
