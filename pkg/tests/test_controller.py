from __future__ import annotations

import pytest

from ssfc.clock import LogicalClock
from ssfc.controller import (
    AttackReport,
    ControllerConfig,
    DuplicateRegistration,
    FunctionChainingController,
    ImplausibleStrength,
    InvalidToken,
    NotAPermutation,
    ReorderEvent,
)
from ssfc.evaluator import ChainOrder

DEFAULT = ChainOrder.of("dps", "fw", "idps")


def make_controller(clock=None, enforce=None, **overrides):
    config = ControllerConfig(default_order=DEFAULT, **overrides)
    return FunctionChainingController(config, clock=clock or LogicalClock(), enforce=enforce)


def register_all(controller, capacity=1000.0):
    tokens = {}
    for group in DEFAULT:
        fid = f"{group}-1"
        tokens[fid] = controller.register(fid, group, capacity)
    return tokens


def report(controller, fid, token, strength=100.0, attack_class="flood"):
    return controller.report_attack(
        AttackReport(fid, attack_class, strength, controller.clock.now(), token)
    )


def pump_reports(controller, tokens, fid, count, strength=100.0):
    for _ in range(count):
        report(controller, fid, tokens[fid], strength)


class TestRegistration:
    def test_first_registration_issues_token(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        assert token and len(c.registry) == 1

    def test_duplicate_registration_rejected(self):
        c = make_controller()
        c.register("dps-1", "dps", 1000.0)
        with pytest.raises(DuplicateRegistration):
            c.register("dps-1", "dps", 1000.0)

    def test_three_registrations_report_default_order(self):
        c = make_controller()
        register_all(c)
        snap = c.status()
        assert sorted(snap["groups"]) == ["dps", "fw", "idps"]
        assert snap["current_order"] == snap["default_order"] == ["dps", "fw", "idps"]
        assert all(g["attack_counter"] == 0 for g in snap["groups"].values())

    def test_fresh_controller_status(self):
        snap = make_controller().status()
        assert snap["current_order"] == snap["default_order"]
        assert snap["epoch"] == 0 and snap["groups"] == {}


class TestTokens:
    def test_keepalive_rotates_token(self):
        c = make_controller()
        old = c.register("dps-1", "dps", 1000.0)
        new = c.keepalive("dps-1", old)
        assert new != old
        with pytest.raises(InvalidToken):
            c.keepalive("dps-1", old)  # rotated-away token never accepted again

    def test_rotated_token_rejected_for_reports_too(self):
        c = make_controller()
        old = c.register("dps-1", "dps", 1000.0)
        c.keepalive("dps-1", old)
        with pytest.raises(InvalidToken):
            report(c, "dps-1", old)

    def test_token_of_other_function_rejected(self):
        c = make_controller()
        tokens = register_all(c)
        with pytest.raises(InvalidToken):
            c.keepalive("dps-1", tokens["fw-1"])

    def test_tampered_token_rejected(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        with pytest.raises(InvalidToken):
            c.keepalive("dps-1", token[:-4] + "0000")

    def test_current_token_reusable_for_multiple_reports(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        for _ in range(5):
            assert report(c, "dps-1", token)

    def test_missed_keepalive_evicts_and_dechains(self):
        clock = LogicalClock()
        c = make_controller(clock=clock, keepalive_timeout=30.0)
        tokens = register_all(c)
        clock.advance(20.0)
        tokens["fw-1"] = c.keepalive("fw-1", tokens["fw-1"])
        tokens["idps-1"] = c.keepalive("idps-1", tokens["idps-1"])
        clock.advance(11.0)  # dps-1 idle 31 s, the others 11 s
        with pytest.raises(Exception):
            c.keepalive("dps-1", tokens["dps-1"])  # expired session
        snap = c.status()
        assert "dps-1" not in snap["registry"]
        assert snap["current_order"] == ["fw", "idps"]  # order recomputed without dps


class TestReports:
    def test_plausible_report_accepted(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        assert report(c, "dps-1", token, strength=500.0)
        assert c.group_counters()["dps"] == 1

    def test_implausible_strength_rejected(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        with pytest.raises(ImplausibleStrength):
            report(c, "dps-1", token, strength=5000.0)
        assert c.group_counters()["dps"] == 0

    def test_boundary_strength_accepted(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        assert report(c, "dps-1", token, strength=1000.0)

    def test_nonpositive_strength_rejected(self):
        with pytest.raises(ValueError):
            AttackReport("dps-1", "flood", 0.0, 0.0, "t")

    def test_bandwidth_accumulator_tracks_strengths(self):
        c = make_controller()
        token = c.register("dps-1", "dps", 1000.0)
        report(c, "dps-1", token, strength=100.0)
        report(c, "dps-1", token, strength=250.0)
        assert c.registry["dps-1"].attack_bandwidth_accum == pytest.approx(350.0)


class TestDecide:
    def test_imminent_fires_on_triple_threshold(self):
        c = make_controller()
        tokens = register_all(c)
        pump_reports(c, tokens, "dps-1", 20)
        pump_reports(c, tokens, "fw-1", 350)
        pump_reports(c, tokens, "idps-1", 40)
        assert c.decide("imminent") == ChainOrder.of("fw", "idps", "dps")

    def test_imminent_does_not_fire_below_triple(self):
        c = make_controller()
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 150)
        assert c.decide("imminent") is None
        assert c.decide("regular") == ChainOrder.of("fw", "dps", "idps")

    def test_no_change_when_everything_quiet(self):
        c = make_controller()
        register_all(c)
        assert c.decide("regular") is None  # current == default, counters 0

    def test_regular_check_restores_default(self):
        c = make_controller()
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 350)
        c.run_check("imminent")
        assert c.current_order == ChainOrder.of("fw", "dps", "idps")
        # counts stay below threshold afterwards -> reset to default
        pump_reports(c, tokens, "dps-1", 50)
        pump_reports(c, tokens, "fw-1", 60)
        pump_reports(c, tokens, "idps-1", 70)
        event = c.run_check("regular")
        assert event.trigger == "reset"
        assert c.current_order == DEFAULT

    def test_ties_fall_back_to_default_positions(self):
        c = make_controller()
        tokens = register_all(c)
        pump_reports(c, tokens, "idps-1", 120)
        # dps and fw tie at zero; they keep default relative order behind idps
        assert c.decide("regular") == ChainOrder.of("idps", "dps", "fw")

    def test_empty_registry_decides_nothing(self):
        assert make_controller().decide("regular") is None


class TestApply:
    def test_apply_increments_epoch_and_resets_counters(self):
        applied = []
        c = make_controller(enforce=lambda order, epoch: applied.append((order, epoch)))
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 350)
        event = c.run_check("imminent")
        assert event == ReorderEvent(
            0.0, ChainOrder.of("fw", "dps", "idps"), "imminent", 1,
            {"dps": 0, "fw": 350, "idps": 0},
        )
        assert applied == [(ChainOrder.of("fw", "dps", "idps"), 1)]
        assert all(v == 0 for v in c.group_counters().values())

    def test_apply_current_order_is_noop(self):
        c = make_controller()
        register_all(c)
        assert c.apply_order(DEFAULT) == 0
        assert c.epoch == 0 and c.events == []

    def test_manual_order_must_be_permutation(self):
        c = make_controller()
        register_all(c)
        with pytest.raises(NotAPermutation):
            c.apply_order(ChainOrder.of("fw", "idps"))  # missing dps
        with pytest.raises(NotAPermutation):
            c.apply_order(ChainOrder.of("fw", "idps", "ghost"))

    def test_manual_order_holds_through_quiet_regular_checks(self):
        c = make_controller()
        register_all(c)
        c.apply_order(ChainOrder.of("idps", "fw", "dps"), trigger="manual")
        assert c.run_check("regular") is None  # quiet check must not undo the operator
        assert c.current_order == ChainOrder.of("idps", "fw", "dps")

    def test_threshold_crossing_overrides_manual_hold(self):
        c = make_controller()
        tokens = register_all(c)
        c.apply_order(ChainOrder.of("idps", "fw", "dps"), trigger="manual")
        pump_reports(c, tokens, "fw-1", 120)
        event = c.run_check("regular")
        assert event.trigger == "regular"
        assert c.current_order.function_ids[0] == "fw"
        # manual hold cleared: the next quiet regular check resets to default
        event = c.run_check("regular")
        assert event.trigger == "reset" and c.current_order == DEFAULT


class TestTimers:
    def test_imminent_reorder_within_one_fast_period(self):
        clock = LogicalClock()
        c = make_controller(clock=clock)
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 300)
        fired = []
        for _ in range(12):  # 12 seconds of 1 s ticks
            clock.advance(1.0)
            fired += c.process_timers()
        assert len(fired) == 1
        assert fired[0].trigger == "imminent" and fired[0].time <= 10.0 + 1.0

    def test_mid_level_counter_waits_for_regular_check(self):
        clock = LogicalClock()
        c = make_controller(clock=clock, keepalive_timeout=10_000.0)
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 150)
        fired = []
        while clock.now() < 299.0:
            clock.advance(1.0)
            fired += c.process_timers()
        assert fired == []  # imminent checks ran ~29 times without firing
        clock.advance(2.0)
        fired += c.process_timers()
        assert [e.trigger for e in fired] == ["regular"]
        assert fired[0].order.function_ids[0] == "fw"

    def test_threshold_gating_invariant(self):
        clock = LogicalClock()
        c = make_controller(clock=clock, keepalive_timeout=10_000.0)
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 99)
        for _ in range(700):
            clock.advance(1.0)
            assert c.process_timers() == []
        assert c.current_order == DEFAULT


class TestStatusConsistency:
    def test_snapshot_counters_come_from_one_version(self):
        c = make_controller()
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 7)
        snap = c.status()
        assert snap["groups"]["fw"]["attack_counter"] == 7
        assert snap["registry"]["fw-1"]["attack_counter"] == 7

    def test_epoch_and_events_after_one_reorder(self):
        c = make_controller()
        tokens = register_all(c)
        pump_reports(c, tokens, "fw-1", 350)
        c.run_check("imminent")
        snap = c.status()
        assert snap["epoch"] == 1
        assert len(snap["events"]) == 1
        assert snap["events"][0]["counters"] == {"dps": 0, "fw": 350, "idps": 0}


class TestConfigValidation:
    def test_multiplier_must_exceed_one(self):
        with pytest.raises(ValueError):
            ControllerConfig(default_order=DEFAULT, imminent_multiplier=1)

    def test_periods_must_be_positive(self):
        with pytest.raises(ValueError):
            ControllerConfig(default_order=DEFAULT, imminent_check_period=0.0)

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            ControllerConfig(default_order=DEFAULT, regular_threshold=0)
