from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssfc.traffic import (
    ClassKind,
    TrafficClass,
    TrafficComposition,
    UnknownClass,
    apply_function,
    filter_class,
    propagate_chain,
    validate_universe,
)

from conftest import comp, spec

TOL = 1e-9

# Five-class mix at (30,10,25,20,15)% of 100 Mbit/s.
FIVE_CLASS = comp(t1=30.0, t2=10.0, t3=25.0, t4=20.0, t5=15.0)


def shares_pct(c: TrafficComposition) -> dict[str, float]:
    return {k: v * 100 for k, v in c.shares().items()}


class TestCompositionBasics:
    def test_shares_derived_from_bandwidth(self):
        assert FIVE_CLASS.share("t1") == pytest.approx(0.30, abs=TOL)
        assert FIVE_CLASS.total_bandwidth == pytest.approx(100.0)

    def test_shares_sum_to_one(self):
        assert sum(FIVE_CLASS.shares().values()) == pytest.approx(1.0, abs=TOL)

    def test_empty_composition_has_zero_shares(self):
        empty = comp(a=0.0, b=0.0)
        assert empty.is_empty
        assert empty.share("a") == 0.0

    def test_from_shares_roundtrip(self):
        c = TrafficComposition.from_shares(200.0, {"a": 0.25, "b": 0.75}, total_packet_rate=1000.0)
        assert c.entry("a").bandwidth == pytest.approx(50.0)
        assert c.entry("b").packet_rate == pytest.approx(750.0)

    def test_from_shares_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            TrafficComposition.from_shares(100.0, {"a": 0.5, "b": 0.4})

    def test_negative_bandwidth_rejected(self):
        with pytest.raises(ValueError):
            comp(a=-1.0)

    def test_duplicate_class_rejected(self):
        with pytest.raises(ValueError):
            TrafficComposition.build([("a", 0, 1), ("a", 0, 2)])

    def test_universe_requires_one_benign(self):
        benign = TrafficClass("ok", ClassKind.BENIGN)
        attack = TrafficClass("atk", ClassKind.ATTACK)
        validate_universe([benign, attack])
        with pytest.raises(ValueError):
            validate_universe([attack])
        with pytest.raises(ValueError):
            validate_universe([benign, benign])


class TestFilterClass:
    def test_sequential_drop_of_two_classes_matches_published_shares(self):
        # drop classes 2 and 4 from (30,10,25,20,15)% -> (42.86, 0, 35.71, 0, 21.43)%
        out = filter_class(filter_class(FIVE_CLASS, "t2"), "t4")
        expected = {"t1": 42.86, "t2": 0.0, "t3": 35.71, "t4": 0.0, "t5": 21.43}
        for cid, pct in expected.items():
            assert shares_pct(out)[cid] == pytest.approx(pct, abs=0.01)

    def test_drop_single_class_renormalizes_survivors(self):
        # survivors 30/25/20/15 of a 90 Mbit/s total, computed by hand
        out = filter_class(FIVE_CLASS, "t2")
        assert out.share("t1") == pytest.approx(30.0 / 90.0, abs=TOL)
        assert out.share("t2") == 0.0
        assert out.share("t3") == pytest.approx(25.0 / 90.0, abs=TOL)
        assert out.share("t4") == pytest.approx(20.0 / 90.0, abs=TOL)
        assert out.share("t5") == pytest.approx(15.0 / 90.0, abs=TOL)

    def test_drop_zero_share_class_is_identity(self):
        c = comp(a=60.0, b=40.0, c=0.0)
        assert filter_class(c, "c") == c

    def test_drop_only_loaded_class_yields_empty(self):
        c = comp(a=100.0, b=0.0)
        out = filter_class(c, "a")
        assert out.is_empty
        assert out.share("b") == 0.0

    def test_unknown_class_raises(self):
        with pytest.raises(UnknownClass):
            filter_class(FIVE_CLASS, "nope")

    def test_survivors_keep_absolute_traffic(self):
        out = filter_class(FIVE_CLASS, "t3")
        for cid in ("t1", "t2", "t4", "t5"):
            assert out.entry(cid) == FIVE_CLASS.entry(cid)
        assert out.total_bandwidth == pytest.approx(75.0)


class TestApplyFunction:
    def test_firewall_drops_two_classes(self):
        fw = spec("fw", {"t2", "t4"})
        out = apply_function(FIVE_CLASS, fw)
        assert shares_pct(out)["t1"] == pytest.approx(42.86, abs=0.01)
        assert out.share("t2") == 0.0
        assert out.share("t4") == 0.0

    def test_function_filtering_nothing_is_identity(self):
        assert apply_function(FIVE_CLASS, spec("noop", set())) == FIVE_CLASS

    def test_second_stage_on_firewall_output(self):
        fw_out = apply_function(FIVE_CLASS, spec("fw", {"t2", "t4"}))
        dps_out = apply_function(fw_out, spec("dps", {"t3"}))
        assert shares_pct(dps_out)["t1"] == pytest.approx(66.67, abs=0.01)
        assert shares_pct(dps_out)["t5"] == pytest.approx(33.33, abs=0.01)

    def test_filters_for_absent_class_ignored(self):
        out = apply_function(comp(a=10.0), spec("f", {"not-there"}))
        assert out == comp(a=10.0)


class TestPropagateChain:
    CHAIN = [spec("fw", {"t2", "t4"}), spec("dps", {"t3"}), spec("idps", {"t5"})]

    def test_published_three_stage_walk(self):
        links = propagate_chain(FIVE_CLASS, self.CHAIN)
        assert len(links) == 4
        assert links[0] == FIVE_CLASS
        assert shares_pct(links[1])["t1"] == pytest.approx(42.86, abs=0.01)
        assert shares_pct(links[2])["t1"] == pytest.approx(66.67, abs=0.01)
        assert shares_pct(links[3])["t1"] == pytest.approx(100.0, abs=0.01)
        assert all(links[3].share(c) == 0.0 for c in ("t2", "t3", "t4", "t5"))

    def test_pure_benign_input_unchanged_at_every_link(self):
        benign = comp(t1=80.0, t2=0.0, t3=0.0, t4=0.0, t5=0.0)
        for link in propagate_chain(benign, self.CHAIN):
            assert link == benign

    def test_final_composition_is_order_independent(self):
        permuted = [self.CHAIN[2], self.CHAIN[0], self.CHAIN[1]]  # idps first
        forward = propagate_chain(FIVE_CLASS, self.CHAIN)
        backward = propagate_chain(FIVE_CLASS, permuted)
        assert forward[1] != backward[1]  # intermediate links differ
        assert forward[-1] == backward[-1]

    def test_empty_chain_rejected(self):
        with pytest.raises(ValueError):
            propagate_chain(FIVE_CLASS, [])

    def test_duplicate_function_rejected(self):
        with pytest.raises(ValueError):
            propagate_chain(FIVE_CLASS, [self.CHAIN[0], self.CHAIN[0]])


# ------------------------------------------------------------------ properties

CLASS_IDS = ("c1", "c2", "c3", "c4", "c5")


@st.composite
def compositions(draw, min_total: float = 0.0):
    # zero or a physically plausible bandwidth; denormal values would underflow
    # the share-formula cross-check without being meaningful traffic
    bandwidth = st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=1e4))
    bws = draw(st.lists(bandwidth, min_size=len(CLASS_IDS), max_size=len(CLASS_IDS)))
    c = TrafficComposition.build(zip(CLASS_IDS, (b * 10 for b in bws), bws))
    if c.total_bandwidth <= min_total:
        bws[0] += min_total + 1.0
        c = TrafficComposition.build(zip(CLASS_IDS, (b * 10 for b in bws), bws))
    return c


@given(compositions(min_total=1e-6), st.sampled_from(CLASS_IDS))
def test_nonempty_outputs_normalize(c, dropped):
    out = filter_class(c, dropped)
    if not out.is_empty:
        assert sum(out.shares().values()) == pytest.approx(1.0, abs=TOL)


@given(compositions(min_total=1e-6), st.sampled_from(CLASS_IDS))
def test_filter_matches_renormalization_formula(c, dropped):
    # independent check of the output share against in/(1 - in_dropped)
    p_dropped = c.share(dropped)
    out = filter_class(c, dropped)
    if p_dropped == 1.0:
        assert out.is_empty
        return
    for cid in CLASS_IDS:
        if cid == dropped:
            assert out.share(cid) == 0.0
        elif not out.is_empty:
            assert out.share(cid) == pytest.approx(c.share(cid) / (1.0 - p_dropped), abs=1e-9)


@given(compositions(), st.sampled_from(CLASS_IDS), st.sampled_from(CLASS_IDS))
def test_drops_commute(c, a, b):
    ab = filter_class(filter_class(c, a), b)
    ba = filter_class(filter_class(c, b), a)
    assert ab == ba  # exact: absolute quantities


@given(compositions(), st.sampled_from(CLASS_IDS))
def test_filter_is_idempotent(c, dropped):
    once = filter_class(c, dropped)
    assert filter_class(once, dropped) == once


@given(compositions(), st.permutations(["c2", "c3", "c4"]))
def test_chain_final_link_order_independent(c, order):
    base = [spec(f"f-{cid}", {cid}) for cid in ("c2", "c3", "c4")]
    permuted = [spec(f"f-{cid}", {cid}) for cid in order]
    assert propagate_chain(c, base)[-1] == propagate_chain(c, permuted)[-1]


@given(compositions(min_total=1e-6), st.sampled_from(CLASS_IDS))
def test_surviving_bandwidth_conserved(c, dropped):
    out = filter_class(c, dropped)
    for cid in CLASS_IDS:
        if cid != dropped:
            assert out.entry(cid).bandwidth == c.entry(cid).bandwidth
    assert math.isclose(
        out.total_bandwidth, c.total_bandwidth - c.entry(dropped).bandwidth, abs_tol=1e-6
    )
