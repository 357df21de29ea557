"""Metaorder reconstruction, filtering and market-volume enrichment."""
import random
from datetime import date
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaimpact.records import Fill, OrderClass, Side, TradeTape
from metaimpact.reconstruct import (
    TapeMismatchError,
    enrich_with_market_volume,
    filter_min_length,
    reconstruct_metaorders,
)

DAY_MS = 1710230400000  # 2024-03-12 09:00 Paris


def fill(ts_s, agent="a", instr="X", side=Side.BUY, price="10.0", qty=100):
    return Fill(
        DAY_MS + int(ts_s * 1000), agent, instr, "V", side, Decimal(price), qty, OrderClass.OTHER
    )


class TestReconstruct:
    def test_four_distinct_seconds(self):
        fills = [fill(t) for t in (0, 5, 9, 30)]
        (m,) = reconstruct_metaorders(fills)
        assert m.length == 4
        assert m.total_quantity == 400
        assert m.duration_s == pytest.approx(30.0)
        assert m.t0_ms == DAY_MS
        assert m.sign == 1

    def test_direction_splits_groups(self):
        fills = [fill(0), fill(5), fill(10, side=Side.SELL), fill(15, side=Side.SELL)]
        out = reconstruct_metaorders(fills)
        assert len(out) == 2
        assert {m.side for m in out} == {Side.BUY, Side.SELL}

    def test_single_fill_discarded(self):
        assert reconstruct_metaorders([fill(0)]) == []

    def test_same_second_collapse_discarded(self):
        # two fills in one second merge to one: below the minimum length
        fills = [fill(0.1), fill(0.8)]
        assert reconstruct_metaorders(fills) == []

    def test_duration_measured_after_merging(self):
        fills = [fill(0.0), fill(5.2), fill(5.9), fill(30.0)]
        (m,) = reconstruct_metaorders(fills)
        assert m.length == 3
        assert m.t0_ms == DAY_MS
        # merged middle fill keeps the later stamp; duration spans first to last
        assert m.duration_s == pytest.approx(30.0)

    def test_day_splits_groups(self):
        fills = [fill(0), fill(5), fill(86400), fill(86405)]
        out = reconstruct_metaorders(fills)
        assert len(out) == 2
        assert {m.day for m in out} == {date(2024, 3, 12), date(2024, 3, 13)}

    def test_gap_split_optional(self):
        fills = [fill(0), fill(5), fill(4000), fill(4005)]
        assert len(reconstruct_metaorders(fills)) == 1
        assert len(reconstruct_metaorders(fills, gap_split_s=3600)) == 2

    def test_order_independence(self):
        rng = random.Random(7)
        fills = [fill(t, agent=a) for a in "abc" for t in (0, 3, 9, 12, 40)]
        expected = reconstruct_metaorders(fills)
        for _ in range(5):
            shuffled = fills[:]
            rng.shuffle(shuffled)
            assert reconstruct_metaorders(shuffled) == expected

    @given(
        st.lists(
            st.tuples(
                st.sampled_from("ab"),
                st.sampled_from("XY"),
                st.sampled_from(list(Side)),
                st.integers(min_value=0, max_value=2000),
                st.integers(min_value=1, max_value=500),
            ),
            max_size=40,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_partition_property(self, rows):
        fills = [fill(t, agent=a, instr=i, side=s, qty=q) for a, i, s, t, q in rows]
        out = reconstruct_metaorders(fills)
        # every input fill lands in exactly one metaorder or a discarded short group
        total_out = sum(m.total_quantity for m in out)
        discarded = 0
        groups = {}
        for f in fills:
            groups.setdefault((f.agent_id, f.instrument_id, f.side), []).append(f)
        for group in groups.values():
            seconds = {f.second for f in group}
            if len(seconds) < 2:
                discarded += sum(f.quantity for f in group)
        assert total_out + discarded == sum(f.quantity for f in fills)


class TestFilterMinLength:
    def metas(self, lengths):
        out = []
        for j, n in enumerate(lengths):
            fills = [fill(i * 2, agent=f"a{j}") for i in range(n)]
            out.extend(reconstruct_metaorders(fills))
        return out

    def test_filters(self):
        ms = self.metas([2, 4, 12, 35])
        kept = filter_min_length(ms, 10)
        assert sorted(m.length for m in kept) == [12, 35]

    def test_identity_at_two(self):
        ms = self.metas([2, 4, 12, 35])
        assert filter_min_length(ms, 2) == ms

    def test_empty_result(self):
        ms = self.metas([2, 4, 12])
        assert filter_min_length(ms, 30) == []

    def test_rejects_below_two(self):
        with pytest.raises(ValueError):
            filter_min_length([], 1)


def tape_for(meta, extra=()):
    rows = [(f.timestamp_ms, float(f.price), f.quantity) for f in meta.fills]
    rows.extend(extra)
    rows.sort()
    return TradeTape(
        meta.instrument_id,
        meta.day,
        trade_ts=np.array([r[0] for r in rows], dtype=np.int64),
        trade_price=np.array([r[1] for r in rows]),
        trade_qty=np.array([r[2] for r in rows], dtype=np.int64),
    )


class TestEnrich:
    def build(self):
        (m,) = reconstruct_metaorders([fill(0), fill(10), fill(20)])
        return m

    def test_own_prints_only(self):
        m = self.build()
        enriched = enrich_with_market_volume(m, tape_for(m))
        assert enriched.market_volume == m.total_quantity
        assert enriched.participation == pytest.approx(1.0)

    def test_participation_tenth(self):
        m = self.build()  # Q = 300
        tape = tape_for(m, extra=[(DAY_MS + 5000, 10.0, 2700)])
        assert enrich_with_market_volume(m, tape).participation == pytest.approx(0.1)

    def test_boundary_trade_included(self):
        m = self.build()
        end = m.t0_ms + m.duration_ms
        tape = tape_for(m, extra=[(end, 10.0, 50), (end + 1, 10.0, 999)])
        assert enrich_with_market_volume(m, tape).market_volume == 350

    def test_instrument_mismatch(self):
        m = self.build()
        tape = tape_for(m)
        bad = TradeTape("OTHER", tape.day, tape.trade_ts, tape.trade_price, tape.trade_qty)
        with pytest.raises(TapeMismatchError):
            enrich_with_market_volume(m, bad)

    def test_inconsistent_tape(self):
        m = self.build()
        tape = TradeTape(
            m.instrument_id,
            m.day,
            trade_ts=np.array([m.t0_ms], dtype=np.int64),
            trade_price=np.array([10.0]),
            trade_qty=np.array([10], dtype=np.int64),
        )
        with pytest.raises(TapeMismatchError, match="V=10 < Q=300"):
            enrich_with_market_volume(m, tape)
