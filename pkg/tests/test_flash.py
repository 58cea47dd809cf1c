import numpy as np
import pytest

from flashtb.fixtures import FIXTURES, fixture, random_network
from flashtb.flags import FlagStore, compress_flags, compute_flags, compute_usage, flags_from_usage
from flashtb.flash import STAMP_BITS, FlashEngine, flash_profile_query, flash_query
from flashtb.oracle import Oracle
from flashtb.partition import Partition, build_layout_graph, partition_stops
from flashtb.tb import TBEngine
from flashtb.transfers import TransferSet, trans_ultra


def build(tt, k, rounds=8):
    ts = TransferSet(tt, trans_ultra(tt))
    part = partition_stops(build_layout_graph(tt), k)
    return ts, part, compute_flags(tt, ts, part, rounds)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_fig2_line_pruning(fig2, k):
    ts, part, store = build(fig2, k)
    eng = FlashEngine(fig2, ts, store, part, line_pruning=True)
    r = eng.query(fig2.stop("S"), fig2.stop("T"), 0)
    assert r.front == [(20, 2)]
    assert [fig2.trip_ids[g.trip] for g in r.journeys[(20, 2)].legs] == ["T_b", "T_d"]
    assert len(eng.queues[1]) == 1
    assert r.stats.scanned_trips == 2


def test_k1_equals_tb(fig2):
    ts, part, store = build(fig2, 1)
    f, t = FlashEngine(fig2, ts, store, part), TBEngine(fig2, ts)
    for s in range(fig2.n_stops):
        for tau in range(0, 20, 5):
            for q in range(fig2.n_stops):
                assert f.query(s, q, tau).front == t.query(s, q, tau).front


def test_zero_round_query(fig2):
    ts, part, store = build(fig2, 2)
    r = flash_query(fig2, ts, store, part, fig2.stop("T"), fig2.stop("S"), 0)
    assert r.front == [] and r.stats.scanned_trips == 0 and r.stats.rounds == 0


@pytest.mark.parametrize("seed", range(6))
def test_never_dereferences_unflagged(seed):
    tt = random_network(seed)
    ts, part, store = build(tt, 3)
    eng = FlashEngine(tt, ts, store, part, 8)
    eng.deref_log = []
    for s in range(tt.n_stops):
        for tau in tt.departure_times(s)[:3]:
            for t in range(tt.n_stops):
                eng.deref_log.clear()
                eng.query(s, t, tau)
                cell = part.cell[t]
                assert all(store.flag(x, cell) for x in eng.deref_log)


@pytest.mark.parametrize("name", FIXTURES)
def test_profile_fixtures_equal_oracle(name):
    tt = fixture(name)
    o = Oracle(tt, 8)
    for k in (1, 2, tt.n_stops):
        ts, part, store = build(tt, k)
        for s in range(tt.n_stops):
            for t in range(tt.n_stops):
                assert flash_profile_query(tt, ts, store, part, s, t, max_rounds=8) == o.profile(s, t)


def test_profile_empty_range(fig2):
    ts, part, store = build(fig2, 2)
    assert flash_profile_query(fig2, ts, store, part, fig2.stop("S"), fig2.stop("T"), 6, 9) == {}


@pytest.mark.parametrize("seed", range(5))
def test_profile_equals_unflagged(seed):
    tt = random_network(seed)
    ts, part, store = build(tt, 4)
    f, t = FlashEngine(tt, ts, store, part, 8), TBEngine(tt, ts, 8)
    for s in range(tt.n_stops):
        for q in range(tt.n_stops):
            assert f.profile(s, q) == t.profile(s, q)


@pytest.mark.parametrize("seed", range(4))
def test_raw_and_compressed_identical(seed):
    tt = random_network(seed)
    ts, part, store = build(tt, 3)
    a = FlashEngine(tt, ts, store, part, 8)
    b = FlashEngine(tt, ts, compress_flags(store), part, 8)
    for s in range(tt.n_stops):
        for tau in tt.departure_times(s)[:3]:
            for t in range(tt.n_stops):
                ra, rb = a.query(s, t, tau), b.query(s, t, tau)
                assert ra.front == rb.front and ra.journeys == rb.journeys
                assert ra.stats.scanned_trips == rb.stats.scanned_trips


def test_timestamp_wraparound_resets(fig2):
    ts, part, store = build(fig2, 1)
    eng = FlashEngine(fig2, ts, store, part)
    eng.counter = (1 << STAMP_BITS) - 3
    s, t = fig2.stop("S"), fig2.stop("T")
    for _ in range(6):
        assert eng.query(s, t, 0).front == [(20, 2)]
        assert eng.query(s, t, 5).front == [(20, 2)]
    assert eng.physical_resets == 1
    assert 0 < eng.counter < 20


def test_stale_stamps_ignored(fig2):
    ts, part, store = build(fig2, 1)
    eng = FlashEngine(fig2, ts, store, part)
    s, t = fig2.stop("S"), fig2.stop("T")
    eng.query(s, t, 0)
    # a stale index from an old query must not block the next one
    assert eng.query(s, t, 5).front == [(20, 2)]


def test_metadata_mismatch(fig2):
    ts, part, store = build(fig2, 2)
    with pytest.raises(ValueError, match="transfers"):
        FlashEngine(fig2, ts, FlagStore(np.ones((2, len(ts) + 1), bool)), part)
    with pytest.raises(ValueError, match="cells"):
        FlashEngine(fig2, ts, store, Partition([0] * fig2.n_stops, 1))


def test_one_to_all_unsupported(fig2):
    ts, part, store = build(fig2, 1)
    with pytest.raises(NotImplementedError):
        FlashEngine(fig2, ts, store, part).one_to_all(0, 0)


def test_scanned_trips_trend_random():
    totals = {}
    for seed in range(6):
        tt = random_network(seed, n_stops=24, n_trips=40, n_footpaths=8)
        ts = TransferSet(tt, trans_ultra(tt))
        usage = compute_usage(tt, ts, 8)
        g = build_layout_graph(tt)
        rng = np.random.default_rng(seed)
        queries = [(int(rng.integers(tt.n_stops)), int(rng.integers(tt.n_stops)), int(rng.integers(0, 120)))
                   for _ in range(200)]
        for k in (1, 4, tt.n_stops):
            part = partition_stops(g, k)
            eng = FlashEngine(tt, ts, flags_from_usage(usage, len(ts), part), part, 8)
            kk = "all" if k == tt.n_stops else k
            totals[kk] = totals.get(kk, 0) + sum(eng.query(*q).stats.scanned_trips for q in queries)
    assert totals[4] <= 1.05 * totals[1]
    assert totals["all"] <= 1.05 * totals[4]
