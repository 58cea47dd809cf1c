"""Walk through the two small example networks.

The first shows why one-to-all search with local pruning needs a
canonicity-preserving transfer set.  The second shows why a profile search
that prunes against earlier runs can drop a journey that arc-flags need.

    python3 demos/small_networks.py
"""
from flashtb.canonical import CanonicalProfile
from flashtb.fixtures import fixture
from flashtb.flags import compute_flags
from flashtb.flash import FlashEngine
from flashtb.partition import build_layout_graph, partition_stops
from flashtb.tb import TBEngine
from flashtb.transfers import TransferSet, generate_transfers, tb_transfers, trans_ultra


def show_transfers(tt, ts, label):
    names = [f"{tt.trip_ids[tt.ev_trip[a]]}[{tt.ev_idx[a]}] -> {tt.trip_ids[tt.ev_trip[b]]}[{tt.ev_idx[b]}]"
             for a, b, _ in ts]
    print(f"  {label:<22} {', '.join(names) or '(none)'}")


def fig1():
    print("fig1-net: A..D on T_a, E..F on T_b, walks B->C (5) and C->E (2)")
    tt = fixture("fig1-net")
    a, f = tt.stop("A"), tt.stop("F")
    for label, triples in (("generated", generate_transfers(tt)),
                           ("latest-exit reduced", tb_transfers(tt)),
                           ("Trans-ULTRA", trans_ultra(tt))):
        ts = TransferSet(tt, triples)
        show_transfers(tt, ts, label)
        if label != "generated":
            _, res = TBEngine(tt, ts).one_to_all(a, 0, unpack=True)
            print(f"    one-to-all from A at 0, front at F: {res.front[f]}")
            for (p, arr, n), j in res.journeys.items():
                if p == f:
                    print(f"    journey: {j.describe(tt)}")
    print()


def fig2():
    print("fig2-net: T_b and T_a share the line S->M; T_c and T_d reach T at 20")
    tt = fixture("fig2-net")
    s, t = tt.stop("S"), tt.stop("T")
    ts = TransferSet(tt, trans_ultra(tt))
    show_transfers(tt, ts, "Trans-ULTRA")
    trace = []
    TBEngine(tt, ts).profile(s, trace=trace)
    for tau, p, n, a in trace:
        print(f"  plain profile, run dep {tau}: arrival {a} at {tt.stop_ids[p]} with {n} trips "
              "matches an earlier run and is dropped")
    for tau, p, n, j in CanonicalProfile(tt, ts).profile(s):
        if p == t:
            print(f"  canonical profile, run dep {tau}: {j.describe(tt)}")
    g = build_layout_graph(tt)
    for k in (1, 2, tt.n_stops):
        part = partition_stops(g, k)
        store = compute_flags(tt, ts, part)
        r = FlashEngine(tt, ts, store, part).query(s, t, 0)
        print(f"  FLASH-TB k={k}: {store.bits.sum()} flags set, front {r.front}, "
              f"{r.journeys[r.front[0]].describe(tt)}")


if __name__ == "__main__":
    fig1()
    fig2()
