"""How the number of cells changes the work done per query.

Builds the seeded 200-stop grid network, computes flags once, then runs the
same random workload with several partitions and prints mean scanned trips,
mean scanned transfers and mean query time.  Takes about a minute.

    python3 demos/search_space.py
"""
import time

import numpy as np

from flashtb.cli import random_workload
from flashtb.fixtures import synthetic_network
from flashtb.flags import compress_flags, compute_usage, flags_from_usage
from flashtb.flash import FlashEngine
from flashtb.partition import build_layout_graph, partition_stops
from flashtb.tb import TBEngine
from flashtb.transfers import TransferSet, generate_transfers, trans_ultra


def main():
    tt = synthetic_network()
    print(f"network: {tt.n_stops} stops, {tt.n_trips} trips, {tt.n_lines} lines")
    t0 = time.perf_counter()
    ts = TransferSet(tt, trans_ultra(tt))
    print(f"transfers: {len(generate_transfers(tt))} generated, {len(ts)} after Trans-ULTRA "
          f"({time.perf_counter() - t0:.1f}s)")
    t0 = time.perf_counter()
    usage = compute_usage(tt, ts)
    print(f"canonical journeys enumerated from every stop ({time.perf_counter() - t0:.1f}s)")
    queries = random_workload(tt, 1000, seed=1)
    g = build_layout_graph(tt)

    def run(label, eng):
        st = [eng.query(*q, unpack=False).stats for q in queries]
        print(f"  {label:<10} trips {np.mean([x.scanned_trips for x in st]):7.1f}  "
              f"transfers {np.mean([x.scanned_transfers for x in st]):8.1f}  "
              f"time {np.mean([x.query_ns for x in st]) / 1000:7.1f} us")

    run("TB", TBEngine(tt, ts))
    for k in (1, 4, 16, 32, 64, tt.n_stops):
        part = partition_stops(g, k)
        store = flags_from_usage(usage, len(ts), part)
        cs = compress_flags(store)
        run(f"k={k}", FlashEngine(tt, ts, store, part))
        print(f"{'':13}cut {g.cut(part.cell)}, {store.bits.sum()} flags, "
              f"{len(cs.patterns)} distinct patterns")


if __name__ == "__main__":
    main()
