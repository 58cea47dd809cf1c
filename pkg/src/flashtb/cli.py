"""Command line pipeline: import, transfers, partition, flags, query, bench, verify.

Exit codes: 0 ok, 1 usage error, 2 validation failure (bad input or
mismatched artifacts), 3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import ArtifactError, check_inputs, read_meta, write_meta
from .flags import compress_flags, compute_flags, load_flags, save_flags
from .flash import FlashEngine
from .io import file_hash, import_timetable, read_timetable, write_timetable
from .partition import PartitionError, build_layout_graph, partition_stops, read_partition
from .tb import DEFAULT_MAX_ROUNDS, TBEngine
from .timetable import DEFAULT_MAX_COMPONENT, INF, TimetableError
from .transfers import TransferSet, tb_transfers, trans_ultra
from .verify import Check, fixture_checks, oracle_checks

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- loading with hash checks ----------------------------------------------------------

def _load_tt(path):
    m = read_meta(path, "timetable")
    return read_timetable(path), m


def _load_ts(path, tt, tt_meta):
    m = read_meta(path, "transfers")
    check_inputs(m, path, timetable=tt_meta)
    return TransferSet.read(tt, path), m


def _load_partition(path, tt, tt_meta):
    m = read_meta(path, "partition")
    check_inputs(m, path, timetable=tt_meta)
    return read_partition(tt, path), m


def _load_flags(path, ts, **upstream):
    m = read_meta(path, "flags")
    check_inputs(m, path, **upstream)
    store = load_flags(path, len(ts))
    # the header copy of the hashes must agree with the sidecar as well
    for kind, up in upstream.items():
        if store.meta.get(kind) != up.sha256:
            raise ArtifactError(f"{path} header was built from a different {kind}")
    return store, m


def _engine(args):
    """TB engine, or a FLASH engine when flags are given."""
    tt, tm = _load_tt(args.timetable)
    ts, sm = _load_ts(args.transfers, tt, tm)
    if (args.flags is None) != (args.partition is None):
        raise UsageError("--flags and --partition go together")
    if args.flags is None:
        return tt, TBEngine(tt, ts, args.max_rounds)
    part, pm = _load_partition(args.partition, tt, tm)
    store, fm = _load_flags(args.flags, ts, timetable=tm, transfers=sm, partition=pm)
    rounds = fm.params.get("max_rounds", args.max_rounds)
    if args.max_rounds != rounds:
        raise ArtifactError(f"flags were computed with max_rounds={rounds}, query asks for {args.max_rounds}")
    return tt, FlashEngine(tt, ts, store, part, args.max_rounds)


def _stop(tt, ext):
    try:
        return tt.stop(ext)
    except KeyError:
        raise TimetableError(f"unknown stop {ext!r}") from None


def _range(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("range must look like LO:HI")
    try:
        return (int(lo) if lo else -INF, int(hi) if hi else INF)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from None


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


# -- commands ------------------------------------------------------------------------

def cmd_import(args) -> int:
    tt = import_timetable(args.input, max_component=args.max_component)
    write_timetable(tt, args.out)
    src = Path(args.input)
    params = {"stops": tt.n_stops, "trips": tt.n_trips, "lines": tt.n_lines,
              "events": tt.n_events}
    if src.is_file():
        params["source_sha256"] = file_hash(src)
    write_meta(args.out, "timetable", params=params)
    print(json.dumps({"out": str(args.out), **params}))
    return EXIT_OK


def cmd_transfers(args) -> int:
    tt, tm = _load_tt(args.timetable)
    triples = trans_ultra(tt, _threads(args)) if args.mode == "ultra" else tb_transfers(tt)
    ts = TransferSet(tt, triples)
    ts.write(args.out)
    write_meta(args.out, "transfers", {"timetable": tm.sha256}, {"mode": args.mode, "count": len(ts)})
    print(json.dumps({"out": str(args.out), "mode": args.mode, "count": len(ts)}))
    return EXIT_OK


def cmd_partition(args) -> int:
    tt, tm = _load_tt(args.timetable)
    g = build_layout_graph(tt)
    part = partition_stops(g, args.k, args.eps, args.seed)
    part.write(tt, args.out)
    info = {"k": args.k, "eps": args.eps, "seed": args.seed, "cut": g.cut(part.cell),
            "max_cell": max(part.sizes())}
    write_meta(args.out, "partition", {"timetable": tm.sha256}, info)
    print(json.dumps({"out": str(args.out), **info}))
    return EXIT_OK


def cmd_flags(args) -> int:
    tt, tm = _load_tt(args.timetable)
    ts, sm = _load_ts(args.transfers, tt, tm)
    part, pm = _load_partition(args.partition, tt, tm)
    if args.k is not None and args.k != part.k:
        raise ArtifactError(f"partition has k={part.k}, --k asks for {args.k}")
    store = compute_flags(tt, ts, part, args.max_rounds, _threads(args))
    header = {"timetable": tm.sha256, "transfers": sm.sha256, "partition": pm.sha256,
              "k": part.k, "eps": part.eps, "max_rounds": args.max_rounds, "version": __version__}
    out = compress_flags(store) if args.compress else store
    save_flags(out, args.out, header)
    set_flags = int(store.bits.sum())
    params = {"k": part.k, "eps": part.eps, "max_rounds": args.max_rounds,
              "compressed": bool(args.compress), "set_flags": set_flags}
    write_meta(args.out, "flags", {"timetable": tm.sha256, "transfers": sm.sha256,
                                   "partition": pm.sha256}, params)
    print(json.dumps({"out": str(args.out), **params}))
    return EXIT_OK


def _journeys_json(tt, result):
    return [{"arrival": a, "trips": n, "journey": result.journeys[(a, n)].describe(tt)}
            for a, n in result.front]


def cmd_query(args) -> int:
    tt, eng = _engine(args)
    s, t = _stop(tt, args.source), _stop(tt, args.target)
    if args.profile:
        lo, hi = args.range if args.range else (-INF, INF)
        prof = eng.profile(s, t, lo, hi)
        for tau in sorted(prof):
            r = eng.query(s, t, tau)
            if r.front != prof[tau]:
                raise RuntimeError(f"profile and fixed-departure search disagree at {tau}")
            print(json.dumps({"from": args.source, "to": args.target, "dep": tau,
                              "front": [list(x) for x in prof[tau]],
                              "journeys": _journeys_json(tt, r)}))
        return EXIT_OK
    if args.dep is None:
        raise UsageError("--dep is required unless --profile is given")
    r = eng.query(s, t, args.dep)
    st = r.stats
    print(json.dumps({"from": args.source, "to": args.target, "dep": args.dep,
                      "front": [list(x) for x in r.front], "journeys": _journeys_json(tt, r),
                      "stats": {"rounds": st.rounds, "scanned_trips": st.scanned_trips,
                                "scanned_transfers": st.scanned_transfers,
                                "query_ns": st.query_ns, "unpack_ns": st.unpack_ns}}))
    return EXIT_OK


BENCH_COLUMNS = ["query", "source", "target", "dep", "front_size", "rounds", "scanned_trips",
                 "scanned_transfers", "time_ns", "time_incl_ns"]


def random_workload(tt, n: int, seed: int) -> list[tuple[int, int, int]]:
    rng = np.random.default_rng(seed)
    lo, hi = min(min(d) for d in tt.trip_dep), max(max(a) for a in tt.trip_arr)
    return [(int(rng.integers(tt.n_stops)), int(rng.integers(tt.n_stops)),
             int(rng.integers(lo, hi + 1))) for _ in range(n)]


def cmd_bench(args) -> int:
    tt, eng = _engine(args)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for q, (s, t, tau) in enumerate(random_workload(tt, args.queries, args.seed)):
        r = eng.query(s, t, tau, unpack=True)
        st = r.stats
        w.writerow([q, tt.stop_ids[s], tt.stop_ids[t], tau, len(r.front), st.rounds,
                    st.scanned_trips, st.scanned_transfers, st.query_ns,
                    st.query_ns + st.unpack_ns])
    return EXIT_OK


def cmd_verify(args) -> int:
    checks: list[Check] = []
    if args.timetable:
        tt, tm = _load_tt(args.timetable)
        checks.append(Check("timetable hash", True, tm.sha256[:12]))
        ts = engines = None
        if args.transfers:
            ts, sm = _load_ts(args.transfers, tt, tm)
            checks.append(Check("transfer set matches timetable", True, f"{len(ts)} transfers"))
        if args.partition:
            part, pm = _load_partition(args.partition, tt, tm)
            checks.append(Check("partition balanced", part.is_balanced(), f"sizes {part.sizes()}"))
        if args.flags:
            if not (ts and args.partition):
                raise UsageError("--flags needs --transfers and --partition")
            store, fm = _load_flags(args.flags, ts, timetable=tm, transfers=sm, partition=pm)
            engines = [FlashEngine(tt, ts, store, part, args.max_rounds)]
            checks.append(Check("flags match transfers and partition", True,
                                f"k={store.k}"))
        if args.against_oracle:
            if ts is None:
                raise UsageError("--against-oracle needs --transfers")
            checks += oracle_checks(tt, ts, engines or (), args.max_rounds)
    if args.against_oracle or not args.timetable:
        checks += fixture_checks(args.max_rounds)
    for c in checks:
        print(c.line())
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


# -- parser -----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flashtb", description="Trip-based transit routing with arc-flags.")
    p.add_argument("--version", action="version", version=f"flashtb {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def threads(q):
        q.add_argument("--threads", type=int, default=0,
                       help="worker processes (default: available cores)")

    def rounds(q):
        q.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)

    q = sub.add_parser("import", help="parse GTFS or JSON and write a binary timetable")
    q.add_argument("input")
    q.add_argument("--out", required=True)
    q.add_argument("--max-component", type=int, default=DEFAULT_MAX_COMPONENT)
    q.set_defaults(func=cmd_import)

    q = sub.add_parser("transfers", help="compute a transfer set")
    q.add_argument("--timetable", required=True)
    q.add_argument("--mode", choices=("tb", "ultra"), default="ultra")
    q.add_argument("--out", required=True)
    threads(q)
    q.set_defaults(func=cmd_transfers)

    q = sub.add_parser("partition", help="partition stops into k balanced cells")
    q.add_argument("--timetable", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--eps", type=float, default=0.05)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_partition)

    q = sub.add_parser("flags", help="compute arc-flags for a transfer set")
    q.add_argument("--timetable", required=True)
    q.add_argument("--transfers", required=True)
    q.add_argument("--partition", required=True)
    q.add_argument("--k", type=int, help="expected number of cells (checked)")
    q.add_argument("--compress", action="store_true", help="store distinct flag patterns")
    q.add_argument("--out", required=True)
    rounds(q)
    threads(q)
    q.set_defaults(func=cmd_flags)

    def engine_args(q):
        q.add_argument("--timetable", required=True)
        q.add_argument("--transfers", required=True)
        q.add_argument("--partition")
        q.add_argument("--flags")
        rounds(q)

    q = sub.add_parser("query", help="answer one query, printing JSON lines")
    engine_args(q)
    q.add_argument("--from", dest="source", required=True)
    q.add_argument("--to", dest="target", required=True)
    q.add_argument("--dep", type=int)
    q.add_argument("--profile", action="store_true")
    q.add_argument("--range", type=_range, help="LO:HI departure window for --profile")
    q.set_defaults(func=cmd_query)

    q = sub.add_parser("bench", help="replay a seeded random workload, CSV to stdout")
    engine_args(q)
    q.add_argument("--queries", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_bench)

    q = sub.add_parser("verify", help="check artifacts and run the oracle suites")
    q.add_argument("--timetable")
    q.add_argument("--transfers")
    q.add_argument("--partition")
    q.add_argument("--flags")
    q.add_argument("--against-oracle", action="store_true")
    q.add_argument("--max-rounds", type=int, default=8)
    q.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"flashtb: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArtifactError, TimetableError, PartitionError, ValueError, KeyError, OSError) as e:
        print(f"flashtb: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
