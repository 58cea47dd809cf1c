"""Transfer sets between stop events.

Two ways of building one are offered.  :func:`tb_transfers` is the classic
generate / U-turn / latest-exit pipeline.  :func:`trans_ultra` runs a
two-round canonical rRAPTOR from every stop and keeps the transfer of every
canonical two-trip journey; the result preserves canonical journeys, which
is what flag computation needs.
"""
from __future__ import annotations

import logging
import struct
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .timetable import INF, ParseError, Timetable

log = logging.getLogger(__name__)

TS_MAGIC = b"FTTS"
TS_VERSION = 1


class TransferSet:
    """Transfers in CSR layout keyed by source event.

    Transfer ids are positions in the sorted ``(from_event, to_event)``
    order, so within one source event targets ascend in ``id_E``.
    """

    def __init__(self, tt: Timetable, triples):
        trip = sorted(set((int(a), int(b), int(w)) for a, b, w in triples))
        self.n_events = tt.n_events
        self.from_ev = [a for a, _, _ in trip]
        self.to_ev = [b for _, b, _ in trip]
        self.walk_arr = [w for _, _, w in trip]
        self.to_trip = [tt.ev_trip[b] for b in self.to_ev]
        self.to_idx = [tt.ev_idx[b] for b in self.to_ev]
        self.same_stop = [tt.ev_stop[a] == tt.ev_stop[b] for a, b in zip(self.from_ev, self.to_ev)]
        off = [0] * (tt.n_events + 1)
        for a in self.from_ev:
            off[a + 1] += 1
        for e in range(tt.n_events):
            off[e + 1] += off[e]
        self.offsets = off

    def __len__(self):
        return len(self.from_ev)

    def __iter__(self):
        return iter(zip(self.from_ev, self.to_ev, self.walk_arr))

    def pairs(self) -> set:
        return set(zip(self.from_ev, self.to_ev))

    def index(self) -> dict:
        """(from_event, to_event) -> transfer id."""
        return {(a, b): k for k, (a, b) in enumerate(zip(self.from_ev, self.to_ev))}

    def out(self, event: int) -> range:
        return range(self.offsets[event], self.offsets[event + 1])

    def split(self) -> tuple[list, list]:
        """Per source event, ids of same-stop transfers and of footpath transfers."""
        t0 = [[] for _ in range(self.n_events)]
        tfp = [[] for _ in range(self.n_events)]
        for k, a in enumerate(self.from_ev):
            (t0 if self.same_stop[k] else tfp)[a].append(k)
        return t0, tfp

    def subset(self, tt: Timetable, keep) -> "TransferSet":
        return TransferSet(tt, [x for x, k in zip(self, keep) if k])

    def to_bytes(self) -> bytes:
        arr = np.zeros(len(self), dtype=[("a", "<u4"), ("b", "<u4"), ("w", "<i4")])
        arr["a"], arr["b"], arr["w"] = self.from_ev, self.to_ev, self.walk_arr
        return TS_MAGIC + struct.pack("<HQ", TS_VERSION, len(self)) + arr.tobytes()

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, tt: Timetable, data: bytes) -> "TransferSet":
        if data[:4] != TS_MAGIC:
            raise ParseError("bad magic, not an FTTS file")
        version, n = struct.unpack_from("<HQ", data, 4)
        if version != TS_VERSION:
            raise ParseError(f"unsupported FTTS version {version}")
        body = data[14:]
        if len(body) != 12 * n:
            raise ParseError("truncated transfer set")
        arr = np.frombuffer(body, dtype=[("a", "<u4"), ("b", "<u4"), ("w", "<i4")])
        if n and (arr["a"].max() >= tt.n_events or arr["b"].max() >= tt.n_events):
            raise ParseError("transfer refers to unknown stop event")
        return cls(tt, zip(arr["a"].tolist(), arr["b"].tolist(), arr["w"].tolist()))

    @classmethod
    def read(cls, tt: Timetable, path) -> "TransferSet":
        return cls.from_bytes(tt, Path(path).read_bytes())


def event_precedes_eq(tt: Timetable, a: int, b: int) -> bool:
    """T_a[i] ⪯ T_b[j]: same line, T_a not after T_b, i <= j."""
    ta, tb = tt.ev_trip[a], tt.ev_trip[b]
    return (tt.trip_line[ta] == tt.trip_line[tb] and tt.trip_pos[ta] <= tt.trip_pos[tb]
            and tt.ev_idx[a] <= tt.ev_idx[b])


def generate_transfers(tt: Timetable) -> list[tuple[int, int, int]]:
    """Initial TB transfers: earliest reachable trip of every nearby line."""
    out = []
    for ta in range(tt.n_trips):
        stops, arr = tt.trip_stops[ta], tt.trip_arr[ta]
        la, pa = tt.trip_line[ta], tt.trip_pos[ta]
        for i in range(1, len(stops)):
            src = tt.event(ta, i)
            for q, d in tt.footpaths[stops[i]].items():
                w = arr[i] + d
                for l, j in tt.stop_lines[q]:
                    if j == len(tt.line_stops[l]) - 1:
                        continue
                    tb = tt.earliest_trip(l, j, w)
                    if tb is None:
                        continue
                    if l == la and tt.trip_pos[tb] >= pa and i <= j:
                        continue
                    out.append((src, tt.event(tb, j), w))
    return out


def reduce_uturn(tt: Timetable, transfers) -> list:
    keep = []
    for a, b, w in transfers:
        ta, i = tt.ev_trip[a], tt.ev_idx[a]
        tb, j = tt.ev_trip[b], tt.ev_idx[b]
        if (i > 0 and j + 1 < len(tt.trip_stops[tb])
                and tt.trip_stops[ta][i - 1] == tt.trip_stops[tb][j + 1]
                and tt.trip_arr[ta][i - 1] <= tt.trip_arr[tb][j + 1]):
            continue
        keep.append((a, b, w))
    return keep


def reduce_latest_exit(tt: Timetable, transfers) -> list:
    """Drop transfers whose every continuation is matched from a later exit.

    A transfer from ``T_a[i]`` into ``T_b[j]`` goes if, for every ``l > j``,
    some transfer leaving ``T_a`` at an index after ``i`` reaches
    ``p(T_b[l])`` by ``arr(T_b[l])`` (riding on and walking at the end).
    """
    by_src: dict = {}
    for a, b, w in transfers:
        by_src.setdefault(a, []).append((a, b, w))
    keep = []
    for ta in range(tt.n_trips):
        best: dict = {}
        for i in range(len(tt.trip_stops[ta]) - 1, 0, -1):
            here = by_src.get(tt.event(ta, i), [])
            for a, b, w in here:
                tb, j = tt.ev_trip[b], tt.ev_idx[b]
                st, ar = tt.trip_stops[tb], tt.trip_arr[tb]
                if not all(best.get(st[l], INF) <= ar[l] for l in range(j + 1, len(st))):
                    keep.append((a, b, w))
            for a, b, w in here:
                tb, j = tt.ev_trip[b], tt.ev_idx[b]
                st, ar = tt.trip_stops[tb], tt.trip_arr[tb]
                for l in range(j + 1, len(st)):
                    for q, d in tt.footpaths[st[l]].items():
                        if ar[l] + d < best.get(q, INF):
                            best[q] = ar[l] + d
    return keep


def tb_transfers(tt: Timetable) -> list:
    return reduce_latest_exit(tt, reduce_uturn(tt, generate_transfers(tt)))


# -- Trans-ULTRA -------------------------------------------------------------------

class _CanonicalRaptor:
    """Two-round canonical rRAPTOR from one source stop."""

    ROUNDS = 2

    def __init__(self, tt: Timetable, source: int):
        self.tt = tt
        self.s = source
        n = tt.n_stops
        R = self.ROUNDS + 1
        self.arr = [[INF] * n for _ in range(R)]
        self.dep = [[None] * n for _ in range(R)]
        # parent[n][p]: ("walk",) | ("trip", trip, enter, exit) | ("fp", exit_event)
        self.parent = [[None] * n for _ in range(R)]
        # whether the stored representative starts by boarding at the source
        self.clean = [[False] * n for _ in range(R)]
        self.trace: list = []

    def _add(self, p, n, a, tau, parent, clean, marked, dirty) -> bool:
        arr, dep = self.arr, self.dep
        if arr[n][p] == a and dep[n][p] == tau:
            return False
        if arr[n][p] < a:
            return False
        if n > 0 and arr[n - 1][p] <= a:
            return False
        if not clean and arr[n][p] <= a:
            return False
        arr[n][p], dep[n][p] = a, tau
        self.parent[n][p] = parent
        self.clean[n][p] = clean
        for m in range(n + 1, self.ROUNDS + 1):
            if arr[m][p] <= a:
                break
            arr[m][p], dep[m][p] = a, tau
            self.parent[m][p] = None
            self.clean[m][p] = False
        marked.add(p)
        dirty.append((p, n))
        return True

    def run(self, tau) -> list:
        tt, s = self.tt, self.s
        dirty: list = []
        marked = set()
        self._add(s, 0, tau, tau, ("walk",), True, marked, dirty)
        for q, d in tt.fp_out[s]:
            self._add(q, 0, tau + d, tau, ("walk",), False, marked, dirty)
        for n in range(1, self.ROUNDS + 1):
            prev_marked, marked = marked, set()
            lines = sorted({l for p in prev_marked for l, i in tt.stop_lines[p]})
            direct = {}  # stop -> exit event, for stops reached by a trip this round
            for l in lines:
                stops = tt.line_stops[l]
                trip = None
                enter = -1
                for i, p in enumerate(stops):
                    if trip is not None:
                        a = tt.trip_arr[trip][i]
                        ok = self._add(p, n, a, tau, ("trip", trip, enter, i), self.clean[n - 1][stops[enter]]
                                       and self.parent[n - 1][stops[enter]] is not None, marked, dirty)
                        if ok:
                            direct[p] = tt.event(trip, i)
                    if i < len(stops) - 1 and p in prev_marked:
                        cand = tt.earliest_trip(l, i, self.arr[n - 1][p])
                        if cand is not None and (trip is None or tt.trip_pos[cand] < tt.trip_pos[trip]):
                            trip, enter = cand, i
            for p, e in sorted(direct.items(), key=lambda x: x[1]):
                # only relax from stops whose label is still this trip arrival
                par = self.parent[n][p]
                if par is None or par[0] != "trip" or tt.event(par[1], par[3]) != e:
                    continue
                a = tt.ev_arr[e]
                for q, d in tt.fp_out[p]:
                    self._add(q, n, a + d, tau, ("fp", e), self.clean[n][p], marked, dirty)
        return dirty

    def candidates(self, dirty, tau) -> set:
        """Transfers of two-trip canonical journeys finalised in this run."""
        tt = self.tt
        out = set()
        for p, n in set(dirty):
            if n != 2 or self.dep[2][p] != tau or not self.clean[2][p]:
                continue
            par = self.parent[2][p]
            if par is None or par[0] != "trip" or not self.arr[2][p] < self.arr[1][p]:
                continue
            _, t2, i2, _ = par
            b = tt.trip_stops[t2][i2]
            pb = self.parent[1][b]
            if pb is None:
                continue
            if pb[0] == "fp":
                e1 = pb[1]
            elif pb[0] == "trip":
                e1 = tt.event(pb[1], pb[3])
            else:
                continue
            out.add((e1, tt.event(t2, i2)))
        return out


def candidate_departures(tt: Timetable, s: int) -> list[int]:
    """Departure times of events at ``s`` itself, descending."""
    times = set()
    for l, i in tt.stop_lines[s]:
        if i < len(tt.line_stops[l]) - 1:
            times.update(tt.line_deps[l][i])
    return sorted(times, reverse=True)


def trans_ultra_source(tt: Timetable, s: int) -> set:
    rr = _CanonicalRaptor(tt, s)
    out = set()
    for tau in candidate_departures(tt, s):
        out |= rr.candidates(rr.run(tau), tau)
    return out


def _worker(args):
    path_or_tt, sources = args
    tt = path_or_tt
    res = set()
    for s in sources:
        res |= trans_ultra_source(tt, s)
    return res


def trans_ultra(tt: Timetable, threads: int = 1) -> list[tuple[int, int, int]]:
    """Canonicity-preserving transfer set, as (from_event, to_event, walk_arrival)."""
    pairs = set()
    if threads > 1:
        chunks = [list(range(k, tt.n_stops, threads)) for k in range(threads)]
        with ProcessPoolExecutor(threads) as ex:
            for part in ex.map(_worker, [(tt, c) for c in chunks]):
                pairs |= part
    else:
        for s in range(tt.n_stops):
            pairs |= trans_ultra_source(tt, s)
    out = []
    for a, b in pairs:
        w = tt.ev_arr[a] + tt.fp(tt.ev_stop[a], tt.ev_stop[b])
        out.append((a, b, int(w)))
    return sorted(out)
