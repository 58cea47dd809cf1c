"""Timetable model: stops, trips, lines, footpaths and the total orders on them.

Internal indices are chosen so that the orders are free: stop ``p`` has
``id_S(p) == p``, line ``l`` has ``id_L(l) == l`` and the global stop-event
index equals ``id_E``.  Trips are numbered line by line, earliest first.
"""
from __future__ import annotations

import logging
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching, shortest_path

log = logging.getLogger(__name__)

INF = float("inf")

#: Two service days plus a margin for trips running past midnight.
HORIZON = 2 * 86400 + 6 * 3600

#: Largest footpath component we are willing to close transitively.
DEFAULT_MAX_COMPONENT = 2000

#: Buckets larger than this skip the quadratic minimality check.
MATCHING_CHECK_LIMIT = 400


class TimetableError(ValueError):
    """Raised for structurally invalid timetables."""


class ParseError(TimetableError):
    """Raised for malformed input files."""


@dataclass
class RawTrip:
    id: str
    events: list  # [(stop_id, arr, dep), ...]


@dataclass
class RawTimetable:
    """Entities as read from disk, before line building and closure."""

    stops: list
    trips: list = field(default_factory=list)
    footpaths: list = field(default_factory=list)  # [(from_id, to_id, duration)]

    def counts(self):
        return {
            "stops": len(self.stops),
            "trips": len(self.trips),
            "events": sum(len(t.events) for t in self.trips),
            "footpaths": sum(1 for a, b, _ in self.footpaths if a != b),
        }


def validate_raw(raw: RawTimetable, horizon: int = HORIZON) -> list[str]:
    """Return a list of problems; empty means the input is usable."""
    problems = []
    seen = set()
    for s in raw.stops:
        if s in seen:
            problems.append(f"duplicate stop id {s!r}")
        seen.add(s)
    trip_ids = set()
    for t in raw.trips:
        if t.id in trip_ids:
            problems.append(f"duplicate trip id {t.id!r}")
        trip_ids.add(t.id)
        if len(t.events) < 2:
            problems.append(f"trip {t.id!r}: trip with <2 events")
            continue
        prev_dep = None
        for i, (stop, arr, dep) in enumerate(t.events):
            if stop not in seen:
                problems.append(f"trip {t.id!r}: unknown stop {stop!r}")
            if arr > dep:
                problems.append(f"trip {t.id!r} event {i}: arrival after departure")
            if prev_dep is not None and arr < prev_dep:
                problems.append(f"trip {t.id!r} event {i}: non-monotone trip times")
            if arr < 0 or dep >= horizon:
                problems.append(f"trip {t.id!r} event {i}: time outside horizon")
            prev_dep = dep
    for a, b, d in raw.footpaths:
        if a not in seen or b not in seen:
            problems.append(f"footpath {a!r}->{b!r}: unknown stop")
        if d < 0 or (d == 0 and a != b):
            problems.append(f"footpath {a!r}->{b!r}: duration must be positive")
    return problems


def close_footpaths(n: int, edges: Iterable[tuple[int, int, int]],
                    max_component: int = DEFAULT_MAX_COMPONENT) -> list[dict]:
    """Transitively close a footpath graph under min-plus.

    Returns one dict per stop mapping reachable stops to durations; every stop
    maps to itself with duration 0.
    """
    out = [{p: 0} for p in range(n)]
    edges = [(a, b, d) for a, b, d in edges if a != b]
    if not edges:
        return out
    best: dict = {}
    for a, b, d in edges:
        if d < best.get((a, b), INF):
            best[(a, b)] = d
    rows, cols = zip(*best)
    g = csr_matrix((np.fromiter(best.values(), float), (rows, cols)), shape=(n, n))
    ncomp, labels = connected_components(g, directed=True, connection="weak")
    members = defaultdict(list)
    for p in sorted(set(rows) | set(cols)):
        members[labels[p]].append(p)
    for comp in members.values():
        if len(comp) > max_component:
            raise TimetableError(
                f"footpath component of {len(comp)} stops exceeds limit {max_component}")
        sub = g[comp][:, comp]
        dist = shortest_path(sub, method="D", directed=True)
        for a, p in enumerate(comp):
            for b, q in enumerate(comp):
                d = dist[a, b]
                if a != b and np.isfinite(d):
                    out[p][q] = int(round(d))
    return out


def _precedes(u, v) -> bool:
    """Strict non-overtaking: every arrival and departure of u is earlier."""
    return all(a < b for a, b in zip(u[0], v[0])) and all(a < b for a, b in zip(u[1], v[1]))


def minimum_chain_count(vectors: Sequence) -> int:
    """Size of a minimum chain cover under strict domination (Dilworth)."""
    n = len(vectors)
    if n == 0:
        return 0
    r, c = [], []
    for i in range(n):
        for j in range(n):
            if i != j and _precedes(vectors[i], vectors[j]):
                r.append(i)
                c.append(j)
    if not r:
        return n
    m = csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
    match = maximum_bipartite_matching(m, perm_type="column")
    return n - int((match >= 0).sum())


def _chain_cover(vectors: Sequence) -> list[list[int]]:
    """Minimum chain cover via bipartite matching; chains are in ≺ order."""
    n = len(vectors)
    r, c = [], []
    for i in range(n):
        for j in range(n):
            if i != j and _precedes(vectors[i], vectors[j]):
                r.append(i)
                c.append(j)
    nxt = [-1] * n
    has_prev = [False] * n
    if r:
        m = csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
        match = maximum_bipartite_matching(m, perm_type="column")
        for i, j in enumerate(match):
            if j >= 0:
                nxt[i] = int(j)
                has_prev[j] = True
    chains = []
    for i in range(n):
        if not has_prev[i]:
            ch = [i]
            while nxt[ch[-1]] >= 0:
                ch.append(nxt[ch[-1]])
            chains.append(ch)
    return chains


def build_lines(trips: Sequence[tuple]) -> list[list[int]]:
    """Group trips into lines.

    ``trips`` holds ``(stops, arr, dep)`` tuples.  Trips sharing a stop
    sequence are sorted by first arrival and put into the first line they do
    not overtake.  If that greedy pass is not minimal for a bucket, the bucket
    falls back to a matching-based minimum chain cover.
    """
    buckets = defaultdict(list)
    for k, (stops, arr, dep) in enumerate(trips):
        buckets[tuple(stops)].append(k)
    lines = []
    for seq in sorted(buckets):
        ids = sorted(buckets[seq], key=lambda k: (trips[k][1][0], trips[k][2][0],
                                                   tuple(trips[k][1]), k))
        vecs = [(trips[k][1], trips[k][2]) for k in ids]
        greedy: list[list[int]] = []
        for pos in range(len(ids)):
            for ln in greedy:
                if _precedes(vecs[ln[-1]], vecs[pos]):
                    ln.append(pos)
                    break
            else:
                greedy.append([pos])
        if len(greedy) > 1 and len(ids) <= MATCHING_CHECK_LIMIT \
                and len(greedy) > minimum_chain_count(vecs):
            log.debug("greedy line grouping not minimal for %s; using matching", seq)
            greedy = _chain_cover(vecs)
        lines.extend([ids[p] for p in ln] for ln in greedy)
    return lines


@dataclass(frozen=True)
class Leg:
    """A trip segment: board at index ``enter``, alight at ``exit``."""

    trip: int
    enter: int
    exit: int


@dataclass(frozen=True)
class Journey:
    source: int
    target: int
    legs: tuple = ()

    @property
    def n_trips(self) -> int:
        return len(self.legs)

    def transfers(self, tt: "Timetable") -> list[tuple[int, int]]:
        """Transfers used, as (from_event, to_event) pairs."""
        return [(tt.event(a.trip, a.exit), tt.event(b.trip, b.enter))
                for a, b in zip(self.legs, self.legs[1:])]

    def arrival(self, tt: "Timetable", dep: int | None = None) -> float:
        if not self.legs:
            if dep is None:
                raise ValueError("walking journey needs a departure time")
            return dep + tt.fp(self.source, self.target)
        last = self.legs[-1]
        return tt.trip_arr[last.trip][last.exit] + tt.fp(tt.trip_stops[last.trip][last.exit],
                                                          self.target)

    def departure(self, tt: "Timetable") -> float:
        """Latest feasible departure time from the source."""
        if not self.legs:
            return INF
        first = self.legs[0]
        return tt.trip_dep[first.trip][first.enter] - tt.fp(
            self.source, tt.trip_stops[first.trip][first.enter])

    def describe(self, tt: "Timetable") -> str:
        parts = [tt.stop_ids[self.source]]
        for g in self.legs:
            st = tt.trip_stops[g.trip]
            parts.append(f"[{tt.trip_ids[g.trip]} {tt.stop_ids[st[g.enter]]}"
                         f"@{tt.trip_dep[g.trip][g.enter]}->{tt.stop_ids[st[g.exit]]}"
                         f"@{tt.trip_arr[g.trip][g.exit]}]")
        parts.append(tt.stop_ids[self.target])
        return " ".join(parts)


class Timetable:
    """Immutable, query-ready timetable.

    Hot paths use plain lists; numpy views are built on demand for storage.
    """

    def __init__(self, stop_ids, trip_ids, trip_stops, trip_arr, trip_dep, line_trips,
                 footpaths, raw_footpaths=()):
        self.stop_ids: list[str] = list(stop_ids)
        self.stop_index = {s: i for i, s in enumerate(self.stop_ids)}
        self.trip_ids: list[str] = list(trip_ids)
        self.trip_stops: list[list[int]] = [list(x) for x in trip_stops]
        self.trip_arr: list[list[int]] = [list(x) for x in trip_arr]
        self.trip_dep: list[list[int]] = [list(x) for x in trip_dep]
        self.line_trips: list[list[int]] = [list(x) for x in line_trips]
        #: footpaths[p][q] = walking time, including footpaths[p][p] == 0
        self.footpaths: list[dict] = footpaths
        self.raw_footpaths = list(raw_footpaths)
        self._index()

    def _index(self):
        n_trips = len(self.trip_ids)
        self.trip_line = [0] * n_trips
        self.trip_pos = [0] * n_trips
        for l, ts in enumerate(self.line_trips):
            for k, t in enumerate(ts):
                self.trip_line[t] = l
                self.trip_pos[t] = k
        self.line_stops = [tuple(self.trip_stops[ts[0]]) for ts in self.line_trips]
        self.line_deps = [[[self.trip_dep[t][i] for t in ts] for i in range(len(self.line_stops[l]))]
                          for l, ts in enumerate(self.line_trips)]
        self.trip_ev0 = []
        self.ev_trip, self.ev_idx = [], []
        for t in range(n_trips):
            self.trip_ev0.append(len(self.ev_trip))
            for i in range(len(self.trip_stops[t])):
                self.ev_trip.append(t)
                self.ev_idx.append(i)
        self.ev_stop = [self.trip_stops[t][i] for t, i in zip(self.ev_trip, self.ev_idx)]
        self.ev_arr = [self.trip_arr[t][i] for t, i in zip(self.ev_trip, self.ev_idx)]
        self.ev_dep = [self.trip_dep[t][i] for t, i in zip(self.ev_trip, self.ev_idx)]
        self.stop_lines: list[list[tuple[int, int]]] = [[] for _ in self.stop_ids]
        for l, seq in enumerate(self.line_stops):
            for i, p in enumerate(seq):
                self.stop_lines[p].append((l, i))
        self.fp_out = [sorted((q, d) for q, d in fp.items() if q != p)
                       for p, fp in enumerate(self.footpaths)]
        self.fp_in: list[list] = [[] for _ in self.stop_ids]
        for p, lst in enumerate(self.fp_out):
            for q, d in lst:
                self.fp_in[q].append((p, d))

    # -- basic accessors -------------------------------------------------
    @property
    def n_stops(self) -> int:
        return len(self.stop_ids)

    @property
    def n_trips(self) -> int:
        return len(self.trip_ids)

    @property
    def n_lines(self) -> int:
        return len(self.line_trips)

    @property
    def n_events(self) -> int:
        return len(self.ev_trip)

    def event(self, trip: int, i: int) -> int:
        return self.trip_ev0[trip] + i

    def fp(self, p: int, q: int) -> float:
        return self.footpaths[p].get(q, INF)

    def pred(self, trip: int) -> int | None:
        """Predecessor of ``trip`` within its line, if any."""
        return trip - 1 if self.trip_pos[trip] > 0 else None

    def earliest_trip(self, line: int, i: int, time) -> int | None:
        """Earliest trip of ``line`` departing index ``i`` no earlier than ``time``."""
        deps = self.line_deps[line][i]
        k = bisect_left(deps, time)
        if k == len(deps):
            return None
        return self.line_trips[line][k]

    def stop(self, ext_id: str) -> int:
        try:
            return self.stop_index[ext_id]
        except KeyError:
            raise KeyError(f"unknown stop {ext_id!r}") from None

    def trip(self, ext_id: str) -> int:
        return self.trip_ids.index(ext_id)

    # -- orders ------------------------------------------------------------
    def id_L(self, line: int) -> int:
        return line

    def id_S(self, stop: int) -> int:
        return stop

    def id_E(self, trip: int, i: int) -> int:
        return self.trip_ev0[trip] + i

    def line_key(self, line: int):
        t0 = self.line_trips[line][0]
        return (tuple(self.stop_ids[p] for p in self.line_stops[line]), self.trip_dep[t0][0])

    # -- derived data -------------------------------------------------------
    def departure_times(self, source: int, lo=-INF, hi=INF) -> list[int]:
        """Distinct times from which walking reaches a boardable event just in time."""
        times = set()
        for q, d in self.footpaths[source].items():
            for l, i in self.stop_lines[q]:
                if i == len(self.line_stops[l]) - 1:
                    continue
                for dep in self.line_deps[l][i]:
                    tau = dep - d
                    if lo <= tau <= hi:
                        times.add(tau)
        return sorted(times)

    def counts(self):
        return {
            "stops": self.n_stops,
            "trips": self.n_trips,
            "lines": self.n_lines,
            "events": self.n_events,
            "footpaths": sum(len(x) for x in self.fp_out),
        }

    def check_journey(self, j: Journey, dep: int | None = None) -> list[str]:
        """List feasibility problems of ``j`` (empty when feasible)."""
        probs = []
        here, t_here = j.source, dep
        for k, g in enumerate(j.legs):
            st = self.trip_stops[g.trip]
            if not 0 <= g.enter < g.exit < len(st):
                probs.append(f"leg {k}: bad indices")
                break
            walk = self.fp(here, st[g.enter])
            if walk == INF:
                probs.append(f"leg {k}: no footpath to boarding stop")
            elif t_here is not None and t_here + walk > self.trip_dep[g.trip][g.enter]:
                probs.append(f"leg {k}: boarding missed")
            here, t_here = st[g.exit], self.trip_arr[g.trip][g.exit]
        if self.fp(here, j.target) == INF:
            probs.append("no final footpath")
        return probs


def validate_timetable(tt: Timetable) -> list[str]:
    """Check the built model's invariants; returns violations with locations."""
    out = []
    for T in range(tt.n_trips):
        arr, dep = tt.trip_arr[T], tt.trip_dep[T]
        for i in range(len(arr)):
            if arr[i] > dep[i] or (i and arr[i] < dep[i - 1]):
                out.append(f"trip {tt.trip_ids[T]!r} event {i}: non-monotone trip times")
    for l, trips in enumerate(tt.line_trips):
        for a, b in zip(trips, trips[1:]):
            if tt.trip_stops[a] != tt.trip_stops[b]:
                out.append(f"line {l}: trips with different stop sequences")
            elif not _precedes((tt.trip_arr[a], tt.trip_dep[a]), (tt.trip_arr[b], tt.trip_dep[b])):
                out.append(f"line {l}: {tt.trip_ids[b]!r} does not strictly follow {tt.trip_ids[a]!r}")
    name = tt.stop_ids
    for p, fp in enumerate(tt.footpaths):
        if fp.get(p) != 0:
            out.append(f"missing self footpath at {name[p]}")
        for q, d in fp.items():
            if q != p and d <= 0:
                out.append(f"non-positive footpath ({name[p]},{name[q]})")
            for r, e in tt.footpaths[q].items():
                if r != p and fp.get(r, INF) > d + e:
                    out.append(f"closure violated at ({name[p]},{name[r]})")
    for e in range(1, tt.n_events):
        a, b = (tt.ev_trip[e - 1], tt.ev_idx[e - 1]), (tt.ev_trip[e], tt.ev_idx[e])
        if a >= b:
            out.append(f"event order broken at {e}")
    return out


def build_timetable(raw: RawTimetable, max_component: int = DEFAULT_MAX_COMPONENT,
                    horizon: int = HORIZON) -> Timetable:
    problems = validate_raw(raw, horizon)
    if problems:
        raise TimetableError("; ".join(problems[:10]))
    stop_ids = sorted(raw.stops)
    sidx = {s: i for i, s in enumerate(stop_ids)}
    trips = []
    for t in raw.trips:
        trips.append(([sidx[e[0]] for e in t.events], [int(e[1]) for e in t.events],
                      [int(e[2]) for e in t.events]))
    lines = build_lines(trips)

    def key(ln):
        t0 = trips[ln[0]]
        return (tuple(stop_ids[p] for p in t0[0]), t0[2][0], tuple(t0[1]), raw.trips[ln[0]].id)

    lines.sort(key=key)
    order = [k for ln in lines for k in ln]
    line_trips, pos = [], 0
    for ln in lines:
        line_trips.append(list(range(pos, pos + len(ln))))
        pos += len(ln)
    edges = [(sidx[a], sidx[b], int(d)) for a, b, d in raw.footpaths]
    fps = close_footpaths(len(stop_ids), edges, max_component)
    return Timetable(
        stop_ids,
        [raw.trips[k].id for k in order],
        [trips[k][0] for k in order],
        [trips[k][1] for k in order],
        [trips[k][2] for k in order],
        line_trips,
        fps,
        raw_footpaths=[(a, b, d) for a, b, d in edges if a != b],
    )
