"""Trip-based query engines: one-to-one, one-to-all and profile search."""
from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter_ns

from .timetable import INF, Journey, Leg, Timetable
from .transfers import TransferSet

DEFAULT_MAX_ROUNDS = 15


class InvariantError(RuntimeError):
    """Internal consistency check failed; indicates a bug, not bad input."""


@dataclass
class QueryStats:
    rounds: int = 0
    scanned_trips: int = 0
    scanned_transfers: int = 0
    query_ns: int = 0
    unpack_ns: int = 0

    def add(self, other: "QueryStats"):
        self.rounds += other.rounds
        self.scanned_trips += other.scanned_trips
        self.scanned_transfers += other.scanned_transfers
        self.query_ns += other.query_ns
        self.unpack_ns += other.unpack_ns


@dataclass
class QueryResult:
    front: list
    journeys: dict = field(default_factory=dict)
    stats: QueryStats = field(default_factory=QueryStats)


def front_of(column) -> list:
    """(value, round) pairs where the value strictly improves on all fewer rounds."""
    out, best = [], INF
    for n, a in enumerate(column):
        if a < best:
            out.append((a, n))
            best = a
    return out


class TBEngine:
    """Trip-based search over a fixed transfer set.

    ``target_pruning`` and ``line_pruning`` exist so the tests can switch
    them off; answers must not change.
    """

    def __init__(self, tt: Timetable, ts: TransferSet, max_rounds: int = DEFAULT_MAX_ROUNDS,
                 target_pruning: bool = True, line_pruning: bool = True):
        self.tt = tt
        self.ts = ts
        self.max_rounds = max_rounds
        self.target_pruning = target_pruning
        self.line_pruning = line_pruning
        self.trip_len = [len(x) for x in tt.trip_stops]
        self.line_last = [tt.line_trips[tt.trip_line[T]][-1] for T in range(tt.n_trips)]
        self.out_ranges = [(ts.offsets[e], ts.offsets[e + 1]) for e in range(tt.n_events)]
        self.stats = QueryStats()
        self.queues: list = []
        #: when a list, every transfer id the one-to-one search dereferences
        self.deref_log: list | None = None

    # -- helpers --------------------------------------------------------------------
    def _check_stop(self, p):
        if not isinstance(p, int) or not 0 <= p < self.tt.n_stops:
            raise KeyError(f"unknown stop {p!r}")

    def _reset_reached(self):
        return self.trip_len[:]

    def _allowed(self, target):
        """Flag row for the target, or None to scan every transfer."""
        return None

    def _seed(self, s, tau, R, queue):
        tt = self.tt
        for q, d in tt.footpaths[s].items():
            at = tau + d
            for l, i in tt.stop_lines[q]:
                if i == len(tt.line_stops[l]) - 1:
                    continue
                T = tt.earliest_trip(l, i, at)
                if T is not None:
                    self._enqueue(T, i + 1, R, queue, None)

    def _enqueue(self, T, j, R, queue, parent):
        r = R[T]
        if r <= j:
            return
        queue.append((T, j, r, parent))
        if self.line_pruning:
            last = self.line_last[T]
            while T <= last and R[T] > j:
                R[T] = j
                T += 1
        else:
            R[T] = j

    def unpack(self, s, t, ref) -> Journey:
        """Follow parent pointers from a (round, offset, exit) triple."""
        legs = []
        while ref is not None:
            n, k, i = ref
            try:
                T, b, e, parent = self.queues[n][k]
            except (IndexError, TypeError):
                raise InvariantError(f"dangling parent pointer {ref}") from None
            if not b <= i < e:
                raise InvariantError(f"exit {i} outside segment [{b},{e})")
            legs.append(Leg(T, b - 1, i))
            ref = parent
        return Journey(s, t, tuple(reversed(legs)))

    # -- one-to-one ---------------------------------------------------------------
    def query(self, s: int, t: int, tau, unpack: bool = True) -> QueryResult:
        self._check_stop(s)
        self._check_stop(t)
        tt = self.tt
        st = QueryStats()
        t0 = perf_counter_ns()
        allowed = self._allowed(t)
        trip_arr, trip_stops, trip_ev0 = tt.trip_arr, tt.trip_stops, tt.trip_ev0
        out_ranges = self.out_ranges
        to_trip, to_idx = self.ts.to_trip, self.ts.to_idx
        fp_t = dict(tt.fp_in[t])
        fp_t[t] = 0
        tmin = tau + tt.fp(s, t)
        front, refs = [], {}
        if tmin < INF:
            front.append((tmin, 0))
            refs[(tmin, 0)] = None
        prune = self.target_pruning
        log = self.deref_log
        R = self._reset_reached()
        queue: list = []
        self.queues = queues = [None, queue]
        self._seed(s, tau, R, queue)
        enqueue = self._enqueue
        n = 1
        while queue and n <= self.max_rounds:
            st.rounds = n
            st.scanned_trips += len(queue)
            ref = None
            for k, (T, b, e, _) in enumerate(queue):
                arr, stops = trip_arr[T], trip_stops[T]
                for i in range(b, e):
                    a = arr[i]
                    if a >= tmin:
                        if prune:
                            break
                        continue
                    d = fp_t.get(stops[i])
                    if d is not None and a + d < tmin:
                        tmin = a + d
                        ref = (n, k, i)
            if ref is not None:
                front.append((tmin, n))
                refs[(tmin, n)] = ref
            if n == self.max_rounds:
                break
            nxt: list = []
            queues.append(nxt)
            for k, (T, b, e, _) in enumerate(queue):
                arr, ev0 = trip_arr[T], trip_ev0[T]
                for i in range(b, e):
                    if arr[i] >= tmin and prune:
                        break
                    lo, hi = out_ranges[ev0 + i]
                    for x in range(lo, hi):
                        if allowed is not None and not allowed[x]:
                            continue
                        if log is not None:
                            log.append(x)
                        st.scanned_transfers += 1
                        enqueue(to_trip[x], to_idx[x] + 1, R, nxt, (n, k, i))
            queue = nxt
            n += 1
        st.query_ns = perf_counter_ns() - t0
        journeys = {}
        if unpack:
            t1 = perf_counter_ns()
            journeys = {c: self.unpack(s, t, r) for c, r in refs.items()}
            st.unpack_ns = perf_counter_ns() - t1
        self.stats = st
        return QueryResult(front, journeys, st)

    # -- one-to-all -------------------------------------------------------------------
    def one_to_all(self, s: int, tau, unpack: bool = False):
        """Per-stop arrival table with local pruning.

        Returns ``(table, result)`` where ``table[n][p]`` is the earliest arrival at
        ``p`` with at most ``n`` trips and ``result.front`` holds per-stop fronts.
        """
        self._check_stop(s)
        tt = self.tt
        st = QueryStats()
        t0 = perf_counter_ns()
        trip_arr, trip_stops, trip_ev0 = tt.trip_arr, tt.trip_stops, tt.trip_ev0
        footpaths = tt.footpaths
        out_ranges = self.out_ranges
        to_trip, to_idx = self.ts.to_trip, self.ts.to_idx
        best = [INF] * tt.n_stops
        refs = {}
        for q, d in footpaths[s].items():
            best[q] = tau + d
            refs[(q, 0)] = None
        table = [best[:]]
        R = self._reset_reached()
        queue: list = []
        self.queues = queues = [None, queue]
        self._seed(s, tau, R, queue)
        n = 1
        enqueue = self._enqueue
        while queue and n <= self.max_rounds:
            st.rounds = n
            st.scanned_trips += len(queue)
            for k, (T, b, e, _) in enumerate(queue):
                arr, stops = trip_arr[T], trip_stops[T]
                for i in range(b, e):
                    a = arr[i]
                    for q, d in footpaths[stops[i]].items():
                        if a + d < best[q]:
                            best[q] = a + d
                            refs[(q, n)] = (n, k, i)
            table.append(best[:])
            if n == self.max_rounds:
                break
            nxt: list = []
            queues.append(nxt)
            for k, (T, b, e, _) in enumerate(queue):
                arr, stops, ev0 = trip_arr[T], trip_stops[T], trip_ev0[T]
                for i in range(b, e):
                    if arr[i] > best[stops[i]]:
                        continue
                    lo, hi = out_ranges[ev0 + i]
                    for x in range(lo, hi):
                        st.scanned_transfers += 1
                        enqueue(to_trip[x], to_idx[x] + 1, R, nxt, (n, k, i))
            queue = nxt
            n += 1
        while len(table) <= self.max_rounds:
            table.append(best[:])
        st.query_ns = perf_counter_ns() - t0
        fronts = [front_of([row[p] for row in table]) for p in range(tt.n_stops)]
        journeys = {}
        if unpack:
            for p, fr in enumerate(fronts):
                for a, m in fr:
                    journeys[(p, a, m)] = self.unpack(s, p, refs[(p, m)])
        self.stats = st
        return table, QueryResult(fronts, journeys, st)

    # -- profile -------------------------------------------------------------------------
    def profile(self, s: int, t: int | None = None, lo=-INF, hi=INF, trace: list | None = None):
        """Profile search with self-pruning over all departures in ``[lo, hi]``.

        With a target, returns ``{tau: front}``; without one, ``{tau: [front per stop]}``.
        ``trace`` (if given) collects ``(tau, stop, round, arrival)`` for arrivals
        discarded only because an earlier run already reached the same cost.
        """
        self._check_stop(s)
        if t is not None:
            self._check_stop(t)
        tt = self.tt
        M = self.max_rounds
        st = QueryStats()
        t0 = perf_counter_ns()
        allowed = self._allowed(t) if t is not None else None
        trip_arr, trip_stops, trip_ev0 = tt.trip_arr, tt.trip_stops, tt.trip_ev0
        out_ranges = self.out_ranges
        to_trip, to_idx = self.ts.to_trip, self.ts.to_idx
        line_last = self.line_last
        targets = [t] if t is not None else list(range(tt.n_stops))
        # arr[n][p] for tracked stops p, n = 0..M ; labdep remembers which run set it
        arrn = [[INF] * tt.n_stops for _ in range(M + 1)]
        labdep = [[None] * tt.n_stops for _ in range(M + 1)]
        Rn = [None] + [self.trip_len[:] for _ in range(M)]
        if t is not None:
            fp_t = dict(tt.fp_in[t])
            fp_t[t] = 0
        out = {}

        def improve(p, n, a, tau):
            if a >= arrn[n][p]:
                if trace is not None and a == arrn[n][p] and labdep[n][p] != tau \
                        and (n == 0 or arrn[n - 1][p] > a):
                    trace.append((tau, p, n, a))
                return False
            for m in range(n, M + 1):
                if arrn[m][p] <= a:
                    break
                arrn[m][p] = a
                labdep[m][p] = tau
            return True

        def enqueue(T, j, n, queue):
            R = Rn[n]
            if R[T] <= j:
                return
            queue.append((T, j, R[T]))
            last = line_last[T]
            for m in range(n, M + 1):
                Rm = Rn[m]
                x = T
                while x <= last and Rm[x] > j:
                    Rm[x] = j
                    x += 1

        for tau in sorted(tt.departure_times(s, lo, hi), reverse=True):
            for p in targets:
                d = tt.fp(s, p)
                if d < INF:
                    improve(p, 0, tau + d, tau)
            queue: list = []
            for q, d in tt.footpaths[s].items():
                for l, i in tt.stop_lines[q]:
                    if i == len(tt.line_stops[l]) - 1:
                        continue
                    T = tt.earliest_trip(l, i, tau + d)
                    if T is not None:
                        enqueue(T, i + 1, 1, queue)
            n = 1
            while queue and n <= M:
                st.rounds += 1
                st.scanned_trips += len(queue)
                if t is not None:
                    for T, b, e in queue:
                        arr, stops = trip_arr[T], trip_stops[T]
                        for i in range(b, e):
                            a = arr[i]
                            d = fp_t.get(stops[i])
                            if d is not None:
                                improve(t, n, a + d, tau)
                            if a >= arrn[n][t]:
                                break
                else:
                    for T, b, e in queue:
                        arr, stops = trip_arr[T], trip_stops[T]
                        for i in range(b, e):
                            a = arr[i]
                            for q, d in tt.footpaths[stops[i]].items():
                                improve(q, n, a + d, tau)
                if n == M:
                    break
                nxt: list = []
                for T, b, e in queue:
                    arr, stops, ev0 = trip_arr[T], trip_stops[T], trip_ev0[T]
                    for i in range(b, e):
                        if t is not None:
                            if arr[i] >= arrn[n][t]:
                                break
                        elif arr[i] > arrn[n][stops[i]]:
                            continue
                        lo_, hi_ = out_ranges[ev0 + i]
                        for x in range(lo_, hi_):
                            if allowed is not None and not allowed[x]:
                                continue
                            st.scanned_transfers += 1
                            enqueue(to_trip[x], to_idx[x] + 1, n + 1, nxt)
                queue = nxt
                n += 1
            if t is not None:
                out[tau] = front_of([arrn[m][t] for m in range(M + 1)])
            else:
                out[tau] = [front_of([arrn[m][p] for m in range(M + 1)]) for p in range(tt.n_stops)]
        st.query_ns = perf_counter_ns() - t0
        self.stats = st
        return out


def tb_query(tt, ts, s, t, tau, max_rounds=DEFAULT_MAX_ROUNDS, **kw) -> QueryResult:
    return TBEngine(tt, ts, max_rounds, **kw).query(s, t, tau)


def one_to_all_query(tt, ts, s, tau, max_rounds=DEFAULT_MAX_ROUNDS):
    return TBEngine(tt, ts, max_rounds).one_to_all(s, tau)


def profile_query_tb(tt, ts, s, t=None, lo=-INF, hi=INF, max_rounds=DEFAULT_MAX_ROUNDS, trace=None):
    return TBEngine(tt, ts, max_rounds).profile(s, t, lo, hi, trace=trace)
