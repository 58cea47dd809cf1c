"""Canonical Profile-TB.

A one-to-all profile search that, given a canonicity-preserving transfer
set, unpacks exactly the canonical journeys from a source.  Compared to plain
Profile-TB it adds a per-run reached index, ULTRA-style acceptance tests,
a fixed scan order and parent pointers per (trip, round) and (stop, round).
"""
from __future__ import annotations

from .tb import DEFAULT_MAX_ROUNDS, InvariantError
from .timetable import INF, Journey, Leg, Timetable
from .transfers import TransferSet


class CanonicalProfile:
    """Engine bound to one timetable and transfer set; reusable across sources.

    ``trace``, if a list, receives tuples describing every decision:
    ``("scan", tau, n, event)``, ``("arrival", tau, p, n, a, verdict)`` and
    ``("enqueue", tau, trip, j, n, verdict)`` where verdict is ``"ok"`` or the
    name of the rule that rejected the call.
    """

    def __init__(self, tt: Timetable, ts: TransferSet, max_rounds: int = DEFAULT_MAX_ROUNDS,
                 trace: list | None = None):
        self.tt = tt
        self.ts = ts
        self.M = max_rounds
        self.trace = trace
        self.t0, self.tfp = ts.split()
        self.trip_len = [len(x) for x in tt.trip_stops]
        self.line_last = [tt.line_trips[tt.trip_line[T]][-1] for T in range(tt.n_trips)]

    # -- state ----------------------------------------------------------------------
    def _reset_source(self, s: int):
        tt, M = self.tt, self.M
        self.s = s
        self.arr = [[INF] * tt.n_stops for _ in range(M + 1)]
        self.dep = [[None] * tt.n_stops for _ in range(M + 1)]
        self.par_stop = [[None] * tt.n_stops for _ in range(M + 1)]
        self.par_trip = [None] + [[None] * tt.n_trips for _ in range(M)]
        self.Rn = [None] + [self.trip_len[:] for _ in range(M)]

    # -- the two primitives -----------------------------------------------------------
    def add_arrival(self, p, n, a, tau, T, i) -> bool:
        arr, dep = self.arr, self.dep
        if arr[n][p] == a and dep[n][p] == tau:
            verdict = "T1"
        elif arr[n][p] < a:
            verdict = "T2a"
        elif n > 0 and arr[n - 1][p] <= a:
            verdict = "T2b"
        else:
            verdict = "ok"
        if self.trace is not None:
            self.trace.append(("arrival", tau, p, n, a, verdict))
        if verdict != "ok":
            return False
        # (p, n) itself is always written: an equal arrival from another run
        # must still take over the departure time and parent.
        arr[n][p], dep[n][p] = a, tau
        for m in range(n + 1, self.M + 1):
            if arr[m][p] <= a:
                break
            arr[m][p], dep[m][p] = a, tau
        self.par_stop[n][p] = None if T is None else (T, self.Rr[T] - 1, i)
        self.dirty.append((p, n))
        return True

    def enqueue(self, T, j, n, p, queue) -> bool:
        Rr, Rn = self.Rr, self.Rn
        if Rr[T] <= j:
            verdict = "E1"
        elif Rn[n][T] < j:
            verdict = "E2a"
        elif n > 1 and Rn[n - 1][T] <= j:
            verdict = "E2b"
        elif self.tt.trip_pos[T] > 0 and Rn[n][T - 1] <= j:
            verdict = "E2c"
        else:
            verdict = "ok"
        if self.trace is not None:
            self.trace.append(("enqueue", self.tau, T, j, n, verdict))
        if verdict != "ok":
            return False
        queue.append((T, j, Rr[T]))
        last = self.line_last[T]
        x = T
        while x <= last and Rr[x] > j:
            Rr[x] = j
            x += 1
        for m in range(n, self.M + 1):
            R = Rn[m]
            x = T
            while x <= last and R[x] > j:
                R[x] = j
                x += 1
        self.par_trip[n][T] = p
        return True

    # -- a run ------------------------------------------------------------------------------
    def _scan(self, n, queue, tau) -> list:
        tt, ts = self.tt, self.ts
        trip_arr, trip_stops, trip_ev0 = tt.trip_arr, tt.trip_stops, tt.trip_ev0
        arr = self.arr
        trace = self.trace
        queue.sort(key=lambda seg: trip_ev0[seg[0]] + seg[1])
        if trace is not None:
            for T, b, e in queue:
                for i in range(b, e):
                    trace.append(("scan", tau, n, trip_ev0[T] + i))
        add = self.add_arrival
        for T, b, e in queue:
            ar, st = trip_arr[T], trip_stops[T]
            for i in range(b, e):
                add(st[i], n, ar[i], tau, T, i)
        for T, b, e in queue:
            ar, st = trip_arr[T], trip_stops[T]
            for i in range(b, e):
                for q, d in tt.fp_out[st[i]]:
                    add(q, n, ar[i] + d, tau, T, i)
        nxt: list = []
        if n == self.M:
            return nxt
        to_trip, to_idx, walk = ts.to_trip, ts.to_idx, ts.walk_arr
        t0, tfp = self.t0, self.tfp
        for T, b, e in queue:
            ar, st, ev0 = trip_arr[T], trip_stops[T], trip_ev0[T]
            for i in range(b, e):
                p = st[i]
                if ar[i] > arr[n][p]:
                    continue
                for x in t0[ev0 + i]:
                    self.enqueue(to_trip[x], to_idx[x] + 1, n + 1, p, nxt)
        for T, b, e in queue:
            ar, st, ev0 = trip_arr[T], trip_stops[T], trip_ev0[T]
            for i in range(b, e):
                p = st[i]
                if ar[i] > arr[n][p]:
                    continue
                for x in tfp[ev0 + i]:
                    T2 = to_trip[x]
                    if walk[x] > arr[n][trip_stops[T2][to_idx[x]]]:
                        continue
                    self.enqueue(T2, to_idx[x] + 1, n + 1, p, nxt)
        return nxt

    def run(self, tau) -> list:
        """One run; returns the (stop, round) pairs to unpack."""
        tt, s = self.tt, self.s
        self.tau = tau
        self.Rr = self.trip_len[:]
        self.dirty = []
        queue: list = []
        for q, d in tt.footpaths[s].items():
            self.add_arrival(q, 0, tau + d, tau, None, None)
        for q, d in tt.footpaths[s].items():
            for l, i in tt.stop_lines[q]:
                if i == len(tt.line_stops[l]) - 1:
                    continue
                T = tt.earliest_trip(l, i, tau + d)
                if T is not None:
                    self.enqueue(T, i + 1, 1, s, queue)
        n = 1
        while queue and n <= self.M:
            queue = self._scan(n, queue, tau)
            n += 1
        out = []
        seen = set()
        for p, m in self.dirty:
            if (p, m) in seen:
                continue
            seen.add((p, m))
            if self.dep[m][p] == tau and (m == 0 or self.arr[m][p] < self.arr[m - 1][p]):
                out.append((p, m))
        return out

    def unpack(self, p, n) -> Journey:
        tt = self.tt
        if n == 0:
            return Journey(self.s, p, ())
        legs = []
        q, m = p, n
        while m > 0:
            seg = self.par_stop[m][q]
            if seg is None:
                raise InvariantError(f"no parent segment for stop {q} round {m}")
            T, enter, exit_ = seg
            if legs and tt.trip_stops[T][exit_] != q:
                raise InvariantError(f"broken parent chain at stop {q} round {m}")
            legs.append(Leg(T, enter, exit_))
            q = self.par_trip[m][T]
            if q is None:
                raise InvariantError(f"no parent stop for trip {T} round {m}")
            m -= 1
        if q != self.s:
            raise InvariantError("parent chain does not end at the source")
        return Journey(self.s, p, tuple(reversed(legs)))

    def profile(self, s: int, lo=-INF, hi=INF):
        """Yield ``(tau, stop, trips, journey)`` for every run, latest first."""
        self._reset_source(s)
        for tau in sorted(self.tt.departure_times(s, lo, hi), reverse=True):
            for p, n in self.run(tau):
                yield tau, p, n, self.unpack(p, n)


def run_canonical_profile(tt, ts, source, max_rounds=DEFAULT_MAX_ROUNDS, lo=-INF, hi=INF,
                          trace=None):
    return CanonicalProfile(tt, ts, max_rounds, trace).profile(source, lo, hi)
