"""Brute-force reference answers.

Nothing here touches transfer sets or the search engines.  The oracle runs a
dynamic program over (trips used, stop event) states for one source and one
departure time and keeps, per state, both the earliest arrival and the
lexicographically smallest tiebreaking sequence.  That is slow but obviously
right, which is the point.
"""
from __future__ import annotations

from dataclasses import dataclass

from .timetable import INF, Journey, Leg, Timetable


class OracleBudgetError(RuntimeError):
    """Enumeration produced more journeys than allowed."""


def possible_departures(tt: Timetable, s: int, lo=-INF, hi=INF) -> list[int]:
    """Departure times at ``s`` that catch some trip exactly (walking included)."""
    out = set()
    for t in range(tt.n_trips):
        stops, dep = tt.trip_stops[t], tt.trip_dep[t]
        for i in range(len(stops) - 1):
            d = tt.fp(s, stops[i])
            if d < INF and lo <= dep[i] - d <= hi:
                out.add(dep[i] - d)
    return sorted(out)


def tiebreak_key(tt: Timetable, j: Journey) -> tuple:
    """The sequence X(J) used to pick one journey among equal-cost ones.

    Built from the last stop backwards: a trip leg contributes
    ``(arrival, id_E(entry), inf)`` and a non-empty footpath after a trip
    contributes ``(arrival, inf, id_E(exit))``.  An initial walk to another
    stop contributes ``(arrival, inf, inf)``.
    """
    if not j.legs:
        return ()
    key: list = []
    legs = j.legs
    last = legs[-1]
    ex = tt.trip_stops[last.trip][last.exit]
    if ex != j.target:
        key.append((tt.trip_arr[last.trip][last.exit] + tt.fp(ex, j.target), INF,
                    tt.id_E(last.trip, last.exit)))
    for k in range(len(legs) - 1, -1, -1):
        g = legs[k]
        key.append((tt.trip_arr[g.trip][g.exit], tt.id_E(g.trip, g.enter), INF))
        board = tt.trip_stops[g.trip][g.enter]
        if k > 0:
            h = legs[k - 1]
            hx = tt.trip_stops[h.trip][h.exit]
            if hx != board:
                key.append((tt.trip_arr[h.trip][h.exit] + tt.fp(hx, board), INF,
                            tt.id_E(h.trip, h.exit)))
        elif board != j.source:
            key.append((tt.trip_dep[g.trip][g.enter], INF, INF))
    return tuple(x for triple in key for x in triple)


@dataclass
class _Canon:
    arr: float
    key: tuple
    journey_legs: tuple  # legs of the prefix journey ending here


class Oracle:
    """Reference answers for one timetable with a trip cap ``max_rounds``."""

    def __init__(self, tt: Timetable, max_rounds: int = 8):
        self.tt = tt
        self.max_rounds = max_rounds

    # -- earliest arrival tables -------------------------------------------------
    def arrival_table(self, s: int, tau) -> list[list[float]]:
        """A[m][q]: earliest arrival at q using exactly m trips (m = 0..cap)."""
        tt = self.tt
        n = tt.n_stops
        first = [INF] * n
        for q, d in tt.footpaths[s].items():
            first[q] = tau + d
        table = [first]
        for m in range(1, self.max_rounds + 1):
            prev = table[-1]
            cur = [INF] * n
            any_exit = False
            for t in range(tt.n_trips):
                stops, arr, dep = tt.trip_stops[t], tt.trip_arr[t], tt.trip_dep[t]
                entry_stops: set = set()
                for j in range(len(stops)):
                    p = stops[j]
                    if entry_stops and (len(entry_stops) > 1 or p not in entry_stops):
                        any_exit = True
                        a = arr[j]
                        for q, d in tt.footpaths[p].items():
                            if a + d < cur[q]:
                                cur[q] = a + d
                    if j < len(stops) - 1 and prev[p] <= dep[j]:
                        entry_stops.add(p)
            table.append(cur)
            if not any_exit:
                break
        while len(table) <= self.max_rounds:
            table.append([INF] * n)
        return table

    @staticmethod
    def front_from_column(col) -> list[tuple]:
        """Strictly improving (arrival, trips) pairs from per-round minima."""
        out, best = [], INF
        for m, a in enumerate(col):
            if a < best:
                out.append((a, m))
                best = a
        return out

    def pareto(self, s: int, t: int, tau) -> list[tuple]:
        table = self.arrival_table(s, tau)
        return self.front_from_column([row[t] for row in table])

    def one_to_all(self, s: int, tau) -> list[list[tuple]]:
        table = self.arrival_table(s, tau)
        return [self.front_from_column([row[q] for row in table]) for q in range(self.tt.n_stops)]

    def profile(self, s: int, t: int, lo=-INF, hi=INF) -> dict:
        """Front for every possible departure time in ``[lo, hi]``."""
        return {tau: self.pareto(s, t, tau) for tau in possible_departures(self.tt, s, lo, hi)}

    def profile_all(self, s: int, lo=-INF, hi=INF) -> dict:
        return {tau: self.one_to_all(s, tau) for tau in possible_departures(self.tt, s, lo, hi)}

    # -- canonical journeys --------------------------------------------------------
    def canonical_tables(self, s: int, tau):
        """Per round, the X-minimal journey to every stop (or None)."""
        tt = self.tt
        n = tt.n_stops
        walk = [None] * n
        for q, d in tt.footpaths[s].items():
            walk[q] = _Canon(tau + d, (), ())
        rounds = [walk]
        for m in range(1, self.max_rounds + 1):
            prev = rounds[-1]
            cur: list = [None] * n
            found = False
            for t in range(tt.n_trips):
                stops, arr, dep = tt.trip_stops[t], tt.trip_arr[t], tt.trip_dep[t]
                feas = []  # feasible entry indices, ascending
                for j in range(len(stops)):
                    p = stops[j]
                    ent = next((i for i in feas if stops[i] != p), None)
                    if ent is not None:
                        found = True
                        b = stops[ent]
                        pre = prev[b]
                        if m == 1:
                            pkey = () if b == s else (dep[ent], INF, INF)
                        else:
                            pkey = pre.key
                        legs = pre.journey_legs + (Leg(t, ent, j),)
                        ekey = (arr[j], tt.id_E(t, ent), INF) + pkey
                        for q, d in tt.footpaths[p].items():
                            if q == p:
                                c = _Canon(arr[j], ekey, legs)
                            else:
                                c = _Canon(arr[j] + d, (arr[j] + d, INF, tt.id_E(t, j)) + ekey, legs)
                            old = cur[q]
                            if old is None or (c.arr, c.key) < (old.arr, old.key):
                                cur[q] = c
                    if j < len(stops) - 1 and prev[p] is not None and prev[p].arr <= dep[j]:
                        feas.append(j)
            rounds.append(cur)
            if not found:
                break
        while len(rounds) <= self.max_rounds:
            rounds.append([None] * n)
        return rounds

    def canonical(self, s: int, t: int, tau) -> dict:
        """Canonical representative for each Pareto-optimal (arrival, trips) pair."""
        return self.canonical_all(s, tau)[t]

    def canonical_all(self, s: int, tau) -> list[dict]:
        rounds = self.canonical_tables(s, tau)
        out = []
        for q in range(self.tt.n_stops):
            res, best = {}, INF
            for m, row in enumerate(rounds):
                c = row[q]
                if c is not None and c.arr < best:
                    best = c.arr
                    res[(c.arr, m)] = Journey(s, q, c.journey_legs)
            out.append(res)
        return out

    def canonical_set(self, s: int, lo=-INF, hi=INF) -> set:
        """Every canonical Pareto-optimal journey from ``s`` over the range."""
        out = set()
        for tau in possible_departures(self.tt, s, lo, hi):
            for res in self.canonical_all(s, tau):
                out.update(j for j in res.values() if j.legs)
        return out

    # -- enumeration of equivalent journeys ---------------------------------------------
    def representatives(self, s: int, t: int, tau, budget: int = 10000) -> dict:
        """All journeys realising each Pareto-optimal cost pair."""
        tt = self.tt
        table = self.arrival_table(s, tau)
        count = [0]

        def prefixes(p, m, deadline):
            # journeys with exactly m trips from s arriving at p by deadline
            if m == 0:
                if table[0][p] <= deadline:
                    yield ()
                return
            if table[m][p] > deadline:
                return
            for t2 in range(tt.n_trips):
                stops, arr, dep = tt.trip_stops[t2], tt.trip_arr[t2], tt.trip_dep[t2]
                for j in range(1, len(stops)):
                    d = tt.fp(stops[j], p)
                    if arr[j] + d > deadline:
                        continue
                    for i in range(j):
                        if stops[i] == stops[j] or table[m - 1][stops[i]] > dep[i]:
                            continue
                        for pre in prefixes(stops[i], m - 1, dep[i]):
                            yield pre + (Leg(t2, i, j),)

        out = {}
        for a, m in self.front_from_column([row[t] for row in table]):
            js = []
            for legs in prefixes(t, m, a):
                j = Journey(s, t, legs)
                if j.arrival(tt, tau) != a:
                    continue
                js.append(j)
                count[0] += 1
                if count[0] > budget:
                    raise OracleBudgetError(f"more than {budget} representatives")
            out[(a, m)] = js
        return out

    # -- flags ----------------------------------------------------------------------------
    def flags(self, transfer_index: dict, cell_of, k: int) -> set:
        """(cell, transfer) pairs needed by canonical journeys to every stop.

        ``transfer_index`` maps (from_event, to_event) to a transfer id.
        """
        tt = self.tt
        need = set()
        for s in range(tt.n_stops):
            for j in self.canonical_set(s):
                for pair in j.transfers(tt):
                    if pair not in transfer_index:
                        raise KeyError(f"canonical journey uses missing transfer {pair}")
                    need.add((cell_of[j.target], transfer_index[pair]))
        return need
