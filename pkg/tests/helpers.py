"""Brute-force references used only by the tests."""
import itertools

from flashtb.timetable import INF, Journey, Leg


def floyd_warshall(n, edges):
    d = [[INF] * n for _ in range(n)]
    for p in range(n):
        d[p][p] = 0
    for a, b, w in edges:
        d[a][b] = min(d[a][b], w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def min_chain_partition(vectors, precedes):
    """Exhaustive search for the least number of chains covering ``vectors``."""
    n = len(vectors)
    best = [n]

    def go(k, chains):
        if len(chains) >= best[0]:
            return
        if k == n:
            best[0] = len(chains)
            return
        for c in chains:
            if precedes(vectors[c[-1]], vectors[k]):
                c.append(k)
                go(k + 1, chains)
                c.pop()
        chains.append([k])
        go(k + 1, chains)
        chains.pop()

    order = sorted(range(n), key=lambda i: vectors[i])
    vectors = [vectors[i] for i in order]
    go(0, [])
    return best[0]


def enumerate_journeys(tt, s, tau, max_trips):
    """Every journey from ``s`` departing no earlier than ``tau`` (DFS)."""
    out = []

    def extend(legs, at, ready):
        for T in range(tt.n_trips):
            stops, arr, dep = tt.trip_stops[T], tt.trip_arr[T], tt.trip_dep[T]
            for i in range(len(stops) - 1):
                d = tt.fp(at, stops[i])
                if d == INF or ready + d > dep[i]:
                    continue
                for j in range(i + 1, len(stops)):
                    nl = legs + (Leg(T, i, j),)
                    out.append(nl)
                    if len(nl) < max_trips:
                        extend(nl, stops[j], arr[j])

    extend((), s, tau)
    return out


def brute_front(tt, s, t, tau, max_trips):
    best = {}
    walk = tt.fp(s, t)
    if walk < INF:
        best[0] = tau + walk
    for legs in enumerate_journeys(tt, s, tau, max_trips):
        last = legs[-1]
        q = tt.trip_stops[last.trip][last.exit]
        d = tt.fp(q, t)
        if d == INF:
            continue
        a = tt.trip_arr[last.trip][last.exit] + d
        best[len(legs)] = min(best.get(len(legs), INF), a)
    out, cur = [], INF
    for m in sorted(best):
        if best[m] < cur:
            out.append((best[m], m))
            cur = best[m]
    return out


def all_event_pairs(tt):
    return itertools.product(range(tt.n_events), repeat=2)


def ev(tt, trip, i):
    """Event id of external trip ``trip`` at position ``i``."""
    return tt.event(tt.trip(trip), i)
