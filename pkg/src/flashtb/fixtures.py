"""Small example networks and seeded random generators."""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .io import raw_from_json
from .timetable import RawTimetable, RawTrip, Timetable, build_timetable

FIXTURES = ("fig1-net", "fig2-net", "fig3-net")


def fixture_path(name: str):
    return resources.files("flashtb") / "data" / f"{name}.json"


def fixture_raw(name: str) -> RawTimetable:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}")
    return raw_from_json(json.loads(fixture_path(name).read_text()))


def fixture(name: str) -> Timetable:
    return build_timetable(fixture_raw(name))


def random_raw(seed: int, n_stops: int = 10, n_trips: int = 16, n_footpaths: int = 6,
               n_routes: int | None = None, step: int = 5, max_len: int = 5) -> RawTimetable:
    """A small random network with coarse times so that ties are common."""
    rng = np.random.default_rng(seed)
    stops = [f"s{i:02d}" for i in range(n_stops)]
    n_routes = n_routes or max(2, n_trips // 3)
    routes = []
    for _ in range(n_routes):
        length = int(rng.integers(2, max_len + 1))
        seq = rng.choice(n_stops, size=min(length, n_stops), replace=False).tolist()
        hops = (rng.integers(1, 5, size=len(seq) - 1) * step).tolist()
        routes.append((seq, hops))
    trips = []
    for k in range(n_trips):
        seq, hops = routes[int(rng.integers(len(routes)))]
        t = int(rng.integers(0, 24)) * step
        events = []
        for i, p in enumerate(seq):
            arr = t
            dwell = step if rng.random() < 0.15 else 0
            dep = arr + dwell
            events.append((stops[p], arr, dep))
            if i < len(hops):
                jitter = step if rng.random() < 0.2 else 0
                t = dep + hops[i] + jitter
        trips.append(RawTrip(f"t{k:02d}", events))
    fps = set()
    tries = 0
    while len(fps) < n_footpaths and tries < 100:
        tries += 1
        a, b = rng.choice(n_stops, size=2, replace=False).tolist()
        fps.add((stops[a], stops[b], int(rng.integers(1, 4)) * step // 2 + 1))
    return RawTimetable(stops, trips, sorted(fps))


def random_network(seed: int, **kw) -> Timetable:
    return build_timetable(random_raw(seed, **kw))


def synthetic_raw(seed: int = 7, rows: int = 10, cols: int = 20, period: int = 600,
                  span: int = 3 * 3600, hop: int = 120) -> RawTimetable:
    """A grid city: every row and column is a bidirectional line.

    Stops ``g{r}_{c}``; lines run the full row or column with a fixed headway
    and a seeded offset, and neighbouring stops in a few places are joined
    by short footpaths.
    """
    rng = np.random.default_rng(seed)
    name = [[f"g{r:02d}_{c:02d}" for c in range(cols)] for r in range(rows)]
    stops = [x for row in name for x in row]
    trips = []

    def add_line(seq, tag):
        off = int(rng.integers(0, period // 60)) * 60
        h = hop + int(rng.integers(0, 3)) * 30
        for k, start in enumerate(range(off, span, period)):
            t = start
            ev = []
            for p in seq:
                ev.append((p, t, t + 30))
                t += 30 + h
            trips.append(RawTrip(f"{tag}-{k}", ev))

    for r in range(rows):
        seq = name[r]
        add_line(seq, f"r{r}f")
        add_line(seq[::-1], f"r{r}b")
    for c in range(cols):
        seq = [name[r][c] for r in range(rows)]
        add_line(seq, f"c{c}f")
        add_line(seq[::-1], f"c{c}b")
    fps = []
    for _ in range(rows * cols // 10):
        r, c = int(rng.integers(rows - 1)), int(rng.integers(cols - 1))
        fps.append((name[r][c], name[r + 1][c + 1], 240))
        fps.append((name[r + 1][c + 1], name[r][c], 240))
    return RawTimetable(stops, trips, sorted(set(fps)))


def synthetic_network(seed: int = 7, **kw) -> Timetable:
    return build_timetable(synthetic_raw(seed, **kw))
