"""Reading and writing timetables.

Three inputs are understood: a JSON interchange file, the ``FTTB`` binary
produced by :func:`write_timetable`, and a directory holding a GTFS subset.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .timetable import (DEFAULT_MAX_COMPONENT, HORIZON, ParseError, RawTimetable, RawTrip,
                        Timetable, build_timetable)

TT_MAGIC = b"FTTB"
TT_VERSION = 1
JSON_FORMAT = "flashtb-timetable"

_SECTIONS = ("STOP", "TRIP", "TOFF", "ESTP", "EARR", "EDEP", "LOFF", "FOFF", "FTGT", "FDUR",
             "RAWF")


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- JSON ------------------------------------------------------------------

def raw_to_json(raw: RawTimetable) -> dict:
    return {
        "format": JSON_FORMAT,
        "version": 1,
        "stops": list(raw.stops),
        "trips": [{"id": t.id, "events": [list(e) for e in t.events]} for t in raw.trips],
        "footpaths": [list(f) for f in raw.footpaths],
    }


def raw_from_json(doc: dict) -> RawTimetable:
    if doc.get("format") != JSON_FORMAT:
        raise ParseError("not a timetable JSON document")
    try:
        trips = [RawTrip(str(t["id"]), [(str(s), int(a), int(d)) for s, a, d in t["events"]])
                 for t in doc["trips"]]
        fps = [(str(a), str(b), int(d)) for a, b, d in doc.get("footpaths", [])]
        return RawTimetable([str(s) for s in doc["stops"]], trips, fps)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed timetable JSON: {e}") from None


def timetable_to_raw(tt: Timetable) -> RawTimetable:
    trips = [RawTrip(tt.trip_ids[t], [(tt.stop_ids[p], a, d) for p, a, d in
                                      zip(tt.trip_stops[t], tt.trip_arr[t], tt.trip_dep[t])])
             for t in range(tt.n_trips)]
    fps = [(tt.stop_ids[a], tt.stop_ids[b], d) for a, b, d in tt.raw_footpaths]
    return RawTimetable(list(tt.stop_ids), trips, fps)


# -- FTTB binary -------------------------------------------------------------

def _strings(xs) -> bytes:
    return "\x00".join(xs).encode("utf-8")


def _unstrings(b: bytes, n: int) -> list[str]:
    if n == 0:
        return []
    xs = b.decode("utf-8").split("\x00")
    if len(xs) != n:
        raise ParseError("string table length mismatch")
    return xs


def timetable_bytes(tt: Timetable) -> bytes:
    toff = np.cumsum([0] + [len(s) for s in tt.trip_stops]).astype("<u4")
    loff = np.cumsum([0] + [len(ts) for ts in tt.line_trips]).astype("<u4")
    foff = np.cumsum([0] + [len(x) for x in tt.fp_out]).astype("<u4")
    raw = np.array(tt.raw_footpaths, dtype="<i8").reshape(-1, 3).astype("<u4")
    sections = {
        "STOP": _strings(tt.stop_ids),
        "TRIP": _strings(tt.trip_ids),
        "TOFF": toff.tobytes(),
        "ESTP": np.asarray(tt.ev_stop, "<u4").tobytes(),
        "EARR": np.asarray(tt.ev_arr, "<i4").tobytes(),
        "EDEP": np.asarray(tt.ev_dep, "<i4").tobytes(),
        "LOFF": loff.tobytes(),
        "FOFF": foff.tobytes(),
        "FTGT": np.asarray([q for x in tt.fp_out for q, _ in x], "<u4").tobytes(),
        "FDUR": np.asarray([d for x in tt.fp_out for _, d in x], "<i4").tobytes(),
        "RAWF": raw.tobytes(),
    }
    out = [TT_MAGIC, struct.pack("<HHII", TT_VERSION, len(sections), tt.n_stops, tt.n_trips)]
    for tag in _SECTIONS:
        body = sections[tag]
        out.append(tag.encode("ascii") + struct.pack("<Q", len(body)) + body)
    return b"".join(out)


def write_timetable(tt: Timetable, path) -> None:
    Path(path).write_bytes(timetable_bytes(tt))


def _read_sections(data: bytes):
    if data[:4] != TT_MAGIC:
        raise ParseError("bad magic, not an FTTB file")
    if len(data) < 16:
        raise ParseError("truncated header")
    version, nsec, n_stops, n_trips = struct.unpack_from("<HHII", data, 4)
    if version != TT_VERSION:
        raise ParseError(f"unsupported FTTB version {version}")
    pos, sec = 16, {}
    for _ in range(nsec):
        if pos + 12 > len(data):
            raise ParseError("truncated section header")
        tag = data[pos:pos + 4].decode("ascii", "replace")
        (n,) = struct.unpack_from("<Q", data, pos + 4)
        pos += 12
        if pos + n > len(data):
            raise ParseError(f"truncated section {tag}")
        sec[tag] = data[pos:pos + n]
        pos += n
    missing = set(_SECTIONS) - set(sec)
    if missing:
        raise ParseError(f"missing sections {sorted(missing)}")
    return n_stops, n_trips, sec


def timetable_from_bytes(data: bytes) -> Timetable:
    n_stops, n_trips, sec = _read_sections(data)
    stops = _unstrings(sec["STOP"], n_stops)
    trip_ids = _unstrings(sec["TRIP"], n_trips)
    toff = np.frombuffer(sec["TOFF"], "<u4").tolist()
    est = np.frombuffer(sec["ESTP"], "<u4").tolist()
    ear = np.frombuffer(sec["EARR"], "<i4").tolist()
    edp = np.frombuffer(sec["EDEP"], "<i4").tolist()
    loff = np.frombuffer(sec["LOFF"], "<u4").tolist()
    foff = np.frombuffer(sec["FOFF"], "<u4").tolist()
    ftg = np.frombuffer(sec["FTGT"], "<u4").tolist()
    fdu = np.frombuffer(sec["FDUR"], "<i4").tolist()
    raw = np.frombuffer(sec["RAWF"], "<u4").reshape(-1, 3).tolist()
    if len(toff) != n_trips + 1 or toff[-1] != len(est) or len(foff) != n_stops + 1:
        raise ParseError("inconsistent FTTB offsets")
    if any(p >= n_stops for p in est) or any(q >= n_stops for q in ftg):
        raise ParseError("stop index out of range")
    fps = [{p: 0} for p in range(n_stops)]
    for p in range(n_stops):
        for k in range(foff[p], foff[p + 1]):
            fps[p][ftg[k]] = fdu[k]
    sl = [slice(toff[t], toff[t + 1]) for t in range(n_trips)]
    lines = [list(range(loff[l], loff[l + 1])) for l in range(len(loff) - 1)]
    return Timetable(stops, trip_ids, [est[s] for s in sl], [ear[s] for s in sl],
                     [edp[s] for s in sl], lines, fps, [tuple(r) for r in raw])


def read_timetable(path) -> Timetable:
    """Load a query-ready timetable from FTTB, JSON or a GTFS directory."""
    path = Path(path)
    if path.is_file() and path.read_bytes()[:4] == TT_MAGIC:
        return timetable_from_bytes(path.read_bytes())
    return build_timetable(parse_timetable(path))


# -- parsing -------------------------------------------------------------------

def parse_timetable(path) -> RawTimetable:
    """Parse raw entities from any supported input."""
    path = Path(path)
    if path.is_dir():
        return parse_gtfs(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    data = path.read_bytes()
    if data[:4] == TT_MAGIC:
        return timetable_to_raw(timetable_from_bytes(data))
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"unrecognised timetable file: {e}") from None
    return raw_from_json(doc)


def parse_gtfs_time(s: str) -> int:
    h, m, sec = s.strip().split(":")
    h, m, sec = int(h), int(m), int(sec)
    if h < 0 or not 0 <= m < 60 or not 0 <= sec < 60:
        raise ValueError(s)
    return h * 3600 + m * 60 + sec


def _rows(path: Path, required: tuple):
    with open(path, newline="", encoding="utf-8-sig") as f:
        rd = csv.DictReader(f)
        if rd.fieldnames is None:
            raise ParseError(f"{path.name}: empty file")
        missing = [c for c in required if c not in rd.fieldnames]
        if missing:
            raise ParseError(f"{path.name}: missing columns {missing}")
        for rowno, row in enumerate(rd, start=2):
            if None in row or any(row.get(c) is None for c in required):
                raise ParseError(f"{path.name} row {rowno}: wrong number of fields")
            yield rowno, row


def parse_gtfs(folder, horizon: int = HORIZON) -> RawTimetable:
    """Read stops, trips, stop_times and (optionally) transfers.

    Service calendars are ignored: every trip runs once.  Only transfers of
    type 2 between distinct stops become footpaths.
    """
    folder = Path(folder)
    for name in ("stops.txt", "trips.txt", "stop_times.txt"):
        if not (folder / name).exists():
            raise ParseError(f"missing {name}")
    stops = []
    for rowno, row in _rows(folder / "stops.txt", ("stop_id",)):
        if not row["stop_id"]:
            raise ParseError(f"stops.txt row {rowno}: empty stop_id")
        stops.append(row["stop_id"])
    known = set(stops)
    trip_ids = []
    for rowno, row in _rows(folder / "trips.txt", ("trip_id",)):
        trip_ids.append(row["trip_id"])
    events: dict = {t: [] for t in trip_ids}
    cols = ("trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence")
    for rowno, row in _rows(folder / "stop_times.txt", cols):
        try:
            arr = parse_gtfs_time(row["arrival_time"])
            dep = parse_gtfs_time(row["departure_time"])
            seq = int(row["stop_sequence"])
        except ValueError:
            raise ParseError(f"stop_times.txt row {rowno}: malformed time or sequence") from None
        if row["trip_id"] not in events:
            raise ParseError(f"stop_times.txt row {rowno}: unknown trip {row['trip_id']!r}")
        if row["stop_id"] not in known:
            raise ParseError(f"stop_times.txt row {rowno}: unknown stop {row['stop_id']!r}")
        events[row["trip_id"]].append((seq, row["stop_id"], arr, dep))
    trips = []
    for t in trip_ids:
        evs = sorted(events[t])
        if len(evs) < 2:
            raise ParseError(f"trip {t!r}: trip with <2 events")
        trips.append(RawTrip(t, [(s, a, d) for _, s, a, d in evs]))
    fps = []
    tf = folder / "transfers.txt"
    if tf.exists():
        for rowno, row in _rows(tf, ("from_stop_id", "to_stop_id", "transfer_type")):
            if row["transfer_type"].strip() != "2":
                continue
            a, b = row["from_stop_id"], row["to_stop_id"]
            if a not in known or b not in known:
                raise ParseError(f"transfers.txt row {rowno}: unknown stop")
            try:
                d = int(row.get("min_transfer_time") or "")
            except ValueError:
                raise ParseError(f"transfers.txt row {rowno}: malformed min_transfer_time") from None
            if a != b:
                fps.append((a, b, d))
    return RawTimetable(stops, trips, fps)


def import_timetable(src, max_component: int = DEFAULT_MAX_COMPONENT) -> Timetable:
    return build_timetable(parse_timetable(src), max_component=max_component)
