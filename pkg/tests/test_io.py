import csv
import json
from pathlib import Path

import pytest

from flashtb.fixtures import FIXTURES, fixture, fixture_raw, random_network
from flashtb.io import (import_timetable, parse_gtfs, parse_timetable, raw_from_json, raw_to_json,
                        read_timetable, timetable_bytes, timetable_from_bytes, timetable_to_raw,
                        write_timetable)
from flashtb.timetable import ParseError, TimetableError, build_timetable


def _same(a, b):
    return (a.stop_ids == b.stop_ids and a.trip_ids == b.trip_ids and a.trip_stops == b.trip_stops
            and a.trip_arr == b.trip_arr and a.trip_dep == b.trip_dep
            and a.line_trips == b.line_trips and a.footpaths == b.footpaths
            and a.raw_footpaths == b.raw_footpaths)


def write_gtfs(folder: Path, stops, trips, transfers=()):
    folder.mkdir(parents=True, exist_ok=True)
    with open(folder / "stops.txt", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["stop_id", "stop_name"])
        for s in stops:
            w.writerow([s, s.upper()])
    with open(folder / "trips.txt", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["route_id", "service_id", "trip_id"])
        for t in trips:
            w.writerow(["r", "daily", t])
    with open(folder / "stop_times.txt", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"])
        for t, evs in trips.items():
            for seq, (s, a, d) in enumerate(evs, start=1):
                w.writerow([t, a, d, s, seq])
    if transfers:
        with open(folder / "transfers.txt", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time"])
            for row in transfers:
                w.writerow(row)


def small_feed(tmp_path):
    folder = tmp_path / "feed"
    write_gtfs(folder, ["a", "b", "c", "d"], {
        "t1": [("a", "08:00:00", "08:00:00"), ("b", "08:10:00", "08:11:00"), ("c", "08:20:00", "08:20:00")],
        "t2": [("a", "08:30:00", "08:30:00"), ("b", "08:40:00", "08:41:00"), ("c", "08:50:00", "08:50:00")],
        "t3": [("d", "24:10:00", "24:10:00"), ("a", "24:30:00", "24:30:00")],
    }, [("b", "d", "2", "120"), ("c", "c", "2", "60"), ("a", "c", "1", "")])
    return folder


def test_gtfs_parse_counts(tmp_path):
    folder = small_feed(tmp_path)
    raw = parse_gtfs(folder)
    # independent count straight from the text files
    n_stops = sum(1 for _ in open(folder / "stops.txt")) - 1
    n_trips = sum(1 for _ in open(folder / "trips.txt")) - 1
    n_events = sum(1 for _ in open(folder / "stop_times.txt")) - 1
    assert len(raw.stops) == n_stops
    assert len(raw.trips) == n_trips
    assert sum(len(t.events) for t in raw.trips) == n_events
    assert raw.footpaths == [("b", "d", 120)]
    tt = build_timetable(raw)
    assert tt.n_lines == 2
    assert tt.trip_arr[tt.trip("t3")][1] == 24 * 3600 + 30 * 60


def test_gtfs_empty_stop_times(tmp_path):
    folder = tmp_path / "feed"
    write_gtfs(folder, ["a"], {"t1": []})
    with pytest.raises(ParseError, match="trip with <2 events"):
        parse_gtfs(folder)


def test_gtfs_malformed_row_has_row_number(tmp_path):
    folder = small_feed(tmp_path)
    with open(folder / "stop_times.txt", "a") as f:
        f.write("t1,xx:00,08:00:00,a,9\n")
    with pytest.raises(ParseError, match="row 10"):
        parse_gtfs(folder)


def test_gtfs_dangling_stop(tmp_path):
    folder = tmp_path / "feed"
    write_gtfs(folder, ["a"], {"t1": [("a", "08:00:00", "08:00:00"), ("zz", "08:05:00", "08:05:00")]})
    with pytest.raises(ParseError, match="unknown stop 'zz'"):
        parse_gtfs(folder)


def test_gtfs_missing_file(tmp_path):
    (tmp_path / "x").mkdir()
    with pytest.raises(ParseError, match="missing stops.txt"):
        parse_gtfs(tmp_path / "x")


@pytest.mark.parametrize("name", FIXTURES)
def test_json_roundtrip(name):
    raw = fixture_raw(name)
    assert raw_from_json(json.loads(json.dumps(raw_to_json(raw)))) == raw


@pytest.mark.parametrize("seed", range(4))
def test_binary_roundtrip_bit_exact(tmp_path, seed):
    tt = random_network(seed)
    data = timetable_bytes(tt)
    back = timetable_from_bytes(data)
    assert _same(tt, back)
    assert timetable_bytes(back) == data
    p = tmp_path / "tt.fttb"
    write_timetable(tt, p)
    assert p.read_bytes() == data
    assert _same(read_timetable(p), tt)


def test_parse_timetable_dispatch(tmp_path):
    tt = fixture("fig2-net")
    p = tmp_path / "tt.fttb"
    write_timetable(tt, p)
    assert _same(build_timetable(parse_timetable(p)), tt)
    js = tmp_path / "tt.json"
    js.write_text(json.dumps(raw_to_json(timetable_to_raw(tt))))
    assert _same(import_timetable(js), tt)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\x00\x01garbage")
    with pytest.raises(ParseError):
        parse_timetable(bad)


def test_truncated_binary_rejected():
    data = timetable_bytes(fixture("fig1-net"))
    with pytest.raises(ParseError):
        timetable_from_bytes(data[:-7])


def test_invalid_json_timetable_rejected(tmp_path):
    p = tmp_path / "t.json"
    doc = raw_to_json(fixture_raw("fig1-net"))
    doc["trips"][0]["events"][2][1] = 1
    p.write_text(json.dumps(doc))
    with pytest.raises(TimetableError):
        import_timetable(p)
