import json
import threading
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer

import pytest

from xbooking import ingest
from xbooking.errors import NotFound, ParseError, TransportError
from xbooking.ingest import DataSource, fetch_file
from helpers import Stream


class _CountingHandler(SimpleHTTPRequestHandler):
    hits = []

    def do_GET(self):
        type(self).hits.append(self.path)
        if self.path.endswith("boom.json"):
            self.send_error(500)
            return
        super().do_GET()

    def log_message(self, *args):
        pass


@pytest.fixture
def http_base(synthetic_root):
    handler = type("H", (_CountingHandler,), {"hits": []})
    server = ThreadingHTTPServer(("127.0.0.1", 0), partial(handler, directory=str(synthetic_root)))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/", handler
    server.shutdown()
    server.server_close()


# -- fetching --------------------------------------------------------------------

def test_local_passthrough(synthetic_root):
    expected = (synthetic_root / "competitions.json").read_bytes()
    assert fetch_file(str(synthetic_root), "competitions.json") == expected


def test_local_missing_raises(synthetic_root):
    with pytest.raises(NotFound):
        fetch_file(str(synthetic_root), "events/999999999.json")


def test_remote_cache_idempotence(http_base, tmp_path, synthetic_root):
    base, handler = http_base
    match_file = sorted((synthetic_root / "events").iterdir())[0]
    rel = f"events/{match_file.name}"
    src = DataSource(base, tmp_path / "cache")
    first = src.read(rel)
    assert first == match_file.read_bytes()
    assert src.downloads == 1 and len(handler.hits) == 1
    second = DataSource(base, tmp_path / "cache").read(rel)
    assert second == first
    assert len(handler.hits) == 1, "warm cache must not hit the network"
    assert (tmp_path / "cache" / rel).read_bytes() == first
    assert not list((tmp_path / "cache" / "events").glob("*.part"))


def test_remote_not_found_and_server_error(http_base, tmp_path):
    base, _ = http_base
    src = DataSource(base, tmp_path)
    with pytest.raises(NotFound):
        src.read("events/999999999.json")
    with pytest.raises(TransportError):
        src.read("boom.json")
    assert not (tmp_path / "events" / "999999999.json").exists()


def test_unreachable_host_is_transport_error(tmp_path):
    src = DataSource("http://127.0.0.1:9/", tmp_path, timeout=2)
    with pytest.raises(TransportError):
        src.read("competitions.json")


def test_env_defaults(monkeypatch, tmp_path):
    monkeypatch.setenv("XB_DATA_BASE", "/some/dir")
    monkeypatch.setenv("XB_CACHE_DIR", str(tmp_path))
    src = DataSource()
    assert src.base == "/some/dir" and src.cache_dir == tmp_path and not src.is_remote


# -- catalog and matches -------------------------------------------------------------

def test_catalog(synthetic_root):
    comps = ingest.load_competitions(str(synthetic_root))
    assert {c.label for c in comps} == {"Synthetic Cup 2022", "Synthetic League 2020/2021"}
    assert [c.has_360 for c in sorted(comps, key=lambda c: c.competition_id)] == [False, True]


def test_empty_catalog():
    assert ingest.parse_competitions(b"[]") == []


def test_malformed_catalog_record_names_field():
    data = json.dumps([{"competition_id": 1, "season_id": 2, "competition_name": "A",
                        "season_name": "B"},
                       {"competition_id": "x", "season_id": 2, "competition_name": "A",
                        "season_name": "B"}]).encode()
    with pytest.raises(ParseError) as err:
        ingest.parse_competitions(data)
    assert err.value.field == "$[1].competition_id"


def test_invalid_json_reports_byte_offset():
    with pytest.raises(ParseError) as err:
        ingest.parse_competitions('[{"é": 1,]'.encode())
    assert err.value.offset == len('[{"é": 1,'.encode())


def test_matches_sorted(synthetic_root):
    comp = [c for c in ingest.load_competitions(str(synthetic_root)) if c.has_360][0]
    metas = ingest.load_matches(str(synthetic_root), comp)
    ids = [m.match_id for m in metas]
    assert ids == sorted(ids) and len(ids) == 6
    assert all(m.home_team_id != m.away_team_id for m in metas)


# -- events --------------------------------------------------------------------------

def test_three_event_fixture_in_order():
    s = Stream()
    for _ in range(3):
        s.add("Pass", 1, 5, (50, 40))
    events = ingest.parse_events(json.dumps(s.records).encode())
    assert [e.index for e in events] == [1, 2, 3]


def test_out_of_order_indices_sorted():
    s = Stream()
    for _ in range(6):
        s.add("Pass", 1, 5, (50, 40))
    shuffled = [s.records[i] for i in (3, 0, 5, 1, 4, 2)]
    events = ingest.parse_events(json.dumps(shuffled).encode())
    assert [e.index for e in events] == sorted(r["index"] for r in s.records)


def test_event_round_trip(synthetic_root):
    path = sorted((synthetic_root / "events").iterdir())[0]
    events = ingest.parse_events(path.read_bytes())
    again = ingest.parse_events(ingest.dump_events(events))
    assert again == events


def test_qualifiers_flattened():
    s = Stream()
    s.add("Pass", 1, 5, (50, 40), **{"pass": {"cross": True, "outcome": {"id": 9, "name": "Incomplete"},
                                             "end_location": [60.0, 10.0]}})
    ev = s.events()[0]
    assert ev.q("pass.cross") == "true"
    assert ev.q("pass.outcome") == "Incomplete"
    assert json.loads(ev.q("pass.end_location")) == [60.0, 10.0]


def test_malformed_event_names_field():
    with pytest.raises(ParseError) as err:
        ingest.parse_events(json.dumps([{"id": "a", "index": 1, "period": 1, "minute": 0,
                                          "second": 0, "team": {"id": 1}}]).encode(), source="x.json")
    assert err.value.field == "$[0].type" and err.value.source == "x.json"


# -- freeze frames -------------------------------------------------------------------

def test_frames_present_and_absent(synthetic_root):
    with_360 = sorted((synthetic_root / "three-sixty").iterdir())[0]
    mid = int(with_360.stem)
    frames = ingest.load_frames(str(synthetic_root), mid)
    assert frames
    for fr in frames.values():
        assert all(ingest.pitch.in_bounds(p.location) for p in fr.players)
    assert ingest.load_frames(str(synthetic_root), 123456789) == {}


def test_frame_fixture_five_players():
    rec = [{"event_uuid": "x", "freeze_frame": [
        {"location": [50, 40], "teammate": True, "actor": True},
        {"location": [60, 30], "teammate": True}, {"location": [70, 30], "teammate": False},
        {"location": [80, 30], "teammate": False}, {"location": [119, 40], "teammate": False,
                                                    "keeper": True}]}]
    frames = ingest.parse_frames(json.dumps(rec).encode())
    assert len(frames["x"].players) == 5
    assert sum(p.actor for p in frames["x"].players) == 1


def test_two_actors_rejected():
    rec = [{"event_uuid": "x", "freeze_frame": [
        {"location": [50, 40], "teammate": True, "actor": True},
        {"location": [60, 30], "teammate": True, "actor": True}]}]
    with pytest.raises(ParseError):
        ingest.parse_frames(json.dumps(rec).encode())


# -- foul extraction -----------------------------------------------------------------

def test_handball_excluded():
    s = Stream()
    s.foul(2, 20, ftype="Handball")
    diag = ingest.FoulDiagnostics()
    assert ingest.extract_fouls(s.events(), 1, diag) == []
    assert diag.excluded_by_type["Handball"] == 1


@pytest.mark.parametrize("ftype", sorted(ingest.EXCLUDED_FOUL_TYPES))
def test_every_excluded_type(ftype):
    s = Stream()
    s.foul(2, 20, ftype=ftype)
    s.foul(2, 21, ftype="Foul")
    assert len(ingest.extract_fouls(s.events())) == 1


def test_unpaired_foul_mirrored():
    s = Stream()
    s.foul(2, 20, loc=(30, 20), won=False)
    (foul,) = ingest.extract_fouls(s.events())
    assert foul.location_attacking_frame == (90, 60)
    assert foul.location_committed == (30, 20)
    assert foul.possession_team_id == 1


def test_paired_foul_uses_foul_won_location():
    s = Stream()
    s.add("Pass", 1, 5, (50, 40))
    s.records.append({"id": "fc", "index": 2, "period": 1, "minute": 3, "second": 0,
                      "type": {"name": "Foul Committed"}, "team": {"id": 2}, "player": {"id": 20},
                      "location": [30.0, 20.0], "related_events": ["fw"]})
    s.records.append({"id": "fw", "index": 3, "period": 1, "minute": 3, "second": 0,
                      "type": {"name": "Foul Won"}, "team": {"id": 1}, "player": {"id": 5},
                      "location": [89.5, 60.5], "related_events": ["fc"]})
    (foul,) = ingest.extract_fouls(s.events(), 7)
    assert foul.location_attacking_frame == (89.5, 60.5)
    assert foul.foul_won_id == "fw" and foul.possession_team_id == 1 and foul.match_id == 7


def test_cards_and_labels():
    s = Stream()
    s.foul(2, 20, card="Yellow Card")
    s.foul(2, 20, card="Second Yellow")
    s.foul(2, 21, card="Red Card")
    s.foul(2, 22)
    diag = ingest.FoulDiagnostics()
    fouls = ingest.extract_fouls(s.events(), 1, diag)
    assert [f.label_yellow for f in fouls] == [True, True, False]
    assert [f.card_raw for f in fouls] == ["yellow", "second_yellow", "none"]
    assert diag.red_dropped == 1


def test_foul_without_any_location_skipped():
    s = Stream()
    s.add("Foul Committed", 2, 20)
    diag = ingest.FoulDiagnostics()
    assert ingest.extract_fouls(s.events(), 1, diag) == []
    assert diag.skipped_no_location == 1


def test_extraction_invariants(synthetic_root):
    for path in sorted((synthetic_root / "events").iterdir()):
        events = ingest.parse_events(path.read_bytes())
        fouls = ingest.extract_fouls(events, int(path.stem))
        assert fouls == ingest.extract_fouls(events, int(path.stem))
        by_id = {e.event_id: e for e in events}
        for f in fouls:
            assert ingest.is_filtered_foul(by_id[f.event_id])
            assert ingest.pitch.in_bounds(f.location_attacking_frame)
            assert ingest.pitch.in_bounds(f.location_committed)
        # independent single-pass label count over the raw JSON
        raw = json.loads(path.read_text())
        expected = sum(1 for r in raw if r["type"]["name"] == "Foul Committed"
                       and (r.get("foul_committed") or {}).get("type", {}).get("name")
                       not in ingest.EXCLUDED_FOUL_TYPES
                       and (r.get("foul_committed") or {}).get("card", {}).get("name")
                       in ("Yellow Card", "Second Yellow"))
        assert sum(f.label_yellow for f in fouls) == expected
