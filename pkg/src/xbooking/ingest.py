"""StatsBomb open-data access: fetching with a local cache, parsing, and
extraction of labelled non-dangerous fouls."""
from __future__ import annotations

import json
import logging
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import requests

from . import pitch
from .errors import CacheWriteError, NotFound, ParseError, TransportError
from .pitch import Point

logger = logging.getLogger(__name__)

DEFAULT_BASE = "https://raw.githubusercontent.com/statsbomb/open-data/master/data/"
DEFAULT_CACHE = os.path.join(os.path.expanduser("~"), ".cache", "xbooking")

FOUL_COMMITTED = "Foul Committed"
FOUL_WON = "Foul Won"
BAD_BEHAVIOUR = "Bad Behaviour"

EXCLUDED_FOUL_TYPES = frozenset(
    {"Handball", "Dangerous Play", "Foul Out", "Dive", "6 Seconds", "Backpass Pick"}
)

CARD_NAMES = {
    "Yellow Card": "yellow",
    "Second Yellow": "second_yellow",
    "Red Card": "red",
}

# top-level event keys that map onto RawEvent fields; everything else is
# flattened into the qualifier map
_CORE_KEYS = {"id", "index", "period", "minute", "second", "type", "team", "player",
              "location", "related_events", "possession_team"}


# -- data source -------------------------------------------------------------

class DataSource:
    """A local open-data checkout or a remote base URL fronted by a disk cache.

    The cache mirrors the repository's relative paths, so a populated cache
    directory can itself be used as a local base.
    """

    def __init__(self, base: Optional[str] = None, cache_dir: Optional[str] = None,
                 session: Optional[requests.Session] = None, timeout: float = 60.0):
        self.base = base or os.environ.get("XB_DATA_BASE") or DEFAULT_BASE
        self.cache_dir = Path(cache_dir or os.environ.get("XB_CACHE_DIR") or DEFAULT_CACHE)
        self.timeout = timeout
        self._session = session
        self.downloads = 0

    @property
    def is_remote(self) -> bool:
        return self.base.startswith(("http://", "https://"))

    def read(self, relative_path: str) -> bytes:
        return fetch_file(self, relative_path, self.cache_dir)

    def exists(self, relative_path: str) -> bool:
        try:
            self.read(relative_path)
        except NotFound:
            return False
        return True

    @property
    def session(self) -> requests.Session:
        if self._session is None:
            self._session = requests.Session()
        return self._session


def _atomic_write(path: Path, data: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".part")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise CacheWriteError(f"cannot write cache file {path}: {exc}") from exc


def fetch_file(base, relative_path: str, cache_dir=None) -> bytes:
    """Return the bytes of ``relative_path`` from ``base``.

    ``base`` is a :class:`DataSource`, a local directory or an HTTP(S) URL.
    Remote reads are cached under ``cache_dir`` and served from there on
    subsequent calls.
    """
    source = base if isinstance(base, DataSource) else DataSource(str(base), cache_dir)
    rel = relative_path.lstrip("/")
    if not source.is_remote:
        path = Path(source.base) / rel
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"{rel} not found under {source.base}") from None

    cache_path = Path(cache_dir if cache_dir is not None else source.cache_dir) / rel
    if cache_path.is_file():
        return cache_path.read_bytes()

    url = source.base.rstrip("/") + "/" + rel
    try:
        resp = source.session.get(url, timeout=source.timeout)
    except requests.RequestException as exc:
        raise TransportError(f"GET {url} failed: {exc}") from exc
    if resp.status_code == 404:
        raise NotFound(f"{url} returned 404")
    if resp.status_code >= 400:
        raise TransportError(f"GET {url} returned HTTP {resp.status_code}")
    source.downloads += 1
    data = resp.content
    _atomic_write(cache_path, data)
    return data


def _load_json(data: bytes, source: str) -> Any:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("invalid UTF-8", source=source, offset=exc.start) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"invalid JSON: {exc.msg}", source=source, offset=offset) from None


def _expect(record: Mapping, key: str, kind, path: str):
    if not isinstance(record, Mapping):
        raise ParseError("expected an object", field=path)
    if key not in record:
        raise ParseError("missing field", field=f"{path}.{key}")
    value = record[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ParseError(f"expected integer, got {value!r}", field=f"{path}.{key}")
    if kind is str and not isinstance(value, str):
        raise ParseError(f"expected text, got {value!r}", field=f"{path}.{key}")
    return value


# -- catalog ------------------------------------------------------------------

@dataclass(frozen=True)
class CompetitionRef:
    competition_id: int
    season_id: int
    competition_name: str
    season_name: str
    gender: str
    has_360: bool = False

    @property
    def label(self) -> str:
        return f"{self.competition_name} {self.season_name}"


@dataclass(frozen=True)
class MatchMeta:
    match_id: int
    competition: CompetitionRef
    home_team_id: int
    away_team_id: int
    home_score: int
    away_score: int
    kickoff: str
    home_team_name: str = ""
    away_team_name: str = ""

    @property
    def team_ids(self) -> Tuple[int, int]:
        return (self.home_team_id, self.away_team_id)


def parse_competitions(data: bytes, source: str = "competitions.json") -> List[CompetitionRef]:
    raw = _load_json(data, source)
    if not isinstance(raw, list):
        raise ParseError("catalog must be a JSON array", source=source, field="$")
    out: List[CompetitionRef] = []
    seen = set()
    for i, rec in enumerate(raw):
        path = f"$[{i}]"
        try:
            cid = _expect(rec, "competition_id", int, path)
            sid = _expect(rec, "season_id", int, path)
            cname = _expect(rec, "competition_name", str, path)
            sname = _expect(rec, "season_name", str, path)
            gender = rec.get("competition_gender", "male")
        except ParseError as exc:
            raise ParseError("malformed competition record", source=source, field=exc.field) from None
        if cid <= 0 or sid <= 0:
            raise ParseError("ids must be positive", source=source, field=path)
        if gender not in ("male", "female"):
            raise ParseError(f"unknown gender {gender!r}", source=source,
                             field=f"{path}.competition_gender")
        if (cid, sid) in seen:
            continue
        seen.add((cid, sid))
        out.append(CompetitionRef(cid, sid, cname, sname, gender,
                                  has_360=rec.get("match_available_360") is not None))
    return out


def load_competitions(base) -> List[CompetitionRef]:
    return parse_competitions(fetch_file(base, "competitions.json"))


def parse_matches(data: bytes, competition: CompetitionRef, source: str = "") -> List[MatchMeta]:
    raw = _load_json(data, source)
    if not isinstance(raw, list):
        raise ParseError("matches file must be a JSON array", source=source, field="$")
    out = []
    for i, rec in enumerate(raw):
        path = f"$[{i}]"
        try:
            mid = _expect(rec, "match_id", int, path)
            home = _expect(rec, "home_team", dict, path)
            away = _expect(rec, "away_team", dict, path)
            hid = _expect(home, "home_team_id", int, f"{path}.home_team")
            aid = _expect(away, "away_team_id", int, f"{path}.away_team")
        except ParseError as exc:
            raise ParseError("malformed match record", source=source, field=exc.field) from None
        if hid == aid:
            raise ParseError("home and away team ids coincide", source=source, field=path)
        out.append(MatchMeta(
            match_id=mid, competition=competition, home_team_id=hid, away_team_id=aid,
            home_score=int(rec.get("home_score") or 0), away_score=int(rec.get("away_score") or 0),
            kickoff=str(rec.get("match_date", "")),
            home_team_name=home.get("home_team_name", ""),
            away_team_name=away.get("away_team_name", ""),
        ))
    out.sort(key=lambda m: m.match_id)
    return out


def load_matches(base, competition: CompetitionRef) -> List[MatchMeta]:
    rel = f"matches/{competition.competition_id}/{competition.season_id}.json"
    return parse_matches(fetch_file(base, rel), competition, source=rel)


# -- events -----------------------------------------------------------------------

@dataclass(frozen=True)
class RawEvent:
    event_id: str
    index: int
    period: int
    minute: int
    second: int
    type: str
    team_id: int
    player_id: Optional[int]
    location: Optional[Point]
    qualifiers: Dict[str, str] = field(default_factory=dict)
    related_event_ids: Tuple[str, ...] = ()
    possession_team_id: Optional[int] = None
    team_name: str = ""
    player_name: str = ""

    def q(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.qualifiers.get(key, default)

    @property
    def clock(self) -> float:
        """Raw match clock in minutes (minute + second / 60)."""
        return self.minute + self.second / 60.0


def _flatten(prefix: str, value: Any, out: Dict[str, str]) -> None:
    if isinstance(value, dict):
        if "name" in value and set(value) <= {"id", "name"}:
            out[prefix] = str(value["name"])
            if "id" in value:
                out[prefix + ".id"] = json.dumps(value["id"])
            return
        for k, v in value.items():
            _flatten(f"{prefix}.{k}", v, out)
    elif isinstance(value, str):
        out[prefix] = value
    else:
        out[prefix] = json.dumps(value)


def _unflatten(qualifiers: Mapping[str, str]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    ids = {k[:-3]: v for k, v in qualifiers.items() if k.endswith(".id")}
    for key, text in qualifiers.items():
        if key.endswith(".id") and key[:-3] in qualifiers:
            continue
        try:
            value = json.loads(text)
            if isinstance(value, str):
                value = {"name": value}
        except ValueError:
            value = {"name": text}
        if isinstance(value, dict) and key in ids:
            value = {"id": json.loads(ids[key]), **value}
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return tree


def _location(value: Any, field_path: str, source: str) -> Optional[Point]:
    if value is None:
        return None
    if not isinstance(value, list) or len(value) < 2:
        raise ParseError("location must be [x, y]", source=source, field=field_path)
    try:
        return pitch.clip((float(value[0]), float(value[1])))
    except (TypeError, ValueError):
        raise ParseError("non-numeric location", source=source, field=field_path) from None


def parse_event(rec: Mapping, path: str = "$", source: str = "") -> RawEvent:
    try:
        event_id = _expect(rec, "id", str, path)
        index = _expect(rec, "index", int, path)
        period = _expect(rec, "period", int, path)
        minute = _expect(rec, "minute", int, path)
        second = _expect(rec, "second", int, path)
        etype = _expect(rec, "type", dict, path)
        tname = _expect(etype, "name", str, f"{path}.type")
        team = _expect(rec, "team", dict, path)
        team_id = _expect(team, "id", int, f"{path}.team")
    except ParseError as exc:
        raise ParseError("malformed event", source=source, field=exc.field) from None
    player = rec.get("player") or {}
    ptid = (rec.get("possession_team") or {}).get("id")
    qualifiers: Dict[str, str] = {}
    for key, value in rec.items():
        if key not in _CORE_KEYS:
            _flatten(key, value, qualifiers)
    related = rec.get("related_events") or []
    return RawEvent(
        event_id=event_id, index=index, period=period, minute=minute, second=second,
        type=tname, team_id=team_id, player_id=player.get("id"),
        location=_location(rec.get("location"), f"{path}.location", source),
        qualifiers=qualifiers, related_event_ids=tuple(str(r) for r in related),
        possession_team_id=ptid, team_name=team.get("name", ""),
        player_name=player.get("name", ""),
    )


def parse_events(data: bytes, source: str = "") -> List[RawEvent]:
    raw = _load_json(data, source)
    if not isinstance(raw, list):
        raise ParseError("events file must be a JSON array", source=source, field="$")
    events = [parse_event(rec, f"$[{i}]", source) for i, rec in enumerate(raw)]
    events.sort(key=lambda e: e.index)
    return events


def event_to_dict(ev: RawEvent) -> Dict[str, Any]:
    """Serialize back into the open-data event layout (retained fields only)."""
    out: Dict[str, Any] = {
        "id": ev.event_id, "index": ev.index, "period": ev.period,
        "minute": ev.minute, "second": ev.second, "type": {"name": ev.type},
        "team": {"id": ev.team_id, "name": ev.team_name},
    }
    if ev.player_id is not None:
        out["player"] = {"id": ev.player_id, "name": ev.player_name}
    if ev.possession_team_id is not None:
        out["possession_team"] = {"id": ev.possession_team_id}
    if ev.location is not None:
        out["location"] = [ev.location.x, ev.location.y]
    if ev.related_event_ids:
        out["related_events"] = list(ev.related_event_ids)
    out.update(_unflatten(ev.qualifiers))
    return out


def dump_events(events: Iterable[RawEvent]) -> bytes:
    return json.dumps([event_to_dict(e) for e in events], ensure_ascii=False).encode("utf-8")


def load_match_events(base, match_id: int) -> List[RawEvent]:
    rel = f"events/{match_id}.json"
    return parse_events(fetch_file(base, rel), source=rel)


# -- 360 freeze frames --------------------------------------------------------------

@dataclass(frozen=True)
class FramePlayer:
    location: Point
    teammate: bool
    actor: bool = False
    keeper: bool = False


@dataclass(frozen=True)
class FreezeFrame:
    event_id: str
    players: Tuple[FramePlayer, ...]


def parse_frames(data: bytes, source: str = "") -> Dict[str, FreezeFrame]:
    raw = _load_json(data, source)
    if not isinstance(raw, list):
        raise ParseError("360 file must be a JSON array", source=source, field="$")
    frames: Dict[str, FreezeFrame] = {}
    for i, rec in enumerate(raw):
        path = f"$[{i}]"
        try:
            eid = _expect(rec, "event_uuid", str, path)
            entries = _expect(rec, "freeze_frame", list, path)
        except ParseError as exc:
            raise ParseError("malformed freeze frame", source=source, field=exc.field) from None
        players = []
        for j, p in enumerate(entries):
            ppath = f"{path}.freeze_frame[{j}]"
            loc = _location(p.get("location") if isinstance(p, dict) else None,
                            f"{ppath}.location", source)
            if loc is None:
                raise ParseError("frame player without location", source=source, field=ppath)
            players.append(FramePlayer(loc, bool(p.get("teammate")), bool(p.get("actor")),
                                       bool(p.get("keeper"))))
        if sum(p.actor for p in players) > 1:
            raise ParseError("more than one actor in frame", source=source, field=path)
        frames[eid] = FreezeFrame(eid, tuple(players))
    return frames


def load_frames(base, match_id: int) -> Dict[str, FreezeFrame]:
    """Freeze frames keyed by event id; empty when the match has no 360 file."""
    rel = f"three-sixty/{match_id}.json"
    try:
        data = fetch_file(base, rel)
    except NotFound:
        return {}
    return parse_frames(data, source=rel)


# -- foul extraction ------------------------------------------------------------

@dataclass(frozen=True)
class FoulRecord:
    match_id: int
    event_id: str
    index: int
    period: int
    minute: int
    second: int
    fouling_player_id: Optional[int]
    fouling_team_id: int
    possession_team_id: int
    location_committed: Point
    location_attacking_frame: Point
    label_yellow: bool
    card_raw: str
    fouling_player_name: str = ""
    fouling_team_name: str = ""
    foul_won_id: Optional[str] = None


@dataclass
class FoulDiagnostics:
    skipped_no_location: int = 0
    excluded_by_type: Counter = field(default_factory=Counter)
    red_dropped: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "skipped_no_location": self.skipped_no_location,
            "excluded_by_type": dict(sorted(self.excluded_by_type.items())),
            "red_dropped": self.red_dropped,
        }

    def merge(self, other: "FoulDiagnostics") -> None:
        self.skipped_no_location += other.skipped_no_location
        self.excluded_by_type.update(other.excluded_by_type)
        self.red_dropped += other.red_dropped


def card_of(ev: RawEvent) -> str:
    name = ev.q("foul_committed.card")
    if name is None:
        return "none"
    return CARD_NAMES.get(name, "none")


def is_filtered_foul(ev: RawEvent) -> bool:
    """Non-dangerous foul that is not a straight red."""
    return (ev.type == FOUL_COMMITTED
            and ev.q("foul_committed.type") not in EXCLUDED_FOUL_TYPES
            and card_of(ev) != "red")


def extract_fouls(events: List[RawEvent], match_id: int = 0,
                  diagnostics: Optional[FoulDiagnostics] = None) -> List[FoulRecord]:
    """Labelled non-dangerous fouls of one match, in stream order."""
    diag = diagnostics if diagnostics is not None else FoulDiagnostics()
    by_id = {e.event_id: e for e in events}
    teams = sorted({e.team_id for e in events})
    out: List[FoulRecord] = []
    for ev in events:
        if ev.type != FOUL_COMMITTED:
            continue
        ftype = ev.q("foul_committed.type")
        if ftype in EXCLUDED_FOUL_TYPES:
            diag.excluded_by_type[ftype] += 1
            continue
        card = card_of(ev)
        if card == "red":
            diag.red_dropped += 1
            continue

        won = next((by_id[r] for r in ev.related_event_ids
                    if r in by_id and by_id[r].type == FOUL_WON), None)
        if won is not None and won.location is not None:
            attacking = won.location
        elif ev.location is not None:
            attacking = pitch.mirror(ev.location)
        else:
            diag.skipped_no_location += 1
            continue
        committed = ev.location if ev.location is not None else pitch.mirror(attacking)

        if won is not None and won.team_id != ev.team_id:
            possession = won.team_id
        elif ev.possession_team_id is not None and ev.possession_team_id != ev.team_id:
            possession = ev.possession_team_id
        else:
            others = [t for t in teams if t != ev.team_id]
            if not others:
                logger.warning("foul %s: cannot determine fouled team", ev.event_id)
                continue
            possession = others[0]

        out.append(FoulRecord(
            match_id=match_id, event_id=ev.event_id, index=ev.index, period=ev.period,
            minute=ev.minute, second=ev.second, fouling_player_id=ev.player_id,
            fouling_team_id=ev.team_id, possession_team_id=possession,
            location_committed=committed, location_attacking_frame=attacking,
            label_yellow=card in ("yellow", "second_yellow"), card_raw=card,
            fouling_player_name=ev.player_name, fouling_team_name=ev.team_name,
            foul_won_id=won.event_id if won is not None else None,
        ))
    return out
