"""Team and player fouling-efficiency tables built from per-foul xB."""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import OrphanFoul, UnknownAxis
from .features import Dataset
from .ingest import FOUL_COMMITTED, FoulRecord, MatchMeta, RawEvent
from .learners import predict_proba

PERIOD_START = {1: 0.0, 2: 45.0, 3: 90.0, 4: 105.0}
_SENDING_OFF = {"Red Card", "Second Yellow"}


@dataclass(frozen=True)
class ScoredFoul:
    foul: FoulRecord
    xb: float
    booked: bool


@dataclass(frozen=True)
class AggRow:
    subject_id: int
    subject_name: str
    matches_played: int
    minutes_played: Optional[float]
    fouls: int
    xb_sum: float
    bookings: int
    xb_per_match: float
    bookings_per_match: float
    fouls_per_match: float
    fouls_per_90: Optional[float]
    ratio: Optional[float]

    def __post_init__(self):
        if self.bookings > self.fouls:
            raise ValueError(f"subject {self.subject_id}: more bookings than fouls")


def score_fouls(dataset: Dataset, model, fouls: Iterable[FoulRecord]) -> List[ScoredFoul]:
    """Attach the model's booking probability to every dataset row."""
    if not dataset.rows:
        return []
    by_key = {(f.match_id, f.event_id): f for f in fouls}
    X, _, names = dataset.to_arrays()
    probs = predict_proba(model, X, names)
    out = []
    for row, p in zip(dataset.rows, probs):
        foul = by_key.get(row.key)
        if foul is None:
            raise OrphanFoul(f"no foul record for dataset row {row.key}")
        out.append(ScoredFoul(foul, float(p), row.label_yellow))
    return out


def _sort_rows(rows: List[AggRow]) -> List[AggRow]:
    rated = sorted((r for r in rows if r.ratio is not None),
                   key=lambda r: (-r.ratio, r.subject_id))
    unrated = sorted((r for r in rows if r.ratio is None),
                     key=lambda r: (-r.xb_sum, r.subject_id))
    return rated + unrated


def team_table(scored: Sequence[ScoredFoul], matches: Sequence[MatchMeta]) -> List[AggRow]:
    played: Dict[int, int] = defaultdict(int)
    names: Dict[int, str] = {}
    known = set()
    for m in matches:
        known.add(m.match_id)
        played[m.home_team_id] += 1
        played[m.away_team_id] += 1
        names.setdefault(m.home_team_id, m.home_team_name)
        names.setdefault(m.away_team_id, m.away_team_name)

    acc: Dict[int, List[float]] = defaultdict(lambda: [0, 0.0, 0])
    for s in scored:
        if s.foul.match_id not in known:
            raise OrphanFoul(f"foul {s.foul.event_id} belongs to unknown match {s.foul.match_id}")
        a = acc[s.foul.fouling_team_id]
        a[0] += 1
        a[1] += s.xb
        a[2] += int(s.booked)
        if not names.get(s.foul.fouling_team_id):
            names[s.foul.fouling_team_id] = s.foul.fouling_team_name

    rows = []
    for team, (n_fouls, xb, booked) in acc.items():
        mp = played[team]
        rows.append(AggRow(
            subject_id=team, subject_name=names.get(team, ""), matches_played=mp,
            minutes_played=None, fouls=n_fouls, xb_sum=xb, bookings=booked,
            xb_per_match=xb / mp, bookings_per_match=booked / mp, fouls_per_match=n_fouls / mp,
            fouls_per_90=None, ratio=xb / booked if booked else None,
        ))
    return _sort_rows(rows)


# -- minutes played ----------------------------------------------------------------

def _period_ends(events: Sequence[RawEvent]) -> Dict[int, float]:
    ends: Dict[int, float] = {}
    for ev in events:
        if ev.period in PERIOD_START:
            ends[ev.period] = max(ends.get(ev.period, PERIOD_START[ev.period]), ev.clock)
    return ends


def _span(start: Tuple[int, float], end: Tuple[int, float], ends: Mapping[int, float]) -> float:
    total = 0.0
    for p, p_end in ends.items():
        if p < start[0] or p > end[0]:
            continue
        lo = start[1] if p == start[0] else PERIOD_START[p]
        hi = end[1] if p == end[0] else p_end
        total += max(0.0, hi - lo)
    return total


def minutes_by_player(events: Sequence[RawEvent]) -> Dict[int, float]:
    """Minutes on the pitch for everyone who played in one match.

    Starters play from kickoff and substitutes from their entry, until
    substitution, sending-off or the end of the last period.
    """
    ends = _period_ends(events)
    if not ends:
        return {}
    last = max(ends)
    final = (last, ends[last])
    on: Dict[int, Tuple[int, float]] = {}
    off: Dict[int, Tuple[int, float]] = {}
    for ev in events:
        if ev.period not in PERIOD_START:
            continue
        t = (ev.period, ev.clock)
        if ev.type == "Starting XI":
            for entry in json.loads(ev.q("tactics.lineup", "[]")):
                pid = (entry.get("player") or {}).get("id")
                if pid is not None:
                    on.setdefault(pid, (1, 0.0))
        elif ev.type == "Substitution":
            if ev.player_id is not None:
                off.setdefault(ev.player_id, t)
            rep = ev.q("substitution.replacement.id")
            if rep is not None:
                on.setdefault(int(rep), t)
        elif ev.player_id is not None and (
                ev.q("bad_behaviour.card") in _SENDING_OFF
                or (ev.type == FOUL_COMMITTED and ev.q("foul_committed.card") in _SENDING_OFF)):
            off.setdefault(ev.player_id, t)
    return {pid: _span(start, off.get(pid, final), ends) for pid, start in on.items()}


def minutes_played(events: Sequence[RawEvent], player_id: int) -> float:
    return minutes_by_player(events).get(player_id, 0.0)


def player_table(scored: Sequence[ScoredFoul], events_by_match: Mapping[int, Sequence[RawEvent]],
                 min_minutes: float = 90.0) -> List[AggRow]:
    """Per-player rows for players with at least one scored foul and
    ``min_minutes`` total minutes over the supplied matches."""
    minutes: Dict[int, float] = defaultdict(float)
    appearances: Dict[int, int] = defaultdict(int)
    for mid in sorted(events_by_match):
        for pid, mins in minutes_by_player(events_by_match[mid]).items():
            minutes[pid] += mins
            if mins > 0:
                appearances[pid] += 1

    acc: Dict[int, List] = {}
    for s in scored:
        pid = s.foul.fouling_player_id
        if pid is None:
            continue
        a = acc.setdefault(pid, [0, 0.0, 0, s.foul.fouling_player_name])
        a[0] += 1
        a[1] += s.xb
        a[2] += int(s.booked)

    rows = []
    for pid, (n_fouls, xb, booked, name) in acc.items():
        mins = minutes.get(pid, 0.0)
        if mins < min_minutes or mins <= 0:
            continue
        mp = max(appearances[pid], 1)
        rows.append(AggRow(
            subject_id=pid, subject_name=name, matches_played=mp, minutes_played=mins,
            fouls=n_fouls, xb_sum=xb, bookings=booked, xb_per_match=xb / mp,
            bookings_per_match=booked / mp, fouls_per_match=n_fouls / mp,
            fouls_per_90=n_fouls * 90.0 / mins, ratio=xb / booked if booked else None,
        ))
    return _sort_rows(rows)


# -- output ---------------------------------------------------------------------------

AGG_COLUMNS = tuple(f.name for f in fields(AggRow))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_csv(rows: Sequence[AggRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_COLUMNS)
    for r in rows:
        w.writerow([_cell(v) for v in asdict(r).values()])
    return buf.getvalue()


def format_table(rows: Sequence[AggRow], limit: Optional[int] = None) -> str:
    """Human-readable xB / B / ratio table, values rounded half-to-even."""
    shown = list(rows[:limit] if limit else rows)
    width = max([len(r.subject_name) for r in shown] + [7])
    lines = [f"{'Subject':<{width}}  {'xB':>6}  {'B':>3}  {'Ratio':>6}  {'Fouls':>5}"]
    for r in shown:
        ratio = f"{round(r.ratio, 2):.2f}" if r.ratio is not None else "-"
        lines.append(f"{r.subject_name:<{width}}  {round(r.xb_sum, 2):>6.2f}  {r.bookings:>3}  "
                     f"{ratio:>6}  {r.fouls:>5}")
    return "\n".join(lines) + "\n"


def emit_plot_data(table: Sequence[AggRow], x: str, y: str) -> Tuple[str, int]:
    """Scatter data (subject, x, y) as CSV text, plus the count of rows
    omitted because an axis value is absent."""
    for axis in (x, y):
        if axis not in AGG_COLUMNS or axis in ("subject_id", "subject_name"):
            raise UnknownAxis(f"{axis!r} is not a numeric AggRow field")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject_id", "label", x, y])
    omitted = 0
    for r in table:
        xv, yv = getattr(r, x), getattr(r, y)
        if xv is None or yv is None:
            omitted += 1
            continue
        w.writerow([r.subject_id, r.subject_name, _cell(float(xv)), _cell(float(yv))])
    return buf.getvalue(), omitted


FIGURES = {
    "fig7_teams_xb_vs_bookings": ("teams", "bookings_per_match", "xb_per_match"),
    "fig8_teams_ratio_vs_fouls": ("teams", "fouls_per_match", "ratio"),
    "fig9_players_ratio_vs_fouls90": ("players", "fouls_per_90", "ratio"),
}


def calibration_ratio(scored: Sequence[ScoredFoul]) -> float:
    booked = sum(s.booked for s in scored)
    return float(np.sum([s.xb for s in scored]) / booked) if booked else float("nan")
