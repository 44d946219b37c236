"""Small builders for hand-written event fixtures."""
from __future__ import annotations

from typing import List, Optional

from xbooking.ingest import RawEvent, parse_event


class Stream:
    """Append-only event list with automatic indices and ids."""

    def __init__(self, home: int = 1, away: int = 2, prefix: str = "e"):
        self.home, self.away = home, away
        self.prefix = prefix
        self.records: List[dict] = []

    def add(self, etype: str, team: int, player: Optional[int] = None, loc=None, period: int = 1,
            minute: int = 0, second: int = 0, possession: Optional[int] = None, **extra) -> str:
        eid = f"{self.prefix}{len(self.records) + 1}"
        rec = {"id": eid, "index": len(self.records) + 1, "period": period, "minute": minute,
               "second": second, "type": {"name": etype}, "team": {"id": team, "name": f"T{team}"}}
        if player is not None:
            rec["player"] = {"id": player, "name": f"P{player}"}
        if loc is not None:
            rec["location"] = list(loc)
        rec["possession_team"] = {"id": possession if possession is not None else team}
        rec.update(extra)
        self.records.append(rec)
        return eid

    def foul(self, team: int, player: int, loc=(60.0, 40.0), card: Optional[str] = None,
             ftype: Optional[str] = None, won: bool = True, **kw) -> str:
        """Foul Committed by ``team``, followed by the paired Foul Won."""
        other = self.away if team == self.home else self.home
        detail = {}
        if card:
            detail["card"] = {"id": 7, "name": card}
        if ftype:
            detail["type"] = {"id": 1, "name": ftype}
        extra = {"foul_committed": detail} if detail else {}
        fc = f"{self.prefix}{len(self.records) + 1}"
        fw = f"{self.prefix}{len(self.records) + 2}"
        if won:
            extra["related_events"] = [fw]
        self.add("Foul Committed", team, player, loc, possession=other, **extra, **kw)
        if won:
            self.add("Foul Won", other, player + 1000, (120 - loc[0], 80 - loc[1]),
                     possession=other, related_events=[fc], **kw)
        return fc

    def goal(self, team: int, player: int = 9, loc=(110.0, 40.0), **kw) -> str:
        return self.add("Shot", team, player, loc, shot={"outcome": {"name": "Goal"}}, **kw)

    def events(self) -> List[RawEvent]:
        return [parse_event(r) for r in self.records]
