"""Replay a match event stream to recover the game context at each foul."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional

from . import pitch
from .errors import UnknownFoul
from .ingest import FOUL_COMMITTED, FoulRecord, FreezeFrame, RawEvent, is_filtered_foul

COUNTER_MODES = ("filtered", "all")
SHOOTOUT_PERIOD = 5


@dataclass(frozen=True)
class ContextSnapshot:
    minute: int
    foul_count_player: int
    foul_count_team: int
    goal_difference: int
    attackers_count: Optional[int] = None
    defenders_count: Optional[int] = None


def goal_credit(ev: RawEvent, teams: Iterable[int]) -> Optional[int]:
    """Team credited with a goal by ``ev``, or None."""
    if ev.type == "Shot" and ev.q("shot.outcome") == "Goal":
        return ev.team_id
    if ev.type == "Own Goal Against":
        others = [t for t in teams if t != ev.team_id]
        return others[0] if others else None
    return None


def _counts_as_foul(ev: RawEvent, mode: str) -> bool:
    if mode == "filtered":
        return is_filtered_foul(ev)
    return ev.type == FOUL_COMMITTED


def _oriented(frame: FreezeFrame, acting_is_defender: bool):
    """Yield (x, is_possession_player, actor, keeper) in the attacking frame."""
    for p in frame.players:
        loc = pitch.mirror(p.location) if acting_is_defender else p.location
        yield loc.x, p.teammate != acting_is_defender, p.actor, p.keeper


def count_attackers(frame: Optional[FreezeFrame], foul_attacking, acting_is_defender: bool = True) -> int:
    """Possession-team players strictly ahead of the foul (attacking frame).

    ``acting_is_defender`` says whether the frame's anchoring event was made by
    the defending team (true for Foul Committed); teammate flags and
    coordinates are relative to that acting team.
    """
    if frame is None:
        return 0
    fx = foul_attacking[0]
    return sum(1 for x, possession, actor, _ in _oriented(frame, acting_is_defender)
               if possession and not actor and x > fx)


def count_defenders(frame: Optional[FreezeFrame], foul_attacking, acting_is_defender: bool = True) -> int:
    """Defending-team players strictly between the foul and their goal, keeper included."""
    if frame is None:
        return 0
    fx = foul_attacking[0]
    return sum(1 for x, possession, _, _ in _oriented(frame, acting_is_defender)
               if not possession and x > fx)


def frame_for_foul(foul: FoulRecord, frames: Mapping[str, FreezeFrame]):
    """Pick the freeze frame anchored at the foul; returns (frame, acting_is_defender)."""
    if foul.event_id in frames:
        return frames[foul.event_id], True
    if foul.foul_won_id is not None and foul.foul_won_id in frames:
        return frames[foul.foul_won_id], False
    return None, True


def replay(events: List[RawEvent], fouls: List[FoulRecord],
           frames: Optional[Mapping[str, FreezeFrame]] = None,
           counter_mode: str = "filtered") -> Dict[str, ContextSnapshot]:
    """Single pass over ``events`` producing a snapshot for every foul.

    Counters and the score use only state strictly before the foul's event.
    When ``frames`` is None, 360 counts are left missing; a frames mapping
    without an entry for the foul also leaves them missing.
    """
    if counter_mode not in COUNTER_MODES:
        raise ValueError(f"counter_mode must be one of {COUNTER_MODES}")
    wanted = {f.event_id: f for f in fouls}
    present = {e.event_id for e in events}
    missing = sorted(set(wanted) - present)
    if missing:
        raise UnknownFoul(f"foul events not in stream: {missing[:5]}")

    teams = sorted({e.team_id for e in events})
    goals: Counter = Counter()
    player_fouls: Counter = Counter()
    team_fouls: Counter = Counter()
    out: Dict[str, ContextSnapshot] = {}

    for ev in events:
        if ev.period >= SHOOTOUT_PERIOD:
            continue
        foul = wanted.get(ev.event_id)
        if foul is not None:
            att = dfn = None
            if frames is not None:
                frame, acting_def = frame_for_foul(foul, frames)
                if frame is not None:
                    att = count_attackers(frame, foul.location_attacking_frame, acting_def)
                    dfn = count_defenders(frame, foul.location_attacking_frame, acting_def)
            out[ev.event_id] = ContextSnapshot(
                minute=ev.minute,
                foul_count_player=player_fouls[(foul.fouling_team_id, foul.fouling_player_id)],
                foul_count_team=team_fouls[foul.fouling_team_id],
                goal_difference=goals[foul.possession_team_id] - goals[foul.fouling_team_id],
                attackers_count=att,
                defenders_count=dfn,
            )
        # state updates happen after the snapshot so counts stay strictly prior
        if _counts_as_foul(ev, counter_mode):
            player_fouls[(ev.team_id, ev.player_id)] += 1
            team_fouls[ev.team_id] += 1
        scorer = goal_credit(ev, teams)
        if scorer is not None:
            goals[scorer] += 1
    return out
