import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xbooking import ingest, match_state
from xbooking.errors import UnknownFoul
from xbooking.ingest import FramePlayer, FreezeFrame, extract_fouls
from xbooking.match_state import count_attackers, count_defenders, replay
from helpers import Stream


def brute_force(events, foul, counter_mode="filtered"):
    """Recount everything before ``foul`` by a linear scan of the prefix."""
    pos = next(i for i, e in enumerate(events) if e.event_id == foul.event_id)
    prefix = [e for e in events[:pos] if e.period < 5]
    if counter_mode == "filtered":
        counted = [e for e in prefix if ingest.is_filtered_foul(e)]
    else:
        counted = [e for e in prefix if e.type == "Foul Committed"]
    player = sum(1 for e in counted if e.player_id == foul.fouling_player_id
                 and e.team_id == foul.fouling_team_id)
    team = sum(1 for e in counted if e.team_id == foul.fouling_team_id)

    def goals_for(t):
        n = sum(1 for e in prefix if e.type == "Shot" and e.q("shot.outcome") == "Goal"
                and e.team_id == t)
        return n + sum(1 for e in prefix if e.type == "Own Goal Against" and e.team_id != t)

    return player, team, goals_for(foul.possession_team_id) - goals_for(foul.fouling_team_id)


def random_stream(seed, n=80):
    rng = np.random.default_rng(seed)
    s = Stream()
    minute = 0
    for i in range(n):
        minute += int(rng.integers(0, 3))
        period = 1 if i < n // 2 else 2
        team = int(rng.integers(1, 3))
        u = rng.uniform()
        kw = dict(period=period, minute=minute)
        if u < 0.3:
            ftype = rng.choice([None, None, None, "Handball", "Dive"])
            card = rng.choice([None, None, "Yellow Card", "Red Card"])
            s.foul(team, int(rng.integers(1, 4)) + 10 * team,
                   loc=(float(rng.uniform(0, 120)), float(rng.uniform(0, 80))),
                   card=card, ftype=ftype, won=bool(rng.uniform() < 0.8), **kw)
        elif u < 0.4:
            s.goal(team, **kw)
        elif u < 0.43:
            s.add("Own Goal Against", team, 5, (3, 40), **kw)
        else:
            s.add("Pass", team, 5, (50, 40), **kw)
    return s.events()


def test_first_foul_is_all_zero():
    s = Stream()
    s.add("Pass", 1, 5, (50, 40))
    s.foul(2, 20)
    events = s.events()
    (ctx,) = replay(events, extract_fouls(events)).values()
    assert (ctx.foul_count_player, ctx.foul_count_team, ctx.goal_difference) == (0, 0, 0)


def test_third_foul_by_player_sees_two():
    s = Stream()
    ids = []
    for i in range(1, 100):
        if i in (10, 50, 90):
            ids.append(s.foul(2, 20, minute=i // 2))
        elif len(s.records) < 100:
            s.add("Pass", 1, 5, (50, 40), minute=i // 2)
    events = s.events()
    ctx = replay(events, extract_fouls(events))
    assert [ctx[i].foul_count_player for i in ids] == [0, 1, 2]
    assert [ctx[i].foul_count_team for i in ids] == [0, 1, 2]


def test_goal_difference_from_possession_side():
    s = Stream()
    s.goal(1)
    fid = s.foul(2, 20)
    fid2 = s.foul(1, 10)
    events = s.events()
    ctx = replay(events, extract_fouls(events))
    assert ctx[fid].goal_difference == 1
    assert ctx[fid2].goal_difference == -1


def test_own_goal_credits_opponent():
    s = Stream()
    s.add("Own Goal Against", 2, 20, (2, 40))
    fid = s.foul(2, 20)
    events = s.events()
    assert replay(events, extract_fouls(events))[fid].goal_difference == 1


def test_shootout_ignored():
    s = Stream()
    fid = s.foul(2, 20, period=4, minute=118)
    s.goal(1, period=5, minute=121)
    s.foul(2, 21, period=5, minute=122)
    events = s.events()
    fouls = [f for f in extract_fouls(events) if f.period < 5]
    assert set(replay(events, fouls)) == {fid}


def test_unknown_foul():
    s = Stream()
    s.foul(2, 20)
    events = s.events()
    fouls = extract_fouls(events)
    with pytest.raises(UnknownFoul):
        replay(events[1:], fouls)


def test_counter_modes_differ_on_excluded_fouls():
    s = Stream()
    s.foul(2, 20, ftype="Handball")
    fid = s.foul(2, 20)
    events = s.events()
    fouls = extract_fouls(events)
    assert replay(events, fouls, counter_mode="filtered")[fid].foul_count_player == 0
    assert replay(events, fouls, counter_mode="all")[fid].foul_count_player == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["filtered", "all"]))
def test_replay_matches_linear_scan(seed, mode):
    events = random_stream(seed)
    fouls = extract_fouls(events)
    ctx = replay(events, fouls, counter_mode=mode)
    for f in fouls:
        c = ctx[f.event_id]
        assert (c.foul_count_player, c.foul_count_team, c.goal_difference) == brute_force(events, f, mode)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
def test_prefix_causality(seed, frac):
    events = random_stream(seed)
    cut = int(len(events) * frac)
    full = replay(events, extract_fouls(events))
    prefix_events = events[:cut]
    prefix_fouls = extract_fouls(prefix_events)
    part = replay(prefix_events, prefix_fouls)
    for eid, snap in part.items():
        assert full[eid] == snap


def test_team_increments_sum_to_totals():
    events = random_stream(7, 200)
    fouls = extract_fouls(events)
    ctx = replay(events, fouls)
    for team in (1, 2):
        team_fouls = [f for f in fouls if f.fouling_team_id == team]
        counts = [ctx[f.event_id].foul_count_team for f in team_fouls]
        assert counts == list(range(len(team_fouls)))


def test_goal_difference_after_last_goal_matches_final_score(synthetic_root):
    comp = [c for c in ingest.load_competitions(str(synthetic_root)) if c.has_360][0]
    for meta in ingest.load_matches(str(synthetic_root), comp):
        events = ingest.load_match_events(str(synthetic_root), meta.match_id)
        fouls = extract_fouls(events, meta.match_id)
        ctx = replay(events, fouls)
        goal_idx = [e.index for e in events if match_state.goal_credit(e, meta.team_ids)]
        last = max(goal_idx, default=-1)
        final = {meta.home_team_id: meta.home_score, meta.away_team_id: meta.away_score}
        for f in fouls:
            if f.index > last:
                assert ctx[f.event_id].goal_difference == \
                    final[f.possession_team_id] - final[f.fouling_team_id]


# -- 360 counts --------------------------------------------------------------------

def fig2_frame():
    """Foul Committed frame, coordinates in the fouling (defending) team's frame.

    Attacking-frame foul at x=70.  Two attackers ahead of the ball, one
    behind; three defenders goal-side (keeper included), one behind.
    """
    att = [(80, 30), (95, 50), (60, 40)]
    dfn = [(85, 35), (100, 45), (119, 40), (50, 20)]
    players = [FramePlayer((50, 40), teammate=True, actor=True)]  # fouler at 120-70
    players += [FramePlayer((120 - x, 80 - y), teammate=False) for x, y in att]
    players += [FramePlayer((120 - x, 80 - y), teammate=True, keeper=(x == 119)) for x, y in dfn]
    players.append(FramePlayer((51, 40), teammate=False))  # fouled player, just behind
    return FreezeFrame("fc", tuple(players))


def test_constructed_counts():
    frame = fig2_frame()
    assert count_attackers(frame, (70, 40)) == 2
    # the actor (fouler) is at x=70 in the attacking frame, not strictly ahead
    assert count_defenders(frame, (70, 40)) == 3


def test_frame_anchored_at_foul_won_not_mirrored():
    frame = fig2_frame()
    # same scene seen from the fouled player, who becomes the actor
    fouled = frame.players[-1]
    flipped = FreezeFrame("fw", tuple(
        FramePlayer(ingest.pitch.mirror(p.location), not p.teammate, p is fouled, p.keeper)
        for p in frame.players))
    assert count_attackers(flipped, (70, 40), acting_is_defender=False) == 2
    assert count_defenders(flipped, (70, 40), acting_is_defender=False) == 3


def test_empty_frame_and_boundary():
    empty = FreezeFrame("x", ())
    assert count_attackers(empty, (60, 40)) == 0
    assert count_defenders(empty, (60, 40)) == 0
    level = FreezeFrame("x", (FramePlayer((60, 40), teammate=False),))
    assert count_attackers(level, (60, 40)) == 0


def test_keeper_counted_as_defender():
    frame = FreezeFrame("x", (FramePlayer((1, 40), teammate=True, keeper=True),))
    assert count_defenders(frame, (60, 40)) >= 1


def test_counts_bounded_by_visible_players(synthetic_root):
    for path in sorted((synthetic_root / "three-sixty").iterdir()):
        mid = int(path.stem)
        events = ingest.load_match_events(str(synthetic_root), mid)
        frames = ingest.load_frames(str(synthetic_root), mid)
        fouls = extract_fouls(events, mid)
        for f in fouls:
            ctx = replay(events, fouls, frames)[f.event_id]
            if ctx.attackers_count is None:
                assert f.event_id not in frames
                continue
            assert ctx.attackers_count + ctx.defenders_count <= len(frames[f.event_id].players)
        assert all(c.attackers_count is None for c in replay(events, fouls).values())
