"""Simplified VAEP: action conversion, goal-window labels, score/concede
probability models and per-action values.

The game state is the current action alone.  Its probability of the acting
team scoring (or conceding) within the next ``k`` actions is estimated by
two boosted-tree models.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import pitch
from .errors import DegenerateLabels
from .ingest import FoulRecord, RawEvent
from .learners.boosting import BoostedModel, train_boosted
from .pitch import Point

ACTION_TYPES = ("pass", "cross", "dribble", "carry", "take_on", "shot", "clearance",
                "interception", "tackle", "foul", "other")

DEFAULT_WINDOW = 10

DEFAULT_PARAMS = {"n_trees": 100, "learning_rate": 0.1, "max_depth": 4, "order": "second",
                  "reg_lambda": 1.0, "min_child_weight": 1.0}

FEATURE_NAMES = tuple(f"type_{t}" for t in ACTION_TYPES) + (
    "start_x", "start_y", "end_x", "end_y", "end_distance", "end_angle",
    "period", "time_seconds", "success")

_TACKLE_WON = {"Won", "Success", "Success In Play", "Success Out"}
_OTHER_ON_BALL = {"Ball Recovery", "Block", "Goal Keeper", "Miscontrol", "Shield", "50/50"}


@dataclass(frozen=True)
class Action:
    index: int
    team_id: int
    player_id: Optional[int]
    type: str
    start: Point
    end: Point
    period: int
    time_seconds: float
    outcome_success: bool
    own_goal: bool = False


@dataclass(frozen=True)
class ActionValue:
    delta_p_scores: float
    delta_p_concedes: float
    value: float


def _end_location(ev: RawEvent, key: str) -> Optional[Point]:
    raw = ev.q(key)
    if raw is None:
        return None
    try:
        xy = json.loads(raw)
        return pitch.clip((float(xy[0]), float(xy[1])))
    except (ValueError, TypeError, IndexError):
        return None


def _map_event(ev: RawEvent) -> Optional[Tuple[str, bool, Optional[Point]]]:
    """(action type, success, end location) or None for off-the-ball events."""
    t = ev.type
    if t == "Pass":
        kind = "cross" if ev.q("pass.cross") == "true" else "pass"
        return kind, ev.q("pass.outcome") is None, _end_location(ev, "pass.end_location")
    if t == "Carry":
        return "carry", True, _end_location(ev, "carry.end_location")
    if t == "Dribble":
        return "take_on", ev.q("dribble.outcome") == "Complete", None
    if t == "Shot":
        return "shot", ev.q("shot.outcome") == "Goal", _end_location(ev, "shot.end_location")
    if t == "Clearance":
        return "clearance", True, None
    if t == "Interception":
        return "interception", ev.q("interception.outcome") in _TACKLE_WON, None
    if t == "Duel" and ev.q("duel.type") == "Tackle":
        return "tackle", ev.q("duel.outcome") in _TACKLE_WON, None
    if t == "Foul Committed":
        return "foul", False, None
    if t in _OTHER_ON_BALL:
        return "other", True, None
    return None


def to_actions(events: Sequence[RawEvent], dropped: Optional[Counter] = None) -> List[Action]:
    """On-the-ball actions in stream order.

    StatsBomb already reports every location in the acting team's attacking
    direction, so coordinates are used as given.  Penalty-shootout events
    are dropped.
    """
    dropped = dropped if dropped is not None else Counter()
    out: List[Action] = []
    for ev in events:
        if ev.period >= 5:
            dropped["shootout"] += 1
            continue
        if ev.type == "Own Goal Against":
            loc = ev.location or Point(0.0, 40.0)
            out.append(Action(ev.index, ev.team_id, ev.player_id, "other", loc, loc, ev.period,
                              ev.minute * 60.0 + ev.second, False, own_goal=True))
            continue
        mapped = _map_event(ev)
        if mapped is None:
            dropped[ev.type] += 1
            continue
        if ev.location is None:
            dropped["no_location"] += 1
            continue
        kind, ok, end = mapped
        out.append(Action(ev.index, ev.team_id, ev.player_id, kind, ev.location,
                          end or ev.location, ev.period, ev.minute * 60.0 + ev.second, ok))
    return out


def goal_teams(actions: Sequence[Action]) -> List[Optional[int]]:
    """Team credited with a goal by each action (None when no goal)."""
    teams = sorted({a.team_id for a in actions})
    out: List[Optional[int]] = []
    for a in actions:
        if a.own_goal:
            others = [t for t in teams if t != a.team_id]
            out.append(others[0] if others else -1)
        elif a.type == "shot" and a.outcome_success:
            out.append(a.team_id)
        else:
            out.append(None)
    return out


def label_windows(actions: Sequence[Action], k: int = DEFAULT_WINDOW) -> List[Tuple[bool, bool]]:
    """(scores, concedes) labels per action.

    The window covers the action itself and the ``k`` actions after it,
    truncated at the end of the period.
    """
    if k < 1:
        raise ValueError("window k must be >= 1")
    n = len(actions)
    if n == 0:
        return []
    credited = goal_teams(actions)
    team = np.array([a.team_id for a in actions])
    period = np.array([a.period for a in actions])
    has_goal = np.array([c is not None for c in credited])
    goal_team = np.array([c if c is not None else -2 for c in credited])
    scores = np.zeros(n, dtype=bool)
    concedes = np.zeros(n, dtype=bool)
    for off in range(0, k + 1):
        if off >= n:
            break
        src = slice(0, n - off)
        dst = slice(off, n)
        valid = has_goal[dst] & (period[dst] == period[src])
        scores[src] |= valid & (goal_team[dst] == team[src])
        concedes[src] |= valid & (goal_team[dst] != team[src])
    return list(zip(scores.tolist(), concedes.tolist()))


def action_features(actions: Sequence[Action]) -> np.ndarray:
    X = np.zeros((len(actions), len(FEATURE_NAMES)))
    n_types = len(ACTION_TYPES)
    for i, a in enumerate(actions):
        X[i, ACTION_TYPES.index(a.type)] = 1.0
        X[i, n_types:] = (a.start.x, a.start.y, a.end.x, a.end.y,
                          pitch.distance_to_goal(a.end), pitch.angle_to_goal(a.end),
                          a.period, a.time_seconds, float(a.outcome_success))
    return X


@dataclass
class VaepModel:
    scores_model: BoostedModel
    concedes_model: BoostedModel
    window_k: int = DEFAULT_WINDOW
    feature_names: Tuple[str, ...] = FEATURE_NAMES

    model_type = "vaep"

    def probabilities(self, actions: Sequence[Action]) -> Tuple[np.ndarray, np.ndarray]:
        if not actions:
            return np.zeros(0), np.zeros(0)
        X = action_features(actions)
        return self.scores_model.predict_proba(X), self.concedes_model.predict_proba(X)

    def to_payload(self) -> dict:
        from .learners.io import model_payload
        return {
            "model_type": "vaep",
            "feature_schema": list(self.feature_names),
            "window_k": self.window_k,
            "scores_model": model_payload(self.scores_model),
            "concedes_model": model_payload(self.concedes_model),
        }

    @classmethod
    def from_payload(cls, d: dict) -> "VaepModel":
        from .learners.io import model_from_payload
        return cls(model_from_payload(d["scores_model"]), model_from_payload(d["concedes_model"]),
                   int(d["window_k"]), tuple(d["feature_schema"]))


def training_arrays(actions: Sequence[Action], k: int = DEFAULT_WINDOW):
    """(features, scores labels, concedes labels) for one match."""
    labels = label_windows(actions, k)
    X = action_features(actions)
    ys = np.array([s for s, _ in labels], dtype=float)
    yc = np.array([c for _, c in labels], dtype=float)
    return X, ys, yc


def fit_vaep_arrays(X: np.ndarray, ys: np.ndarray, yc: np.ndarray, k: int = DEFAULT_WINDOW,
                    params: Optional[Dict] = None, seed: int = 42) -> VaepModel:
    if len(ys) == 0:
        raise DegenerateLabels("no actions to train on")
    for name, lab in (("scores", ys), ("concedes", yc)):
        if lab.sum() == 0:
            raise DegenerateLabels(f"the {name} task has no positive labels")
        if lab.sum() == len(lab):
            raise DegenerateLabels(f"the {name} task has no negative labels")
    p = {**DEFAULT_PARAMS, **(params or {}), "seed": seed}
    return VaepModel(train_boosted(X, ys, FEATURE_NAMES, **p),
                     train_boosted(X, yc, FEATURE_NAMES, **p), k)


def train_vaep(action_sets: Sequence[Sequence[Action]], k: int = DEFAULT_WINDOW,
               params: Optional[Dict] = None, seed: int = 42) -> VaepModel:
    """Fit the scoring and conceding models on actions from many matches."""
    parts = [training_arrays(a, k) for a in action_sets if a]
    if not parts:
        raise DegenerateLabels("no actions to train on")
    X = np.vstack([p[0] for p in parts])
    ys = np.concatenate([p[1] for p in parts])
    yc = np.concatenate([p[2] for p in parts])
    return fit_vaep_arrays(X, ys, yc, k, params, seed)


def prior_action(foul: FoulRecord, actions: Sequence[Action]) -> Optional[int]:
    """Position of the last same-period action before the foul, if any."""
    prior = None
    for i, a in enumerate(actions):
        if a.index >= foul.index:
            break
        if a.period == foul.period:
            prior = i
    return prior


def p_scores_at_foul(foul: FoulRecord, actions: Sequence[Action], model: VaepModel) -> float:
    """Scoring probability of the fouled (possession) team just before the foul.

    Uses the last action of the same period preceding the foul.  If that
    action belongs to the defending team, the possession team's scoring
    chance is that action's conceding probability.
    """
    pos = prior_action(foul, actions)
    if pos is None:
        return model.scores_model.base_rate
    prior = actions[pos]
    ps, pc = model.probabilities([prior])
    value = ps[0] if prior.team_id == foul.possession_team_id else pc[0]
    return float(min(max(value, 0.0), 1.0))


def action_values(actions: Sequence[Action], model: VaepModel) -> List[ActionValue]:
    """Per-action VAEP values: change in scoring minus change in conceding
    probability relative to the previous state (base rates at period start)."""
    ps, pc = model.probabilities(actions)
    out: List[ActionValue] = []
    base_s, base_c = model.scores_model.base_rate, model.concedes_model.base_rate
    for i, a in enumerate(actions):
        if i == 0 or actions[i - 1].period != a.period:
            prev_s, prev_c = base_s, base_c
        elif actions[i - 1].team_id == a.team_id:
            prev_s, prev_c = ps[i - 1], pc[i - 1]
        else:
            prev_s, prev_c = pc[i - 1], ps[i - 1]
        ds = float(ps[i] - prev_s)
        dc = float(pc[i] - prev_c)
        out.append(ActionValue(ds, dc, ds - dc))
    return out
