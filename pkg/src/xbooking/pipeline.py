"""Corpus assembly: competition selection, per-match loading and the
foul -> feature dataset path shared by the CLI and replication tests."""
from __future__ import annotations

import logging

import numpy as np
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ConfigError, DegenerateLabels, SchemaMismatch
from .features import PRESETS, Dataset, build_dataset
from .ingest import (CompetitionRef, DataSource, FoulDiagnostics, FoulRecord, FreezeFrame,
                     MatchMeta, RawEvent, extract_fouls, load_competitions, load_frames,
                     load_match_events, load_matches)
from .match_state import ContextSnapshot, replay
from .vaep import (DEFAULT_WINDOW, VaepModel, fit_vaep_arrays, prior_action, to_actions,
                   training_arrays)

logger = logging.getLogger(__name__)


@dataclass
class MatchData:
    """Everything later stages need from one match.

    Raw events are kept only on request (player minutes need them); VAEP
    inputs are stored as compact arrays plus, per foul, the row of the
    preceding action and whether that action was the fouled team's.
    """

    meta: MatchMeta
    fouls: List[FoulRecord]
    contexts: Dict[str, ContextSnapshot]
    has_frames: bool = False
    events: List[RawEvent] = field(default_factory=list)
    vaep_X: Optional[np.ndarray] = None
    vaep_ys: Optional[np.ndarray] = None
    vaep_yc: Optional[np.ndarray] = None
    foul_prior: Dict[str, Tuple[Optional[int], bool]] = field(default_factory=dict)


@dataclass
class Corpus:
    matches: List[MatchData]
    diagnostics: FoulDiagnostics

    @property
    def fouls(self) -> List[FoulRecord]:
        return [f for m in self.matches for f in m.fouls]

    @property
    def metas(self) -> List[MatchMeta]:
        return [m.meta for m in self.matches]

    @property
    def contexts(self) -> Dict[str, ContextSnapshot]:
        out: Dict[str, ContextSnapshot] = {}
        for m in self.matches:
            out.update(m.contexts)
        return out

    def events_by_match(self) -> Dict[int, List[RawEvent]]:
        return {m.meta.match_id: m.events for m in self.matches}


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


def select_competitions(catalog: Sequence[CompetitionRef], selectors: Iterable[str]) -> List[CompetitionRef]:
    """Resolve selectors against the catalog.

    A selector is ``"<competition name> <season name>"``, ``"<cid>/<sid>"``,
    ``"all-male"`` or ``"all-360"`` (men's competitions with 360 data).
    """
    chosen: Dict[Tuple[int, int], CompetitionRef] = {}
    for sel in selectors:
        sel = sel.strip()
        if not sel:
            continue
        if sel in ("all-male", "all-360"):
            hits = [c for c in catalog if c.gender == "male" and (sel == "all-male" or c.has_360)]
        elif "/" in sel and sel.replace("/", "").isdigit():
            cid, sid = (int(p) for p in sel.split("/"))
            hits = [c for c in catalog if (c.competition_id, c.season_id) == (cid, sid)]
        else:
            hits = [c for c in catalog if _norm(c.label) == _norm(sel) and c.gender == "male"] \
                or [c for c in catalog if _norm(c.label) == _norm(sel)]
        if not hits:
            raise ConfigError(f"competition selector {sel!r} matches nothing in the catalog")
        for c in hits:
            chosen[(c.competition_id, c.season_id)] = c
    return [chosen[k] for k in sorted(chosen)]


def match_from_events(meta: MatchMeta, events: List[RawEvent], frames: Dict[str, FreezeFrame],
                      counter_mode: str = "filtered",
                      diagnostics: Optional[FoulDiagnostics] = None, with_actions: bool = True,
                      keep_events: bool = False, window_k: int = DEFAULT_WINDOW) -> MatchData:
    fouls = extract_fouls(events, meta.match_id, diagnostics)
    contexts = replay(events, fouls, frames or None, counter_mode)
    md = MatchData(meta, fouls, contexts, has_frames=bool(frames),
                   events=events if keep_events else [])
    if with_actions:
        actions = to_actions(events)
        if actions:
            md.vaep_X, md.vaep_ys, md.vaep_yc = training_arrays(actions, window_k)
        for foul in fouls:
            pos = prior_action(foul, actions)
            same = pos is not None and actions[pos].team_id == foul.possession_team_id
            md.foul_prior[foul.event_id] = (pos, same)
    return md


def load_match(source, meta: MatchMeta, counter_mode: str = "filtered",
               diagnostics: Optional[FoulDiagnostics] = None, with_frames: bool = True,
               with_actions: bool = True, keep_events: bool = False) -> MatchData:
    events = load_match_events(source, meta.match_id)
    frames = load_frames(source, meta.match_id) if with_frames else {}
    return match_from_events(meta, events, frames, counter_mode, diagnostics, with_actions,
                             keep_events)


def load_corpus(source: DataSource, selectors: Sequence[str], require_360: bool = False,
                counter_mode: str = "filtered", with_actions: bool = True,
                keep_events: bool = False) -> Corpus:
    catalog = load_competitions(source)
    comps = select_competitions(catalog, selectors)
    diag = FoulDiagnostics()
    matches: List[MatchData] = []
    for comp in comps:
        metas = load_matches(source, comp)
        logger.info("%s: %d matches", comp.label, len(metas))
        for meta in metas:
            if require_360 and not source.exists(f"three-sixty/{meta.match_id}.json"):
                continue
            matches.append(load_match(source, meta, counter_mode, diag, with_actions=with_actions,
                                      keep_events=keep_events))
    matches.sort(key=lambda m: m.meta.match_id)
    return Corpus(matches, diag)


def fit_vaep(corpus: Corpus, seed: int = 42, params: Optional[dict] = None) -> VaepModel:
    parts = [m for m in corpus.matches if m.vaep_X is not None]
    if not parts:
        raise DegenerateLabels("corpus has no actions to train the VAEP models on")
    return fit_vaep_arrays(np.vstack([m.vaep_X for m in parts]),
                           np.concatenate([m.vaep_ys for m in parts]),
                           np.concatenate([m.vaep_yc for m in parts]),
                           params=params, seed=seed)


def vaep_offensive(corpus: Corpus, model: VaepModel) -> Dict[Tuple[int, str], float]:
    """Fouled team's scoring probability at every foul, batched per match."""
    out: Dict[Tuple[int, str], float] = {}
    base = model.scores_model.base_rate
    for m in corpus.matches:
        rows = [(f, *m.foul_prior.get(f.event_id, (None, False))) for f in m.fouls]
        idx = [pos for _, pos, _ in rows if pos is not None]
        if idx and m.vaep_X is not None:
            X = m.vaep_X[idx]
            ps = model.scores_model.predict_proba(X)
            pc = model.concedes_model.predict_proba(X)
        it = iter(range(len(idx)))
        for foul, pos, same in rows:
            if pos is None:
                value = base
            else:
                j = next(it)
                value = float(ps[j] if same else pc[j])
            out[(foul.match_id, foul.event_id)] = min(max(value, 0.0), 1.0)
    return out


def corpus_dataset(corpus: Corpus, preset: str, vaep_model: Optional[VaepModel] = None,
                   angle_mode: str = "subtended") -> Dataset:
    vaep = vaep_offensive(corpus, vaep_model) if vaep_model is not None else None
    return build_dataset(corpus.fouls, corpus.contexts, preset, vaep, angle_mode)


def preset_needs_vaep(preset: str) -> bool:
    return "vaep_offensive" in PRESETS[preset]


def preset_for_schema(feature_names: Sequence[str]) -> str:
    for name, cols in PRESETS.items():
        if tuple(feature_names) == cols:
            return name
    raise SchemaMismatch(f"model features {list(feature_names)} match no preset")


def summarize(corpus: Corpus) -> Dict[str, object]:
    per_comp: Counter = Counter(m.meta.competition.label for m in corpus.matches)
    teams = {t for m in corpus.matches for t in m.meta.team_ids}
    return {
        "matches": len(corpus.matches),
        "fouls": len(corpus.fouls),
        "yellow": sum(f.label_yellow for f in corpus.fouls),
        "teams": len(teams),
        "players": len({f.fouling_player_id for f in corpus.fouls}),
        "per_competition": dict(sorted(per_comp.items())),
        "diagnostics": corpus.diagnostics.to_dict(),
    }
