"""Per-foul feature vectors, experiment presets, train/test splits and the
dataset CSV format."""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import pitch
from .errors import IoError, PresetUnsatisfiable, SchemaMismatch, TooSmall
from .ingest import FoulRecord
from .match_state import ContextSnapshot

MANDATORY = ("minutes", "distance_to_goal", "angle_to_goal", "foul_count_player",
             "foul_count_team", "goal_difference")
OPTIONAL = ("vaep_offensive", "attackers_count", "defenders_count")
ALL_FEATURES = MANDATORY + OPTIONAL
INT_FEATURES = {"minutes", "foul_count_player", "foul_count_team", "goal_difference",
                "attackers_count", "defenders_count"}

PRESETS: Dict[str, Tuple[str, ...]] = {
    "naive6": MANDATORY,
    "full9": MANDATORY + ("vaep_offensive", "attackers_count", "defenders_count"),
    "event7": MANDATORY + ("vaep_offensive",),
}

CSV_COLUMNS = ("match_id", "event_id") + ALL_FEATURES + ("label_yellow",)
CSV_VERSION = 1


@dataclass(frozen=True)
class FeatureVector:
    minutes: int
    distance_to_goal: float
    angle_to_goal: float
    foul_count_player: int
    foul_count_team: int
    goal_difference: int
    vaep_offensive: Optional[float] = None
    attackers_count: Optional[int] = None
    defenders_count: Optional[int] = None

    @property
    def missing(self) -> Dict[str, bool]:
        return {name: getattr(self, name) is None for name in OPTIONAL}


@dataclass(frozen=True)
class Row:
    features: FeatureVector
    label_yellow: bool
    match_id: int
    event_id: str

    @property
    def key(self) -> Tuple[int, str]:
        return (self.match_id, self.event_id)


@dataclass
class Dataset:
    rows: List[Row]
    preset: str
    tally: Counter = field(default_factory=Counter, compare=False)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}")
        keys = [r.key for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("dataset contains duplicate (match_id, event_id) rows")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return PRESETS[self.preset]

    def to_arrays(self) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """(X with NaN for missing values, y, feature names) for the preset."""
        names = list(self.feature_names)
        X = np.array([[_as_float(getattr(r.features, n)) for n in names] for r in self.rows],
                     dtype=float).reshape(len(self.rows), len(names))
        y = np.array([r.label_yellow for r in self.rows], dtype=float)
        return X, y, names

    @property
    def positive_rate(self) -> float:
        return sum(r.label_yellow for r in self.rows) / len(self.rows) if self.rows else math.nan

    def missing_tally(self) -> Dict[str, int]:
        return {n: sum(getattr(r.features, n) is None for r in self.rows)
                for n in self.feature_names if n in OPTIONAL}


def _as_float(v) -> float:
    return math.nan if v is None else float(v)


def build_dataset(fouls: Sequence[FoulRecord], contexts: Mapping[str, ContextSnapshot],
                  preset: str, vaep_offensive: Optional[Mapping[Tuple[int, str], float]] = None,
                  angle_mode: str = "subtended") -> Dataset:
    """One row per foul for ``preset``.

    ``contexts`` maps event id to replay snapshots (event ids are unique
    across StatsBomb matches); ``vaep_offensive`` maps (match_id, event_id)
    to the possession team's scoring probability.  Features outside the
    preset are left missing.
    """
    wanted = set(PRESETS[preset])
    tally: Counter = Counter()
    rows: List[Row] = []
    for foul in fouls:
        ctx = contexts.get(foul.event_id)
        if ctx is None:
            tally["no_context"] += 1
            continue
        loc = foul.location_attacking_frame
        vaep = None
        if "vaep_offensive" in wanted and vaep_offensive is not None:
            vaep = vaep_offensive.get((foul.match_id, foul.event_id))
        fv = FeatureVector(
            minutes=ctx.minute,
            distance_to_goal=pitch.distance_to_goal(loc),
            angle_to_goal=pitch.angle_to_goal(loc, angle_mode),
            foul_count_player=ctx.foul_count_player,
            foul_count_team=ctx.foul_count_team,
            goal_difference=ctx.goal_difference,
            vaep_offensive=vaep,
            attackers_count=ctx.attackers_count if "attackers_count" in wanted else None,
            defenders_count=ctx.defenders_count if "defenders_count" in wanted else None,
        )
        for name, miss in fv.missing.items():
            if name in wanted and miss:
                tally[f"missing_{name}"] += 1
        rows.append(Row(fv, foul.label_yellow, foul.match_id, foul.event_id))

    if rows:
        for name in wanted & set(OPTIONAL):
            if all(getattr(r.features, name) is None for r in rows):
                source = "a VAEP model" if name == "vaep_offensive" else "360 freeze frames"
                raise PresetUnsatisfiable(
                    f"preset {preset!r} needs {name}, but no row has it (requires {source})")
    rows.sort(key=lambda r: r.key)
    return Dataset(rows, preset, tally)


def _stratified_counts(sizes: Sequence[int], test_fraction: float) -> Tuple[int, int]:
    """Test rows per class (negatives, positives).

    ``floor(n_class * fraction)`` unless that leaves the train/test label
    rates further apart than ``1 / min(n_train, n_test)``; then one or both
    classes round up instead, trying negatives first.
    """
    n_neg, n_pos = sizes
    lo = [int(math.floor(s * test_fraction)) for s in sizes]
    options = [(lo[0], lo[1]), (lo[0] + 1, lo[1]), (lo[0], lo[1] + 1), (lo[0] + 1, lo[1] + 1)]
    for kn, kp in options:
        if kn > n_neg or kp > n_pos:
            continue
        m_test, m_train = kn + kp, n_neg + n_pos - kn - kp
        if m_test == 0 or m_train == 0:
            continue
        gap = abs(kp / m_test - (n_pos - kp) / m_train)
        if gap <= 1.0 / min(m_test, m_train):
            return kn, kp
    return lo[0], lo[1]


def split(dataset: Dataset, test_fraction: float = 0.2, seed: int = 42, stratified: bool = True,
          by_match: bool = False) -> Tuple[Dataset, Dataset]:
    """Deterministic train/test partition.

    Stratified splits put about ``n_class * test_fraction`` rows of each
    class into the test set (see ``_stratified_counts``); ``by_match``
    keeps whole matches together.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(dataset)
    if n == 0:
        raise TooSmall("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    test_idx: List[int] = []
    if by_match:
        matches = sorted({r.match_id for r in dataset.rows})
        perm = rng.permutation(len(matches))
        chosen = {matches[i] for i in perm[: int(math.floor(len(matches) * test_fraction))]}
        test_idx = [i for i, r in enumerate(dataset.rows) if r.match_id in chosen]
    elif stratified:
        groups = []
        for label in (False, True):
            members = np.array([i for i, r in enumerate(dataset.rows) if r.label_yellow == label],
                               dtype=int)
            groups.append(members[rng.permutation(members.size)])
        k = _stratified_counts([g.size for g in groups], test_fraction)
        for members, kc in zip(groups, k):
            test_idx.extend(members[:kc].tolist())
    else:
        test_idx = rng.permutation(n)[: int(math.floor(n * test_fraction))].tolist()
    test_set = set(test_idx)
    if not test_set or len(test_set) == n:
        raise TooSmall(f"a {test_fraction:.0%} split of {n} rows leaves one side empty")
    train_rows = [r for i, r in enumerate(dataset.rows) if i not in test_set]
    test_rows = [r for i, r in enumerate(dataset.rows) if i in test_set]
    return Dataset(train_rows, dataset.preset), Dataset(test_rows, dataset.preset)


# -- CSV -----------------------------------------------------------------------------

def _fmt(name: str, value) -> str:
    if value is None:
        return ""
    if name in INT_FEATURES:
        return str(int(value))
    return repr(float(value))


def dumps_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    buf.write(f"# xb-dataset v{CSV_VERSION} preset={dataset.preset}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in dataset.rows:
        w.writerow([r.match_id, r.event_id]
                   + [_fmt(n, getattr(r.features, n)) for n in ALL_FEATURES]
                   + [int(r.label_yellow)])
    return buf.getvalue()


def _parse_value(name: str, text: str):
    if text == "":
        if name in MANDATORY:
            raise SchemaMismatch(f"mandatory column {name} is empty")
        return None
    return int(text) if name in INT_FEATURES else float(text)


def loads_csv(text: str, preset: Optional[str] = None) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# xb-dataset v"):
        raise SchemaMismatch("missing dataset version header")
    meta = dict(part.split("=", 1) for part in lines[0][2:].split()[2:] if "=" in part)
    version = lines[0].split()[2]
    if version != f"v{CSV_VERSION}":
        raise SchemaMismatch(f"unsupported dataset version {version}")
    file_preset = meta.get("preset")
    if file_preset not in PRESETS:
        raise SchemaMismatch(f"unknown preset {file_preset!r} in dataset header")
    if preset is not None and file_preset != preset:
        raise SchemaMismatch(f"file declares preset {file_preset!r}, expected {preset!r}")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise SchemaMismatch(f"header {header} differs from {list(CSV_COLUMNS)}")
    rows = []
    for lineno, rec in enumerate(reader, start=3):
        if len(rec) != len(CSV_COLUMNS):
            raise SchemaMismatch(f"line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
        values = dict(zip(CSV_COLUMNS, rec))
        try:
            fv = FeatureVector(**{n: _parse_value(n, values[n]) for n in ALL_FEATURES})
            label = values["label_yellow"]
            if label not in ("0", "1"):
                raise ValueError(f"label must be 0 or 1, got {label!r}")
            rows.append(Row(fv, label == "1", int(values["match_id"]), values["event_id"]))
        except ValueError as exc:
            raise SchemaMismatch(f"line {lineno}: {exc}") from None
    return Dataset(rows, file_preset)


def export_csv(dataset: Dataset, path) -> None:
    try:
        Path(path).write_text(dumps_csv(dataset), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def import_csv(path, preset: Optional[str] = None) -> Dataset:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return loads_csv(text, preset)
