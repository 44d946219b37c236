import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xbooking import features
from xbooking.errors import PresetUnsatisfiable, SchemaMismatch, TooSmall
from xbooking.features import (Dataset, FeatureVector, Row, build_dataset, dumps_csv, loads_csv,
                               split)
from xbooking.ingest import FoulRecord
from xbooking.match_state import ContextSnapshot
from xbooking.pitch import Point


def make_rows(n_neg, n_pos, seed=0, preset="full9", matches=10):
    rng = np.random.default_rng(seed)
    labels = [False] * n_neg + [True] * n_pos
    rng.shuffle(labels)
    rows = []
    for i, lab in enumerate(labels):
        fv = FeatureVector(
            minutes=int(rng.integers(0, 95)), distance_to_goal=float(rng.uniform(0, 100)),
            angle_to_goal=float(rng.uniform(0, 3)), foul_count_player=int(rng.integers(0, 4)),
            foul_count_team=int(rng.integers(0, 15)), goal_difference=int(rng.integers(-3, 4)),
            vaep_offensive=None if rng.uniform() < 0.1 else float(rng.uniform()),
            attackers_count=int(rng.integers(0, 8)), defenders_count=None if i % 7 == 0 else 4)
        rows.append(Row(fv, lab, 100 + i % matches, f"ev{i:05d}"))
    rows.sort(key=lambda r: r.key)
    return Dataset(rows, preset)


def foul(eid, x=100.0, y=40.0, yellow=False, mid=1):
    p = Point(x, y)
    return FoulRecord(mid, eid, 1, 1, 10, 0, 9, 2, 1, Point(120 - x, 80 - y), p, yellow,
                      "yellow" if yellow else "none")


def test_empty_fouls_give_empty_dataset():
    ds = build_dataset([], {}, "naive6")
    assert len(ds) == 0 and ds.to_arrays()[0].shape == (0, 6)


def test_build_row_values():
    ctx = {"a": ContextSnapshot(33, 1, 4, -1, 2, 3)}
    ds = build_dataset([foul("a", 108, 40, True)], ctx, "full9", {(1, "a"): 0.25})
    (row,) = ds.rows
    f = row.features
    assert (f.minutes, f.foul_count_player, f.foul_count_team, f.goal_difference) == (33, 1, 4, -1)
    assert f.distance_to_goal == 12.0
    assert f.angle_to_goal == pytest.approx(2 * math.atan(4 / 12))
    assert (f.vaep_offensive, f.attackers_count, f.defenders_count) == (0.25, 2, 3)
    assert row.label_yellow
    X, y, names = ds.to_arrays()
    assert names == list(features.PRESETS["full9"]) and X.shape == (1, 9) and y[0] == 1


def test_preset_masks_unused_features():
    ctx = {"a": ContextSnapshot(33, 1, 4, -1, 2, 3)}
    ds = build_dataset([foul("a")], ctx, "naive6", {(1, "a"): 0.25})
    f = ds.rows[0].features
    assert f.vaep_offensive is None and f.attackers_count is None


def test_missing_context_excluded_and_tallied():
    ctx = {"a": ContextSnapshot(1, 0, 0, 0)}
    ds = build_dataset([foul("a"), foul("b")], ctx, "naive6")
    assert len(ds) == 1 and ds.tally["no_context"] == 1


def test_full9_without_frames_unsatisfiable():
    ctx = {"a": ContextSnapshot(1, 0, 0, 0), "b": ContextSnapshot(2, 0, 0, 0)}
    with pytest.raises(PresetUnsatisfiable):
        build_dataset([foul("a"), foul("b")], ctx, "full9", {(1, "a"): 0.1, (1, "b"): 0.2})
    with pytest.raises(PresetUnsatisfiable):
        build_dataset([foul("a")], ctx, "event7", None)


def test_partial_missing_is_tallied():
    ctx = {"a": ContextSnapshot(1, 0, 0, 0, 1, 1), "b": ContextSnapshot(2, 0, 0, 0)}
    ds = build_dataset([foul("a"), foul("b")], ctx, "full9", {(1, "a"): 0.1, (1, "b"): 0.2})
    assert ds.missing_tally() == {"vaep_offensive": 0, "attackers_count": 1, "defenders_count": 1}
    X, _, _ = ds.to_arrays()
    assert np.isnan(X[1, 7])


def test_build_is_deterministic():
    ctx = {e: ContextSnapshot(i, 0, i, 0) for i, e in enumerate("cab")}
    fl = [foul(e) for e in "cab"]
    assert build_dataset(fl, ctx, "naive6") == build_dataset(list(reversed(fl)), ctx, "naive6")


# -- splits ------------------------------------------------------------------------

def test_957_rows_split_766_191():
    ds = make_rows(717, 240)
    train, test = split(ds, 0.2, seed=42)
    assert (len(train), len(test)) == (766, 191)
    assert sum(r.label_yellow for r in test.rows) == math.floor(240 * 0.2)


def test_split_is_deterministic():
    ds = make_rows(8, 2, preset="naive6")
    a = split(ds, 0.2, seed=5)
    b = split(ds, 0.2, seed=5)
    assert [r.key for r in a[1].rows] == [r.key for r in b[1].rows]


def test_one_row_too_small():
    with pytest.raises(TooSmall):
        split(make_rows(1, 0), 0.2)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 200), st.integers(5, 100), st.floats(0.1, 0.5), st.integers(0, 99),
       st.booleans())
def test_split_partition_properties(n_neg, n_pos, frac, seed, stratified):
    ds = make_rows(n_neg, n_pos, seed)
    train, test = split(ds, frac, seed, stratified)
    tk = {r.key for r in train.rows}
    sk = {r.key for r in test.rows}
    assert not tk & sk and tk | sk == {r.key for r in ds.rows}
    if stratified:
        gap = abs(train.positive_rate - test.positive_rate)
        assert gap <= 1 / min(len(train), len(test)) + 1e-12
        k_pos = sum(r.label_yellow for r in test.rows)
        assert math.floor(n_pos * frac) <= k_pos <= math.floor(n_pos * frac) + 1
        assert math.floor(n_neg * frac) <= len(test) - k_pos <= math.floor(n_neg * frac) + 1


def test_floor_rounding_adjusted_when_rates_drift():
    # floor would give 2 + 11 test rows, label rates 13/17 vs 11/13
    train, test = split(make_rows(6, 24), 0.46875, seed=0)
    assert abs(train.positive_rate - test.positive_rate) <= 1 / min(len(train), len(test))
    assert (len(test) - sum(r.label_yellow for r in test.rows), len(test)) == (3, 14)


def test_split_by_match_keeps_matches_whole():
    ds = make_rows(80, 20, matches=10)
    train, test = split(ds, 0.3, 1, by_match=True)
    assert not {r.match_id for r in train.rows} & {r.match_id for r in test.rows}


# -- CSV -----------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 40), st.integers(0, 20), st.sampled_from(sorted(features.PRESETS)),
       st.integers(0, 999))
def test_csv_round_trip(n_neg, n_pos, preset, seed):
    ds = make_rows(n_neg, n_pos, seed, preset)
    again = loads_csv(dumps_csv(ds))
    assert again == ds
    assert again.preset == preset


def test_masked_vaep_is_empty_cell():
    ds = make_rows(30, 5, seed=3)
    text = dumps_csv(ds)
    masked = [r for r in ds.rows if r.features.vaep_offensive is None]
    assert masked
    line = next(l for l in text.splitlines() if l.startswith(f"{masked[0].match_id},{masked[0].event_id},"))
    assert line.split(",")[features.CSV_COLUMNS.index("vaep_offensive")] == ""
    back = {r.key: r for r in loads_csv(text).rows}
    assert back[masked[0].key].features.vaep_offensive is None


def test_extra_column_rejected():
    text = dumps_csv(make_rows(3, 1))
    lines = text.splitlines()
    lines[1] += ",extra"
    with pytest.raises(SchemaMismatch):
        loads_csv("\n".join(lines))
    lines = text.splitlines()
    lines[2] += ",1"
    with pytest.raises(SchemaMismatch):
        loads_csv("\n".join(lines))


def test_header_and_preset_checks():
    text = dumps_csv(make_rows(3, 1, preset="naive6"))
    with pytest.raises(SchemaMismatch):
        loads_csv(text, preset="full9")
    with pytest.raises(SchemaMismatch):
        loads_csv(text.replace("v1", "v9", 1))
    with pytest.raises(SchemaMismatch):
        loads_csv(text.split("\n", 1)[1])


def test_file_round_trip(tmp_path):
    ds = make_rows(10, 4)
    features.export_csv(ds, tmp_path / "d.csv")
    assert features.import_csv(tmp_path / "d.csv") == ds
