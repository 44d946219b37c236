"""``xb`` command line: fetch, build, train, analyze and the exp1-3 bundles.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import analytics, pipeline
from .config import EXPERIMENTS, RunConfig, coerce_param, learner_param_space, load_config
from .errors import ConfigError, XBError
from .features import PRESETS, export_csv, import_csv, split
from .ingest import DataSource, load_competitions, load_matches
from .learners import evaluate, load_model, save_model, train_learner

logger = logging.getLogger("xbooking")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--data-base", help="open-data directory or base URL (env XB_DATA_BASE)")
    p.add_argument("--cache-dir", help="download cache (env XB_CACHE_DIR)")
    p.add_argument("--competition", action="append", default=None,
                   help="'<name> <season>', '<cid>/<sid>', all-male or all-360; repeatable")
    p.add_argument("--require-360", action="store_true", default=None,
                   help="keep only matches that have a 360 file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--learner", choices=["tree", "logreg", "gb", "xgb"])
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="learner hyperparameter override; repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--no-stratify", action="store_true", default=None)
    p.add_argument("--by-match", action="store_true", default=None)
    p.add_argument("--angle-mode", choices=["subtended", "bearing"])
    p.add_argument("--counter-mode", choices=["filtered", "all"])
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xb", description="Expected Booking (xB) toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fetch", help="download and validate open-data files")
    _common(p)
    p = sub.add_parser("build", help="extract fouls and write the feature dataset CSV")
    _common(p)
    p = sub.add_parser("train", help="split, train a learner and evaluate it")
    _common(p)
    p.add_argument("--dataset", help="dataset CSV (default: <out>/dataset.csv)")
    p = sub.add_parser("analyze", help="team/player xB tables and plot data")
    _common(p)
    p.add_argument("--model", required=True, help="trained xB model file")
    p.add_argument("--vaep-model", help="VAEP model file (default: <out>/vaep_model.json)")
    p.add_argument("--scope", required=True, help="teams or players")
    p.add_argument("--min-minutes", type=float, default=90.0)
    p = sub.add_parser("experiment", help="run a named experiment bundle end to end")
    _common(p)
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {
        "data_base": args.data_base, "cache_dir": args.cache_dir,
        "competitions": args.competition, "require_360": args.require_360,
        "preset": args.preset, "learner": args.learner, "seed": args.seed,
        "test_fraction": args.test_fraction, "angle_mode": args.angle_mode,
        "counter_mode": args.counter_mode, "out_dir": args.out, "by_match": args.by_match,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.no_stratify:
        cfg.stratified = False
    if args.learner is not None and args.config is not None and cfg.params:
        # hyperparameters from the file belong to the file's learner
        cfg.params = {k: v for k, v in cfg.params.items()
                      if k in learner_param_space(cfg.learner)}
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        cfg.params[key.strip()] = coerce_param(cfg.learner, key.strip(), raw)
    return cfg.validate()


def _source(cfg: RunConfig) -> DataSource:
    return DataSource(cfg.data_base, cfg.cache_dir)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    return out


def _need_competitions(cfg: RunConfig) -> None:
    if not cfg.competitions:
        raise UsageError("no competitions selected (use --competition or [data] competitions)")


# -- commands ---------------------------------------------------------------------

def cmd_fetch(cfg: RunConfig) -> Dict[str, int]:
    _need_competitions(cfg)
    source = _source(cfg)
    comps = pipeline.select_competitions(load_competitions(source), cfg.competitions)
    summary: Dict[str, int] = {}
    for comp in comps:
        metas = load_matches(source, comp)
        n = 0
        for meta in metas:
            source.read(f"events/{meta.match_id}.json")
            if source.exists(f"three-sixty/{meta.match_id}.json"):
                n += 1
        summary[comp.label] = len(metas)
        print(f"{comp.label}: {len(metas)} matches ({n} with 360 data)")
    print(f"downloads: {source.downloads}")
    return summary


def _build(cfg: RunConfig, out: Path, source: Optional[DataSource] = None):
    _need_competitions(cfg)
    source = source or _source(cfg)
    needs_vaep = pipeline.preset_needs_vaep(cfg.preset)
    corpus = pipeline.load_corpus(source, cfg.competitions, cfg.require_360, cfg.counter_mode,
                                  with_actions=needs_vaep)
    vaep_model = None
    if needs_vaep:
        logger.info("training VAEP models on %d matches", len(corpus.matches))
        vaep_model = pipeline.fit_vaep(corpus, seed=cfg.seed)
        save_model(vaep_model, out / "vaep_model.json")
    dataset = pipeline.corpus_dataset(corpus, cfg.preset, vaep_model, cfg.angle_mode)
    return corpus, dataset


def cmd_build(cfg: RunConfig) -> Path:
    out = _out(cfg)
    corpus, dataset = _build(cfg, out)
    path = out / "dataset.csv"
    export_csv(dataset, path)
    summary = pipeline.summarize(corpus)
    summary.update({"rows": len(dataset), "label_rate": dataset.positive_rate,
                    "missing": dataset.missing_tally(), "excluded_rows": dict(dataset.tally)})
    (out / "diagnostics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"rows: {len(dataset)}  label rate: {dataset.positive_rate:.4f}  "
          f"matches: {summary['matches']}")
    print(f"missing features: {dataset.missing_tally()}")
    print(f"foul diagnostics: {json.dumps(summary['diagnostics'], sort_keys=True)}")
    return path


def train_and_report(cfg: RunConfig, dataset, out: Path, tag: Optional[str] = None) -> dict:
    train, test = split(dataset, cfg.test_fraction, cfg.seed, cfg.stratified, cfg.by_match)
    X, y, names = train.to_arrays()
    model = train_learner(cfg.learner, X, y, names, **cfg.learner_params())
    report = evaluate(model, test)
    tag = tag or cfg.learner
    save_model(model, out / f"model_{tag}.json")
    (out / f"metrics_{tag}.json").write_text(report.to_json(), encoding="utf-8")
    (out / f"roc_{tag}.csv").write_text(report.roc_csv(), encoding="utf-8")
    print(f"[{tag}] n_train={len(train)} n_test={len(test)} accuracy={report.accuracy:.3f} "
          f"precision={report.precision:.3f} recall={report.recall:.3f} f1={report.f1:.3f} "
          f"roc_auc={report.roc_auc:.3f}")
    return report.metrics_dict()


def cmd_train(cfg: RunConfig, dataset_path: Optional[str]) -> dict:
    out = _out(cfg)
    path = dataset_path or str(out / "dataset.csv")
    dataset = import_csv(path)
    if dataset.preset != cfg.preset:
        logger.info("using dataset preset %s", dataset.preset)
        cfg = replace(cfg, preset=dataset.preset)
    return train_and_report(cfg, dataset, out)


def cmd_analyze(cfg: RunConfig, model_path: str, scope: str, vaep_path: Optional[str],
                min_minutes: float = 90.0) -> List[analytics.AggRow]:
    if scope not in ("teams", "players"):
        raise UsageError(f"scope must be 'teams' or 'players', got {scope!r}")
    _need_competitions(cfg)
    model = load_model(model_path)
    preset = pipeline.preset_for_schema(model.feature_names)
    cfg = replace(cfg, preset=preset)
    out = _out(cfg)
    needs_vaep = pipeline.preset_needs_vaep(preset)
    vaep_model = None
    if needs_vaep:
        vaep_model = load_model(vaep_path or out / "vaep_model.json")
    source = _source(cfg)
    corpus = pipeline.load_corpus(source, cfg.competitions, cfg.require_360, cfg.counter_mode,
                                  with_actions=needs_vaep, keep_events=scope == "players")
    dataset = pipeline.corpus_dataset(corpus, preset, vaep_model, cfg.angle_mode)
    scored = analytics.score_fouls(dataset, model, corpus.fouls)
    if scope == "teams":
        table = analytics.team_table(scored, corpus.metas)
    else:
        table = analytics.player_table(scored, corpus.events_by_match(), min_minutes)
    (out / f"{scope}_table.csv").write_text(analytics.table_csv(table), encoding="utf-8")
    (out / f"{scope}_table.txt").write_text(analytics.format_table(table), encoding="utf-8")
    for name, (fig_scope, x, y) in analytics.FIGURES.items():
        if fig_scope != scope:
            continue
        text, omitted = analytics.emit_plot_data(table, x, y)
        (out / f"{name}.csv").write_text(text, encoding="utf-8")
        if omitted:
            print(f"{name}: {omitted} rows without a {y} value omitted")
    print(analytics.format_table(table, limit=20), end="")
    print(f"calibration (sum xB / bookings): {analytics.calibration_ratio(scored):.3f}")
    return table


def cmd_experiment(cfg: RunConfig, name: str) -> dict:
    bundle = EXPERIMENTS[name]
    cfg = replace(cfg, preset=bundle["preset"], require_360=bundle["require_360"],
                  competitions=cfg.competitions or list(bundle["competitions"]))
    out = _out(cfg)
    corpus, dataset = _build(cfg, out)
    export_csv(dataset, out / "dataset.csv")
    results = {"experiment": name, "preset": cfg.preset, "rows": len(dataset),
               "matches": len(corpus.matches), "learners": {}}
    for learner in bundle["learners"]:
        params = cfg.params if learner == cfg.learner else {}
        lcfg = replace(cfg, learner=learner, params=dict(params)).validate()
        results["learners"][learner] = train_and_report(lcfg, dataset, out, tag=learner)
    (out / "summary.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    return results


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        if args.command == "fetch":
            cmd_fetch(cfg)
        elif args.command == "build":
            cmd_build(cfg)
        elif args.command == "train":
            cmd_train(cfg, args.dataset)
        elif args.command == "analyze":
            cmd_analyze(cfg, args.model, args.scope, args.vaep_model, args.min_minutes)
        elif args.command == "experiment":
            cmd_experiment(cfg, args.name)
    except (UsageError, ConfigError) as exc:
        print(f"xb: error: {exc}", file=sys.stderr)
        return 2
    except XBError as exc:
        print(f"xb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
