"""Run configuration: an INI-style file with sections, overridable from the
command line, validated before any work starts."""
from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .errors import ConfigError
from .features import PRESETS
from .learners import LEARNERS
from .learners.boosting import DEFAULTS as BOOST_DEFAULTS
from .match_state import COUNTER_MODES
from .pitch import ANGLE_MODES

# section -> key -> RunConfig attribute
LAYOUT: Dict[str, Dict[str, str]] = {
    "data": {"base": "data_base", "cache_dir": "cache_dir", "competitions": "competitions",
             "require_360": "require_360"},
    "features": {"preset": "preset", "angle_mode": "angle_mode", "counter_mode": "counter_mode"},
    "split": {"test_fraction": "test_fraction", "seed": "seed", "stratified": "stratified",
              "by_match": "by_match"},
    "learner": {"type": "learner"},
    "output": {"dir": "out_dir"},
}

TREE_PARAMS = {"max_depth": None, "min_samples_leaf": 1, "pos_weight": 1.0}
LOGREG_PARAMS = {"l2": 1.0, "max_iter": 100, "tol": 1e-8, "pos_weight": 1.0}


def learner_param_space(learner: str) -> Dict[str, Any]:
    if learner == "tree":
        return dict(TREE_PARAMS)
    if learner == "logreg":
        return dict(LOGREG_PARAMS)
    return {k: v for k, v in BOOST_DEFAULTS.items() if k not in ("order", "seed")}


@dataclass
class RunConfig:
    data_base: Optional[str] = None
    cache_dir: Optional[str] = None
    competitions: List[str] = field(default_factory=list)
    require_360: bool = False
    preset: str = "event7"
    angle_mode: str = "subtended"
    counter_mode: str = "filtered"
    test_fraction: float = 0.2
    seed: int = 42
    stratified: bool = True
    by_match: bool = False
    learner: str = "xgb"
    params: Dict[str, Any] = field(default_factory=dict)
    out_dir: str = "xb-out"

    def validate(self) -> "RunConfig":
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if self.angle_mode not in ANGLE_MODES:
            raise ConfigError(f"angle_mode must be one of {ANGLE_MODES}")
        if self.counter_mode not in COUNTER_MODES:
            raise ConfigError(f"counter_mode must be one of {COUNTER_MODES}")
        if self.learner not in LEARNERS:
            raise ConfigError(f"learner must be one of {LEARNERS}, got {self.learner!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        space = learner_param_space(self.learner)
        unknown = set(self.params) - set(space)
        if unknown:
            raise ConfigError(f"unknown {self.learner} hyperparameters: {sorted(unknown)}")
        return self

    def learner_params(self) -> Dict[str, Any]:
        p = {**learner_param_space(self.learner), **self.params}
        if self.learner in ("gb", "xgb"):
            p["seed"] = self.seed
        return p

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, keys in LAYOUT.items():
            cp[section] = {}
            for key, attr in keys.items():
                value = getattr(self, attr)
                if value is None:
                    continue
                cp[section][key] = "; ".join(value) if isinstance(value, list) else str(value)
        cp["params"] = {k: str(v) for k, v in sorted(self.learner_params().items()) if k != "seed"}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _coerce(raw: str, template: Any, key: str):
    text = raw.strip()
    if isinstance(template, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if template is None:
        if text.lower() in ("none", ""):
            return None
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer or none, got {raw!r}") from None
    try:
        if isinstance(template, int):
            return int(text)
        if isinstance(template, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    if isinstance(template, list):
        return [part.strip() for part in text.split(";") if part.strip()]
    return text


def coerce_param(learner: str, key: str, raw: str):
    space = learner_param_space(learner)
    if key not in space:
        raise ConfigError(f"unknown {learner} hyperparameter {key!r}")
    return _coerce(raw, space[key], f"params.{key}")


_PATH_ATTRS = ("data_base", "cache_dir")


def load_config(path: Optional[str]) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    defaults = RunConfig()
    raw_params: Dict[str, str] = {}
    for section in cp.sections():
        if section == "params":
            raw_params.update(cp[section])
            continue
        if section not in LAYOUT:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp[section].items():
            if key not in LAYOUT[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            attr = LAYOUT[section][key]
            if attr in _PATH_ATTRS:
                setattr(cfg, attr, raw.strip() or None)
            else:
                setattr(cfg, attr, _coerce(raw, getattr(defaults, attr), f"{section}.{key}"))
    cfg.params = {k: coerce_param(cfg.learner, k, v) for k, v in raw_params.items()}
    return cfg


EXPERIMENTS: Dict[str, Dict[str, Any]] = {
    # naive six features on the 360-covered corpus, four learners
    "exp1": {"preset": "naive6", "competitions": ["all-360"], "require_360": True,
             "learners": ["tree", "logreg", "gb", "xgb"]},
    # adds VAEP offensive and the two 360 counts
    "exp2": {"preset": "full9", "competitions": ["all-360"], "require_360": True,
             "learners": ["gb", "xgb"]},
    # all men's event data, 360 features dropped
    "exp3": {"preset": "event7", "competitions": ["all-male"], "require_360": False,
             "learners": ["xgb"]},
}


