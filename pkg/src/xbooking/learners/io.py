"""Versioned, checksummed JSON model files."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict

import numpy as np

from ..errors import CorruptModel, IoError, VersionMismatch
from .boosting import BoostedModel
from .logreg import LogisticModel
from .tree import DecisionTree, Tree

FORMAT_VERSION = 1


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    return value


def model_payload(model) -> Dict[str, Any]:
    """Plain-dict description of a model, without version or checksum."""
    if isinstance(model, BoostedModel):
        return {
            "model_type": "boosted",
            "feature_schema": list(model.feature_names),
            "hyperparameters": _jsonable(model.params),
            "order": model.order,
            "learning_rate": model.learning_rate,
            "base_score": model.base_score,
            "base_rate": model.prior,
            "trees": [{"nodes": t.to_nodes()} for t in model.trees],
        }
    if isinstance(model, DecisionTree):
        return {
            "model_type": "tree",
            "feature_schema": list(model.feature_names),
            "hyperparameters": _jsonable(model.params),
            "trees": [{"nodes": model.tree.to_nodes()}],
        }
    if isinstance(model, LogisticModel):
        return {
            "model_type": "logistic",
            "feature_schema": list(model.feature_names),
            "hyperparameters": _jsonable(model.params),
            "intercept": model.intercept,
            "weights": _jsonable(model.weights),
            "standardization": {"mean": _jsonable(model.mean), "scale": _jsonable(model.scale)},
        }
    to_payload = getattr(model, "to_payload", None)
    if to_payload is not None:
        return to_payload()
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_payload(d: Dict[str, Any]):
    kind = d.get("model_type")
    if kind == "boosted":
        return BoostedModel(
            base_score=d["base_score"],
            trees=[Tree.from_nodes(t["nodes"]) for t in d["trees"]],
            learning_rate=d["learning_rate"], order=d["order"],
            feature_names=list(d["feature_schema"]), params=dict(d["hyperparameters"]),
            prior=d.get("base_rate"),
        )
    if kind == "tree":
        return DecisionTree(Tree.from_nodes(d["trees"][0]["nodes"]), list(d["feature_schema"]),
                            dict(d["hyperparameters"]))
    if kind == "logistic":
        st = d["standardization"]
        return LogisticModel(d["intercept"], np.array(d["weights"], dtype=float),
                             np.array(st["mean"], dtype=float), np.array(st["scale"], dtype=float),
                             list(d["feature_schema"]), dict(d["hyperparameters"]))
    if kind == "vaep":
        from ..vaep import VaepModel
        return VaepModel.from_payload(d)
    raise CorruptModel(f"unknown model_type {kind!r}")


def _canonical(payload: Dict[str, Any]) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def dumps_model(model) -> bytes:
    payload = {"format_version": FORMAT_VERSION, **model_payload(model)}
    payload["checksum"] = hashlib.sha256(_canonical(payload)).hexdigest()
    return (json.dumps(payload, sort_keys=True, indent=1, allow_nan=False) + "\n").encode("utf-8")


def loads_model(data: bytes):
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"model file is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CorruptModel("model file lacks a format_version")
    version = payload["format_version"]
    if not isinstance(version, int) or version > FORMAT_VERSION:
        raise VersionMismatch(f"model format {version!r} is newer than supported {FORMAT_VERSION}")
    checksum = payload.pop("checksum", None)
    if checksum != hashlib.sha256(_canonical(payload)).hexdigest():
        raise CorruptModel("checksum mismatch")
    try:
        return model_from_payload(payload)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptModel(f"malformed model body: {exc}") from None


def save_model(model, path) -> None:
    try:
        Path(path).write_bytes(dumps_model(model))
    except OSError as exc:
        raise IoError(f"cannot write model to {path}: {exc}") from exc


def load_model(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc}") from exc
    return loads_model(data)
