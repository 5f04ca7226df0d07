"""Versioned JSON documents for fitted models."""
from __future__ import annotations

import json

import numpy as np

from .base import Learner, TrainedModel, get_learner
from .stacking import BaseStage
from .trees import TreeArrays

FORMAT_VERSION = 1


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.ravel().tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, TreeArrays):
        return {"__trees__": {k: _encode(v) for k, v in obj.to_dict().items()}}
    if isinstance(obj, BaseStage):
        return {"__stage__": {f: _encode(getattr(obj, f)) for f in BaseStage.__dataclass_fields__}}
    if isinstance(obj, Learner):
        return {"__learner__": obj.name}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return {"__tuple__": [_encode(v) for v in obj]}
    if isinstance(obj, list):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _decode(obj):
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if not isinstance(obj, dict):
        return obj
    if "__ndarray__" in obj:
        return np.asarray(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
    if "__trees__" in obj:
        return TreeArrays(**{k: _decode(v) for k, v in obj["__trees__"].items()})
    if "__stage__" in obj:
        return BaseStage(**{k: _decode(v) for k, v in obj["__stage__"].items()})
    if "__learner__" in obj:
        return get_learner(obj["__learner__"])
    if "__tuple__" in obj:
        return tuple(_decode(v) for v in obj["__tuple__"])
    return {k: _decode(v) for k, v in obj.items()}


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "params": model.params,
        "feature_names": list(model.feature_names),
        "train_seed": model.train_seed,
        "threshold": model.threshold,
        "state": _encode(model.state),
    }


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    d = json.loads(text)
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
    return TrainedModel(
        kind=d["kind"],
        params=d["params"],
        state=_decode(d["state"]),
        feature_names=tuple(d["feature_names"]),
        train_seed=d["train_seed"],
        threshold=d["threshold"],
    )
