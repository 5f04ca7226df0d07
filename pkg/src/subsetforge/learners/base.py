"""Uniform learner contract: parameter validation, registry and fitted models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np


class LearnerKind(str, Enum):
    LR = "LR"
    SVM = "SVM"
    RF = "RF"
    ANN = "ANN"
    GBT = "GBT"
    SBEL = "SBEL"


BASE_KINDS = (LearnerKind.LR, LearnerKind.SVM, LearnerKind.RF, LearnerKind.ANN, LearnerKind.GBT)
ALL_KINDS = BASE_KINDS + (LearnerKind.SBEL,)


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    """Type, admissible bounds and default of one hyperparameter."""

    type: type
    low: float
    high: float
    default: Any

    def coerce(self, name: str, value):
        if self.type is bool:
            if not isinstance(value, (bool, np.bool_)):
                raise ValueError(f"{name} must be a boolean, got {value!r}")
            return bool(value)
        if self.type is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if not self.low <= value <= self.high:
            raise ValueError(f"{name}={value} outside [{self.low}, {self.high}]")
        return value


@dataclass(frozen=True)
class Learner:
    """A classifier implementation behind the common contract.

    ``fit(X, y, params, seed)`` returns an opaque state, ``scores(state, X)``
    maps rows to real scores. Custom learners (e.g. test stubs) can be passed
    anywhere a :class:`LearnerKind` is accepted.
    """

    name: str
    fit: Callable[[np.ndarray, np.ndarray, dict, int], Any]
    scores: Callable[[Any, np.ndarray], np.ndarray]
    params: Mapping[str, ParamSpec] = field(default_factory=dict)
    threshold: float = 0.5
    probabilistic: bool = True

    def validate(self, params: Optional[Mapping]) -> dict:
        params = dict(params or {})
        unknown = set(params) - set(self.params)
        if unknown:
            raise ValueError(f"{self.name}: unknown hyperparameters {sorted(unknown)}")
        return {k: spec.coerce(k, params.get(k, spec.default)) for k, spec in self.params.items()}


_REGISTRY: dict[str, Learner] = {}


def register(learner: Learner) -> Learner:
    _REGISTRY[learner.name] = learner
    return learner


KindLike = Union[LearnerKind, str, Learner]


def get_learner(kind: KindLike) -> Learner:
    if isinstance(kind, Learner):
        return kind
    name = kind.value if isinstance(kind, LearnerKind) else str(kind)
    if name == "XGBoost":
        name = "GBT"
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown learner kind {kind!r}") from None


def kind_name(kind: KindLike) -> str:
    return get_learner(kind).name


def validate_params(kind: KindLike, params: Optional[Mapping]) -> dict:
    return get_learner(kind).validate(params)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    params: dict
    state: Any
    feature_names: tuple[str, ...]
    train_seed: int
    threshold: float = 0.5
    # set when fit with an unregistered learner object (e.g. a test stub)
    learner: Optional[Learner] = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _check_matrix(X, n_cols: Optional[int] = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise FitError("features must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise FitError("features contain non-finite values")
    if n_cols is not None and X.shape[1] != n_cols:
        raise FitError(f"model was fit on {n_cols} columns, got {X.shape[1]}")
    return np.ascontiguousarray(X)


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = _check_matrix(X)
    y = np.asarray(y).ravel()
    if y.size != X.shape[0]:
        raise FitError("features and target have different row counts")
    if X.shape[0] < 2:
        raise FitError("need at least two rows")
    if not np.all((y == 0) | (y == 1)):
        raise FitError("target must be binary 0/1")
    if y.min() == y.max():
        raise FitError("target has a single class")
    return X, y.astype(np.float64)


def fit(kind: KindLike, params: Optional[Mapping], features, target, seed: int = 0,
        feature_names: Optional[Sequence[str]] = None) -> TrainedModel:
    """Fit a learner; deterministic given inputs, params and seed."""
    learner = get_learner(kind)
    X, y = check_training_data(features, target)
    p = learner.validate(params)
    state = learner.fit(X, y, p, int(seed))
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise FitError("feature_names length does not match column count")
    custom = None if _REGISTRY.get(learner.name) is learner else learner
    return TrainedModel(learner.name, p, state, names, int(seed), learner.threshold, custom)


def predict_scores(model: TrainedModel, features) -> np.ndarray:
    X = _check_matrix(features, model.n_features)
    learner = model.learner or get_learner(model.kind)
    return np.asarray(learner.scores(model.state, X), dtype=np.float64)


def predict_labels(model: TrainedModel, features, threshold: Optional[float] = None) -> np.ndarray:
    """Label 1 iff score >= threshold (default: the learner's natural cut-off)."""
    t = model.threshold if threshold is None else threshold
    return (predict_scores(model, features) >= t).astype(np.int64)
