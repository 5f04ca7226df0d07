"""Stacked ensemble: out-of-fold base-learner scores feed a logistic meta-learner."""
from __future__ import annotations

import hashlib
import json
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit

from ..folds import derive_seed, stratified_kfold
from .base import (
    BASE_KINDS,
    FitError,
    Learner,
    ParamSpec,
    TrainedModel,
    check_training_data,
    get_learner,
    register,
)
from .logistic import newton_fit

META_PARAMS = {
    "C": ParamSpec(float, 1e-6, 1e6, 1.0),
    "k": ParamSpec(int, 2, 50, 5),
}
BASE_NAMES = tuple(k.value for k in BASE_KINDS)


@dataclass(frozen=True)
class BaseStage:
    """Everything the meta-learner needs that does not depend on its own C."""

    meta_features: np.ndarray
    fold_of_row: np.ndarray
    audit: tuple  # (train_rows, scored_rows) per fold
    bases: tuple  # (learner, state) refit on all rows
    bounds: tuple  # (lo, hi) min-max rescaling per column, None for probabilities


class _StageCache:
    """Bounded memo of base stages keyed by a digest of all their inputs."""

    def __init__(self, maxsize: int = 32):
        self._data: OrderedDict[str, BaseStage] = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, key):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        return None

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self):
        with self._lock:
            self._data.clear()


STAGE_CACHE = _StageCache()


def _digest(X, y, names, base_params, k, seed) -> str:
    h = hashlib.blake2b(digest_size=20)
    h.update(np.ascontiguousarray(X).tobytes())
    h.update(str(X.shape).encode())
    h.update(np.ascontiguousarray(y).tobytes())
    h.update(json.dumps([list(names), base_params, k, seed], sort_keys=True, default=str).encode())
    return h.hexdigest()


def _rescale(col, bounds):
    if bounds is None:
        return col
    lo, hi = bounds
    return (col - lo) / (hi - lo) if hi > lo else np.zeros_like(col)


def _base_stage(X, y, learners: Sequence[Learner], base_params: Mapping[str, dict], k: int, seed: int) -> BaseStage:
    folds = stratified_kfold(y, k, derive_seed(seed, 0))
    n = X.shape[0]
    meta = np.empty((n, len(learners)))
    audit = []
    for f, (train, test) in enumerate(folds.folds()):
        for j, lrn in enumerate(learners):
            state = lrn.fit(X[train], y[train], base_params[lrn.name], derive_seed(seed, 1 + f, j))
            meta[test, j] = lrn.scores(state, X[test])
        audit.append((train, test))
    bounds = tuple(
        None if lrn.probabilistic else (float(meta[:, j].min()), float(meta[:, j].max()))
        for j, lrn in enumerate(learners)
    )
    for j, b in enumerate(bounds):
        meta[:, j] = _rescale(meta[:, j], b)

    bases, full_bounds = [], []
    for j, lrn in enumerate(learners):
        state = lrn.fit(X, y, base_params[lrn.name], derive_seed(seed, 1000, j))
        bases.append((lrn, state))
        if lrn.probabilistic:
            full_bounds.append(None)
        else:
            s = lrn.scores(state, X)
            full_bounds.append((float(s.min()), float(s.max())))
    meta.setflags(write=False)
    return BaseStage(meta, folds.fold_of_row, tuple(audit), tuple(bases),
                     (bounds, tuple(full_bounds)))


def _stack(X, y, learners, base_params, C, k, seed, use_cache=True):
    if k < 2:
        raise FitError("stacking needs k >= 2 folds")
    if X.shape[0] < 2 * k:
        raise FitError(f"stacking with k={k} needs at least {2 * k} rows")
    names = [lrn.name for lrn in learners]
    key = _digest(X, y, names, base_params, k, seed) if use_cache else None
    stage = STAGE_CACHE.get(key) if use_cache else None
    if stage is None:
        stage = _base_stage(X, y, learners, base_params, k, seed)
        if use_cache:
            STAGE_CACHE.put(key, stage)
    w, b, _ = newton_fit(stage.meta_features, y, C)
    return {"stage": stage, "coef": w, "intercept": b}


def meta_matrix(state, X) -> np.ndarray:
    """Rescaled base-learner scores for new rows, one column per base learner."""
    stage = state["stage"]
    _, full_bounds = stage.bounds
    cols = [_rescale(lrn.scores(s, X), bnd) for (lrn, s), bnd in zip(stage.bases, full_bounds)]
    return np.column_stack(cols)


def _scores(state, X):
    return expit(meta_matrix(state, X) @ state["coef"] + state["intercept"])


class StackedLearner(Learner):
    """Registry entry; its hyperparameters nest one dict per base learner."""

    def validate(self, params):
        params = dict(params or {})
        unknown = set(params) - set(META_PARAMS) - set(BASE_NAMES)
        if unknown:
            raise ValueError(f"SBEL: unknown hyperparameters {sorted(unknown)}")
        out = {k: spec.coerce(k, params.get(k, spec.default)) for k, spec in META_PARAMS.items()}
        for name in BASE_NAMES:
            out[name] = get_learner(name).validate(params.get(name))
        return out


def _fit(X, y, params, seed):
    learners = [get_learner(n) for n in BASE_NAMES]
    return _stack(X, y, learners, {n: params[n] for n in BASE_NAMES}, params["C"], params["k"], seed)


LEARNER = register(StackedLearner(name="SBEL", fit=_fit, scores=_scores, params=META_PARAMS, threshold=0.5))


def fit_stacked(base_params: Mapping[str, Mapping], meta_params: Optional[Mapping], features, target,
                k: int = 5, seed: int = 0, base_learners: Optional[Sequence[Learner]] = None,
                feature_names=None) -> TrainedModel:
    """Fit the stacked ensemble.

    ``base_learners`` replaces the five standard base learners (used with
    idealized stubs in tests); ``base_params`` is keyed by learner name.
    """
    X, y = check_training_data(features, target)
    if k < 2:
        raise FitError("stacking needs k >= 2 folds")
    meta = {"C": META_PARAMS["C"].coerce("C", dict(meta_params or {}).get("C", 1.0))}
    if base_learners is None:
        params = LEARNER.validate({**meta, "k": k, **{n: base_params.get(n) for n in BASE_NAMES}})
        state = _fit(X, y, params, seed)
    else:
        learners = list(base_learners)
        bp = {lrn.name: lrn.validate(base_params.get(lrn.name)) for lrn in learners}
        params = {**meta, "k": k, **bp}
        state = _stack(X, y, learners, bp, meta["C"], k, seed, use_cache=False)
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    return TrainedModel("SBEL", params, state, names, int(seed), 0.5)


def leakage_audit(model: TrainedModel) -> bool:
    """True iff every out-of-fold score came from a model that never saw its row."""
    stage = model.state["stage"]
    n = stage.meta_features.shape[0]
    seen = np.zeros(n, dtype=np.int64)
    for train, scored in stage.audit:
        if np.intersect1d(train, scored).size:
            return False
        if not np.all(stage.fold_of_row[train] != stage.fold_of_row[scored][0]):
            return False
        seen[scored] += 1
    return bool(np.all(seen == 1))
