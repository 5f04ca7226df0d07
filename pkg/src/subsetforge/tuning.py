"""Stratified cross-validated AUC and randomized hyperparameter search."""
from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .folds import FoldAssignment, derive_seed, stratified_kfold
from .learners import KindLike, get_learner, predict_scores
from .metrics import auc_score

logger = logging.getLogger(__name__)

__all__ = [
    "Categorical",
    "Fixed",
    "FoldAssignment",
    "LogUniform",
    "SearchError",
    "SearchResult",
    "SearchSpace",
    "Uniform",
    "UniformInt",
    "compact_space",
    "cv_auc",
    "default_space",
    "default_threads",
    "parallel_map",
    "randomized_search",
    "stacking_space",
    "stratified_kfold",
]


class SearchError(RuntimeError):
    def __init__(self, message, trials=()):
        super().__init__(message)
        self.trials = list(trials)


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def sample(self, rng):
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def sample(self, rng):
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class UniformInt:
    low: int
    high: int  # inclusive

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def sample(self, rng):
        return self.values[int(rng.integers(len(self.values)))]


@dataclass(frozen=True)
class Fixed:
    value: Any

    def sample(self, rng):
        return self.value


@dataclass(frozen=True)
class SearchSpace:
    """Per-parameter distributions for one learner kind."""

    params: Mapping[str, Any]

    def sample(self, rng: np.random.Generator) -> dict:
        # sorted keys so the draw order does not depend on dict construction
        return {k: self.params[k].sample(rng) for k in sorted(self.params)}


_DEFAULT = {
    "LR": {"C": LogUniform(1e-3, 1e3), "max_iter": Fixed(100), "tol": Fixed(1e-6)},
    "SVM": {"C": LogUniform(1e-3, 1e3), "epochs": UniformInt(50, 200)},
    "RF": {"n_trees": UniformInt(50, 400), "max_depth": UniformInt(2, 16),
           "min_leaf": UniformInt(1, 20), "max_features": Uniform(0.3, 1.0), "bootstrap": Fixed(True)},
    "ANN": {"hidden_units": UniformInt(8, 128), "learning_rate": LogUniform(1e-4, 1e-1),
            "epochs": UniformInt(50, 300), "l2": LogUniform(1e-6, 1e-2)},
    "GBT": {"rounds": UniformInt(50, 400), "learning_rate": LogUniform(0.01, 0.3),
            "max_depth": UniformInt(2, 8), "subsample": Uniform(0.5, 1.0),
            "colsample": Uniform(0.5, 1.0), "reg_lambda": LogUniform(1e-3, 10.0)},
}

# Same shape as the defaults with cheaper upper ranges, for runtime-bounded runs.
_COMPACT = {
    "LR": _DEFAULT["LR"],
    "SVM": {"C": LogUniform(1e-3, 1e3), "epochs": UniformInt(10, 30)},
    "RF": {"n_trees": UniformInt(10, 40), "max_depth": UniformInt(2, 8),
           "min_leaf": UniformInt(1, 20), "max_features": Uniform(0.3, 1.0), "bootstrap": Fixed(True)},
    "ANN": {"hidden_units": UniformInt(4, 16), "learning_rate": LogUniform(1e-3, 1e-1),
            "epochs": UniformInt(10, 40), "l2": LogUniform(1e-6, 1e-2)},
    "GBT": {"rounds": UniformInt(10, 60), "learning_rate": LogUniform(0.03, 0.3),
            "max_depth": UniformInt(2, 4), "subsample": Uniform(0.5, 1.0),
            "colsample": Uniform(0.5, 1.0), "reg_lambda": LogUniform(1e-3, 10.0)},
}

SPACE_PRESETS = {"default": _DEFAULT, "compact": _COMPACT}


def default_space(kind: KindLike, preset: str = "default") -> SearchSpace:
    name = get_learner(kind).name
    if name == "SBEL":
        raise ValueError("SBEL's space depends on tuned base parameters; use stacking_space()")
    return SearchSpace(dict(SPACE_PRESETS[preset][name]))


def compact_space(kind: KindLike) -> SearchSpace:
    return default_space(kind, "compact")


def stacking_space(base_params: Mapping[str, Mapping], k: int = 5) -> SearchSpace:
    """Meta-learner C is searched; tuned base parameters are held fixed."""
    space = {"C": LogUniform(1e-3, 1e3), "k": Fixed(k)}
    space.update({name: Fixed(dict(p)) for name, p in base_params.items()})
    return SearchSpace(space)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SUBSETFORGE_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fold_seed(seed: int, position: int) -> int:
    return derive_seed(seed, 17, position)


def cv_fold_aucs(kind: KindLike, params: Optional[Mapping], features, target, folds: FoldAssignment,
                 seed: int) -> list[Optional[float]]:
    """Held-out AUC per fold in canonical fold order; ``None`` for single-class folds."""
    from .learners import fit

    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target)
    if folds.n_rows != y.size:
        raise ValueError("fold assignment does not cover every row")
    out = []
    for pos, (train, test) in enumerate(folds.folds()):
        yt = y[test]
        if yt.min() == yt.max():
            warnings.warn(f"fold {pos} holds out a single class; its AUC is skipped", RuntimeWarning)
            out.append(None)
            continue
        model = fit(kind, params, X[train], y[train], seed=fold_seed(seed, pos))
        out.append(auc_score(yt, predict_scores(model, X[test])))
    return out


def cv_auc(kind: KindLike, params: Optional[Mapping], features, target, folds: FoldAssignment,
           seed: int) -> float:
    """Mean held-out AUC over folds, each fit with a seed derived from (seed, fold)."""
    aucs = [a for a in cv_fold_aucs(kind, params, features, target, folds, seed) if a is not None]
    if not aucs:
        raise ValueError("every fold held out a single class; cv AUC undefined")
    return float(np.mean(aucs))


@dataclass
class Trial:
    params: dict
    cv_auc: Optional[float]
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"params": self.params, "cv_auc": self.cv_auc, "error": self.error}


@dataclass
class SearchResult:
    best_params: dict
    best_cv_auc: float
    trials: list[Trial] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "best_params": self.best_params,
            "best_cv_auc": self.best_cv_auc,
            "trials": [t.to_dict() for t in self.trials],
        }


def randomized_search(kind: KindLike, space: SearchSpace, budget: int, features, target,
                      folds: FoldAssignment, seed: int, threads: int = 1) -> SearchResult:
    """Evaluate ``budget`` settings drawn from ``space``; the best mean CV AUC wins.

    Settings are drawn sequentially from one seeded stream, so a larger budget
    extends the trial list of a smaller one. Ties go to the earliest trial.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    learner = get_learner(kind)
    rng = np.random.default_rng(derive_seed(seed, 29))
    settings = [learner.validate(space.sample(rng)) for _ in range(budget)]

    def run(params):
        try:
            return Trial(params, cv_auc(learner, params, features, target, folds, seed))
        except Exception as exc:  # noqa: BLE001  (recorded as trial diagnostics)
            logger.debug("trial failed: %s", exc)
            return Trial(params, None, f"{type(exc).__name__}: {exc}")

    trials = parallel_map(run, settings, threads)
    ok = [(i, t) for i, t in enumerate(trials) if t.cv_auc is not None]
    if not ok:
        raise SearchError(f"all {budget} {learner.name} trials failed", trials)
    best_i, best = max(ok, key=lambda it: (it[1].cv_auc, -it[0]))
    return SearchResult(best.params, best.cv_auc, trials)
