"""Spearman ranking, filter sweeps and greedy wrapper selection."""
from __future__ import annotations

import hashlib
import json
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .folds import FoldAssignment, derive_seed, stratified_kfold
from .learners import ALL_KINDS, BASE_KINDS, Learner, fit, get_learner, predict_labels, predict_scores
from .metrics import MetricsBundle, evaluate, spearman
from .schema import Dataset, SplitPair, standardize
from .tuning import (
    SearchResult,
    SearchSpace,
    cv_auc,
    default_space,
    parallel_map,
    randomized_search,
    stacking_space,
)

CV_FOLDS = 5
BASELINE_AUC = 0.5
REPORT_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# ranking

@dataclass(frozen=True)
class RankedFeatures:
    """``(name, signed rho)`` pairs sorted by |rho|."""

    items: tuple[tuple[str, float], ...]
    order: str = "descending"

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.items]

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def prefix(self, size: int) -> list[str]:
        return self.names[:size]

    def reversed(self) -> "RankedFeatures":
        order = "ascending" if self.order == "descending" else "descending"
        return RankedFeatures(tuple(reversed(self.items)), order)

    def to_dict(self) -> dict:
        return {"order": self.order, "features": [{"name": n, "rho": r} for n, r in self.items]}


def rank_features(dataset: Dataset, order: str = "descending") -> RankedFeatures:
    """Rank predictors by |Spearman rho| against the target.

    Ties keep schema order in the descending ranking; the ascending ranking is
    its exact reverse. Constant columns get rho = 0 and go last (descending).
    """
    if order not in ("descending", "ascending"):
        raise ValueError("order must be 'descending' or 'ascending'")
    y = dataset.target
    live, dead = [], []
    for j, name in enumerate(dataset.feature_names):
        x = dataset.features[:, j]
        if x.min() == x.max():
            warnings.warn(f"{name} is constant; ranked last with rho = 0", RuntimeWarning)
            dead.append((name, 0.0))
            continue
        live.append((j, name, spearman(x, y)))
    live.sort(key=lambda t: (-abs(t[2]), t[0]))
    ranked = RankedFeatures(tuple((n, r) for _, n, r in live) + tuple(dead))
    return ranked if order == "descending" else ranked.reversed()


# ---------------------------------------------------------------------------
# subset scoring

class _ScoreCache:
    def __init__(self, maxsize: int = 200_000):
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, key):
        with self._lock:
            return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self):
        with self._lock:
            self._data.clear()


SCORE_CACHE = _ScoreCache()


def _is_registered(learner: Learner) -> bool:
    try:
        return get_learner(learner.name) is learner
    except ValueError:
        return False


class SubsetScorer:
    """Mean CV AUC of column subsets under fixed folds, params and seed.

    Columns are always used in dataset order, so a subset's score does not
    depend on the order its features were chosen. Scores for registered
    learners are memoized process-wide.
    """

    def __init__(self, kind, dataset: Dataset, folds: FoldAssignment, params: Optional[Mapping], seed: int):
        self.learner = get_learner(kind)
        self.dataset = dataset
        self.folds = folds
        self.params = self.learner.validate(params)
        self.seed = int(seed)
        self._cacheable = _is_registered(self.learner)
        if self._cacheable:
            h = hashlib.blake2b(digest_size=20)
            h.update(np.ascontiguousarray(dataset.features).tobytes())
            h.update(dataset.target.tobytes())
            h.update(json.dumps([dataset.feature_names, self.params, self.seed], sort_keys=True).encode())
            h.update(folds.fold_of_row.tobytes())
            self._key = (self.learner.name, h.hexdigest())

    def score(self, names: Sequence[str]) -> float:
        if not names:
            return BASELINE_AUC
        cols = tuple(sorted(self.dataset.schema.index(n) for n in names))
        key = (self._key, cols) if self._cacheable else None
        if key is not None:
            hit = SCORE_CACHE.get(key)
            if hit is not None:
                return hit
        X = self.dataset.features[:, list(cols)]
        value = cv_auc(self.learner, self.params, X, self.dataset.target, self.folds, self.seed)
        if key is not None:
            SCORE_CACHE.put(key, value)
        return value


@dataclass(frozen=True)
class StepRecord:
    step: int
    candidates: int
    feature: str
    action: str  # "add", "remove", or "reject"
    auc_before: float
    auc_after: float

    @property
    def delta(self) -> float:
        return self.auc_after - self.auc_before

    @property
    def accepted(self) -> bool:
        return self.action != "reject"

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "candidates": self.candidates,
            "feature": self.feature,
            "action": self.action,
            "auc_before": self.auc_before,
            "auc_after": self.auc_after,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class FeatureSubset:
    names: tuple[str, ...]
    method: str
    setting: float  # tolerance, or k for fixed-size selection

    def __len__(self):
        return len(self.names)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "method": self.method, "setting": self.setting}


SelectionTrace = list  # list[StepRecord]


def _priority(train: Dataset, ranked: Optional[RankedFeatures]) -> list[str]:
    # candidate order doubles as the tie-break: |rho| rank, then schema order
    return (ranked if ranked is not None else rank_features(train)).names


def _best(scores: Sequence[float]) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def _forward(kind, train, folds, params, seed, *, tolerance, k, method, ranked, threads):
    scorer = SubsetScorer(kind, train, folds, params, seed)
    remaining = _priority(train, ranked)
    chosen: list[str] = []
    trace: list[StepRecord] = []
    current = BASELINE_AUC
    limit = k if k is not None else len(remaining)
    while remaining and len(chosen) < limit:
        scores = parallel_map(lambda f: scorer.score(chosen + [f]), remaining, threads)
        i = _best(scores)
        f, after = remaining[i], scores[i]
        step = len(trace) + 1
        if tolerance is not None and not after - current > tolerance:
            trace.append(StepRecord(step, len(remaining), f, "reject", current, after))
            break
        trace.append(StepRecord(step, len(remaining), f, "add", current, after))
        chosen.append(f)
        remaining = remaining[:i] + remaining[i + 1:]
        current = after
    setting = float(k) if k is not None else float(tolerance)
    return FeatureSubset(tuple(chosen), method, setting), trace


def forward_select(kind, train: Dataset, tolerance: float, folds: FoldAssignment, params: Optional[Mapping],
                   seed: int, ranked: Optional[RankedFeatures] = None, threads: int = 1):
    """Greedy forward selection from an empty set (baseline AUC 0.5).

    A candidate is added while its CV AUC improvement strictly exceeds
    ``tolerance``; the first rejected candidate is recorded in the trace.
    """
    if not tolerance > 0:
        raise ValueError("forward tolerance must be positive")
    return _forward(kind, train, folds, params, seed, tolerance=tolerance, k=None, method="forward",
                    ranked=ranked, threads=threads)


def forward_select_k(kind, train: Dataset, k: int, folds: FoldAssignment, params: Optional[Mapping],
                     seed: int, ranked: Optional[RankedFeatures] = None, threads: int = 1):
    """Greedy forward selection without a stopping rule, up to exactly ``k`` features."""
    if not 1 <= k <= len(train.feature_names):
        raise ValueError(f"k must lie in [1, {len(train.feature_names)}], got {k}")
    return _forward(kind, train, folds, params, seed, tolerance=None, k=int(k), method="fixed",
                    ranked=ranked, threads=threads)


def backward_eliminate(kind, train: Dataset, tolerance: float, folds: FoldAssignment, params: Optional[Mapping],
                       seed: int, ranked: Optional[RankedFeatures] = None, threads: int = 1):
    """Greedy backward elimination from the full set.

    Each step removes the feature whose removal changes CV AUC the least
    (largest delta) as long as that delta is at least ``tolerance``. At least
    one feature always remains. Ties prefer the lowest-ranked feature.
    """
    if not tolerance < 0:
        raise ValueError("backward tolerance must be negative")
    scorer = SubsetScorer(kind, train, folds, params, seed)
    order = _priority(train, ranked)
    kept = list(order)
    trace: list[StepRecord] = []
    current = scorer.score(kept)
    while len(kept) > 1:
        candidates = kept[::-1]
        scores = parallel_map(lambda f: scorer.score([g for g in kept if g != f]), candidates, threads)
        i = _best(scores)
        f, after = candidates[i], scores[i]
        step = len(trace) + 1
        if after - current < tolerance:
            trace.append(StepRecord(step, len(candidates), f, "reject", current, after))
            break
        trace.append(StepRecord(step, len(candidates), f, "remove", current, after))
        kept.remove(f)
        current = after
    return FeatureSubset(tuple(kept), "backward", float(tolerance)), trace


# ---------------------------------------------------------------------------
# tuning helpers shared by sweeps and the wrapper protocol

SpaceLike = Union[SearchSpace, Mapping[str, SearchSpace], None]


def _space_for(kind, spaces: SpaceLike, preset: str) -> SearchSpace:
    learner = get_learner(kind)
    if isinstance(spaces, SearchSpace):
        return spaces
    if spaces is not None and learner.name in spaces:
        return spaces[learner.name]
    if _is_registered(learner):
        return default_space(learner, preset)
    return SearchSpace({})  # custom learners without a space: defaults only


def _kind_index(kind) -> int:
    name = get_learner(kind).name
    names = [k.value for k in ALL_KINDS]
    return names.index(name) if name in names else len(names)


def model_seed(seed: int, kind) -> int:
    """Seed of the final refit of ``kind`` in sweeps and the wrapper protocol."""
    return derive_seed(seed, 14, _kind_index(kind))


def tune(kind, train: Dataset, folds: FoldAssignment, budget: int, seed: int, *, spaces: SpaceLike = None,
         preset: str = "default", base_params: Optional[Mapping[str, dict]] = None,
         threads: int = 1) -> SearchResult:
    """Randomized search for one kind; SBEL searches its meta C over fixed tuned bases."""
    learner = get_learner(kind)
    if learner.name == "SBEL":
        if base_params is None:
            base_params = {
                b.value: tune(b, train, folds, budget, seed, spaces=spaces, preset=preset, threads=threads).best_params
                for b in BASE_KINDS
            }
        space = stacking_space(base_params, CV_FOLDS)
    else:
        space = _space_for(learner, spaces, preset)
    search_seed = derive_seed(seed, 12, _kind_index(learner))
    return randomized_search(learner, space, budget, train.features, train.target, folds, search_seed, threads)


# ---------------------------------------------------------------------------
# filter sweeps

AVERAGED = ("accuracy", "precision", "recall", "f1", "far", "auc")


@dataclass
class SweepRow:
    feature_count: int
    features: list[str]
    per_model: dict[str, MetricsBundle]
    averages: dict[str, float] = field(default_factory=dict)
    params: dict[str, dict] = field(default_factory=dict)  # tuned hyperparameters per kind

    def __post_init__(self):
        if not self.averages:
            self.averages = average_bundles(self.per_model.values())

    def to_dict(self) -> dict:
        return {
            "feature_count": self.feature_count,
            "features": list(self.features),
            "per_model": {k: m.to_dict() for k, m in self.per_model.items()},
            "averages": dict(self.averages),
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRow":
        return cls(d["feature_count"], list(d["features"]),
                   {k: MetricsBundle.from_dict(m) for k, m in d["per_model"].items()}, dict(d["averages"]),
                   dict(d.get("params", {})))


def average_bundles(bundles) -> dict[str, float]:
    bundles = list(bundles)
    out = {}
    for m in AVERAGED:
        vals = [getattr(b, m) for b in bundles]
        out[m] = float(np.mean(vals)) if vals and all(v is not None for v in vals) else None
    return out


def _test_metrics(model, test_X, test_y) -> MetricsBundle:
    scores = predict_scores(model, test_X)
    labels = predict_labels(model, test_X)
    return evaluate(test_y, scores, labels)


def filter_sweep(split: SplitPair, ranked: RankedFeatures, kinds=ALL_KINDS, budget: int = 15, seed: int = 0,
                 sizes: Optional[Sequence[int]] = None, spaces: SpaceLike = None, preset: str = "default",
                 threads: int = 1) -> list[SweepRow]:
    """Tune, refit and test every kind on each prefix of ``ranked``.

    Folds and per-kind seeds are shared by all rows, and columns always enter
    the models in schema order, so rows with equal feature sets agree exactly
    whatever the ranking order.
    """
    train, test, _ = standardize(split.train, split.test)
    if sorted(ranked.names) != sorted(train.feature_names):
        raise ValueError("ranking must cover every predictor exactly once")
    sizes = list(sizes) if sizes is not None else list(range(1, len(ranked) + 1))
    folds = stratified_kfold(train.target, CV_FOLDS, derive_seed(seed, 11))
    kinds = [get_learner(k) for k in kinds]
    rows = []
    for size in sizes:
        names = ranked.prefix(size)
        tr, te = train.select(names), test.select(names)
        best: dict[str, dict] = {}
        per_model: dict[str, MetricsBundle] = {}
        # bases first so SBEL can reuse their tuned parameters
        for learner in sorted(kinds, key=lambda l: l.name == "SBEL"):
            base = {b.value: best[b.value] for b in BASE_KINDS} if learner.name == "SBEL" and all(
                b.value in best for b in BASE_KINDS) else None
            result = tune(learner, tr, folds, budget, seed, spaces=spaces, preset=preset, base_params=base,
                          threads=threads)
            best[learner.name] = result.best_params
            model = fit(learner, result.best_params, tr.features, tr.target,
                        seed=model_seed(seed, learner), feature_names=tr.feature_names)
            per_model[learner.name] = _test_metrics(model, te.features, te.target)
        per_model = {l.name: per_model[l.name] for l in kinds}
        rows.append(SweepRow(size, list(tr.feature_names), per_model, params={l.name: best[l.name] for l in kinds}))
    return rows


# ---------------------------------------------------------------------------
# wrapper protocol

@dataclass(frozen=True)
class MethodSpec:
    name: str  # "forward", "backward" or "fixed"
    value: float  # tolerance, or k

    def __post_init__(self):
        if self.name == "forward" and not self.value > 0:
            raise ValueError("forward tolerance must be positive")
        if self.name == "backward" and not self.value < 0:
            raise ValueError("backward tolerance must be negative")
        if self.name == "fixed" and (self.value != int(self.value) or self.value < 1):
            raise ValueError("fixed k must be a positive integer")
        if self.name not in ("forward", "backward", "fixed"):
            raise ValueError(f"unknown method {self.name!r}")

    @property
    def setting(self):
        return int(self.value) if self.name == "fixed" else float(self.value)


@dataclass
class ProtocolReport:
    kind: str
    method: str
    tolerance_or_k: float
    params_pre: dict
    subset: list[str]
    trace: list[StepRecord]
    params_post: dict
    test_metrics: MetricsBundle
    degenerate: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "kind": self.kind,
            "method": self.method,
            "tolerance_or_k": self.tolerance_or_k,
            "seed": self.seed,
            "params_pre": self.params_pre,
            "subset": list(self.subset),
            "trace": [s.to_dict() for s in self.trace],
            "params_post": self.params_post,
            "test_metrics": self.test_metrics.to_dict(),
            "degenerate": self.degenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolReport":
        if d.get("format_version") != REPORT_FORMAT_VERSION:
            raise ValueError(f"unsupported report format_version {d.get('format_version')!r}")
        trace = [StepRecord(s["step"], s["candidates"], s["feature"], s["action"], s["auc_before"], s["auc_after"])
                 for s in d.get("trace", [])]
        return cls(d["kind"], d["method"], d["tolerance_or_k"], d.get("params_pre", {}), list(d["subset"]), trace,
                   d.get("params_post", {}), MetricsBundle.from_dict(d["test_metrics"]),
                   bool(d.get("degenerate", False)), int(d.get("seed", 0)))


def _select(method: MethodSpec, kind, train, folds, params, seed, ranked, threads):
    if method.name == "forward":
        return forward_select(kind, train, method.value, folds, params, seed, ranked, threads)
    if method.name == "backward":
        return backward_eliminate(kind, train, method.value, folds, params, seed, ranked, threads)
    return forward_select_k(kind, train, int(method.value), folds, params, seed, ranked, threads)


def _majority_metrics(train_y, test_y) -> MetricsBundle:
    majority = int(2 * train_y.sum() >= train_y.size)
    labels = np.full(test_y.size, majority)
    return evaluate(test_y, labels.astype(np.float64), labels)


def run_wrapper_protocol(kind, split: SplitPair, method: MethodSpec, budget: int = 30, seed: int = 0, *,
                         spaces: SpaceLike = None, preset: str = "default",
                         base_params: Optional[Mapping[str, dict]] = None, threads: int = 1) -> ProtocolReport:
    """Tune on all features, select a subset, retune on it, then test once.

    Only the training split is used until the final refit is scored on the
    test split. ``base_params`` lets SBEL reuse base-learner parameters
    already tuned on the full feature set.
    """
    learner = get_learner(kind)
    train, test, _ = standardize(split.train, split.test)
    folds = stratified_kfold(train.target, CV_FOLDS, derive_seed(seed, 11))
    ranked = rank_features(train)
    pre = tune(learner, train, folds, budget, seed, spaces=spaces, preset=preset, base_params=base_params,
               threads=threads)
    sel_seed = derive_seed(seed, 13, _kind_index(learner))
    subset, trace = _select(method, learner, train, folds, pre.best_params, sel_seed, ranked, threads)
    if not subset.names:
        return ProtocolReport(learner.name, method.name, method.setting, pre.best_params, [], trace, {},
                              _majority_metrics(train.target, test.target), True, seed)
    tr, te = train.select(subset.names), test.select(subset.names)
    post = tune(learner, tr, folds, budget, seed, spaces=spaces, preset=preset, threads=threads)
    model = fit(learner, post.best_params, tr.features, tr.target,
                seed=model_seed(seed, learner), feature_names=tr.feature_names)
    return ProtocolReport(learner.name, method.name, method.setting, pre.best_params, list(subset.names), trace,
                          post.best_params, _test_metrics(model, te.features, te.target), False, seed)


def run_wrapper_all(split: SplitPair, method: MethodSpec, budget: int = 30, seed: int = 0, kinds=ALL_KINDS, *,
                    spaces: SpaceLike = None, preset: str = "default", threads: int = 1) -> list[ProtocolReport]:
    """Protocol for several kinds; SBEL reuses the bases' full-feature parameters."""
    kinds = [get_learner(k) for k in kinds]
    reports: dict[str, ProtocolReport] = {}
    for learner in sorted(kinds, key=lambda l: l.name == "SBEL"):
        base = None
        if learner.name == "SBEL" and all(b.value in reports for b in BASE_KINDS):
            base = {b.value: reports[b.value].params_pre for b in BASE_KINDS}
        reports[learner.name] = run_wrapper_protocol(learner, split, method, budget, seed, spaces=spaces,
                                                     preset=preset, base_params=base, threads=threads)
    return [reports[l.name] for l in kinds]
