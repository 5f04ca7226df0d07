"""Random forest of Gini CART trees with bootstrap rows and per-split feature sampling."""
from __future__ import annotations

import math

import numpy as np

from ..folds import derive_seed
from .base import Learner, ParamSpec, register
from .trees import GINI, TreeArrays, grow_tree, make_bins

PARAMS = {
    "n_trees": ParamSpec(int, 1, 2000, 100),
    "max_depth": ParamSpec(int, 1, 64, 8),
    "min_leaf": ParamSpec(int, 1, 1000, 1),
    "max_features": ParamSpec(float, 1e-6, 1.0, 0.5),
    "bootstrap": ParamSpec(bool, 0, 1, True),
}


def fit_tree(X, y, *, max_depth=8, min_leaf=1, max_features=1.0, seed=0, sample_weight=None,
             binning=None, Xb=None) -> TreeArrays:
    """One CART classification tree; leaf values are weighted positive fractions."""
    n, d = X.shape
    if binning is None:
        binning = make_bins(X)
        Xb = binning.transform(X)
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    rows = np.flatnonzero(w > 0)
    mtry = max(1, math.ceil(max_features * d))
    return grow_tree(Xb, binning, w * y, w, w, rows, np.arange(d), mtry=mtry,
                     max_depth=max_depth, min_leaf=min_leaf, criterion=GINI, seed=seed)


def tree_labels(tree: TreeArrays, X) -> np.ndarray:
    return (tree.predict_sum(X) > 0.5).astype(np.int64)


def _fit(X, y, params, seed):
    n = X.shape[0]
    binning = make_bins(X)
    Xb = binning.transform(X)
    trees = []
    for t in range(params["n_trees"]):
        tree_seed = derive_seed(seed, t)
        if params["bootstrap"]:
            rng = np.random.default_rng(tree_seed)
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = None
        trees.append(fit_tree(X, y, max_depth=params["max_depth"], min_leaf=params["min_leaf"],
                              max_features=params["max_features"], seed=tree_seed,
                              sample_weight=w, binning=binning, Xb=Xb))
    return {"trees": TreeArrays.concat(trees)}


def _scores(state, X):
    trees = state["trees"]
    return trees.predict_sum(X, vote=True) / trees.n_trees


LEARNER = register(Learner(
    name="RF",
    fit=_fit,
    scores=_scores,
    params=PARAMS,
    threshold=0.5,
))
