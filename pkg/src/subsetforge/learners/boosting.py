"""Gradient-boosted trees for logistic loss with Newton leaf weights.

Each round fits a tree to the gradient/hessian of the log-loss at the current
margin. Split gain and leaf values follow the second-order formulation with an
L2 penalty ``reg_lambda`` on leaf weights; ``learning_rate`` shrinks each tree.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from ..folds import derive_seed
from .base import Learner, ParamSpec, register
from .trees import NEWTON, TreeArrays, grow_tree, make_bins

PARAMS = {
    "rounds": ParamSpec(int, 1, 5000, 100),
    "learning_rate": ParamSpec(float, 1e-4, 1.0, 0.1),
    "max_depth": ParamSpec(int, 1, 32, 3),
    "subsample": ParamSpec(float, 0.05, 1.0, 1.0),
    "colsample": ParamSpec(float, 0.05, 1.0, 1.0),
    "reg_lambda": ParamSpec(float, 0.0, 1e4, 1.0),
}

MIN_CHILD_WEIGHT = 1.0


def log_loss(y, margin) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def _fit(X, y, params, seed):
    n, d = X.shape
    binning = make_bins(X)
    Xb = binning.transform(X)
    rng = np.random.default_rng(seed)
    p0 = min(max(y.mean(), 1e-6), 1 - 1e-6)
    base = math.log(p0 / (1 - p0))
    margin = np.full(n, base)
    ones = np.ones(n)
    n_rows = max(1, math.ceil(params["subsample"] * n))
    n_cols = max(1, math.ceil(params["colsample"] * d))
    losses = [log_loss(y, margin)]
    trees = []
    for r in range(params["rounds"]):
        p = expit(margin)
        g = p - y
        h = p * (1.0 - p)
        rows = np.arange(n) if n_rows >= n else np.sort(rng.choice(n, n_rows, replace=False))
        cols = np.arange(d) if n_cols >= d else np.sort(rng.choice(d, n_cols, replace=False))
        tree = grow_tree(Xb, binning, g, h, ones, rows, cols, max_depth=params["max_depth"],
                         min_leaf=1.0, criterion=NEWTON, reg_lambda=params["reg_lambda"],
                         min_child_weight=MIN_CHILD_WEIGHT, seed=derive_seed(seed, r),
                         value_scale=params["learning_rate"])
        margin = margin + tree.predict_sum(X)
        losses.append(log_loss(y, margin))
        trees.append(tree)
    return {"base": base, "trees": TreeArrays.concat(trees), "train_loss": np.array(losses)}


def _margin(state, X):
    return state["base"] + state["trees"].predict_sum(X)


def _scores(state, X):
    return expit(_margin(state, X))


LEARNER = register(Learner(
    name="GBT",
    fit=_fit,
    scores=_scores,
    params=PARAMS,
    threshold=0.5,
))
