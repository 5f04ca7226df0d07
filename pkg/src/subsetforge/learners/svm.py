"""Linear SVM trained by mini-batch subgradient descent on the hinge loss.

Minimizes ``lam/2 * |w|^2 + mean(hinge)`` with ``lam = 1 / (C * n)``, which
has the same minimizer as ``0.5*|w|^2 + C * sum(hinge)``. The bias is an
augmented constant column. The returned weights are the average of the
iterates over the second half of training.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .base import Learner, ParamSpec, register

PARAMS = {
    "C": ParamSpec(float, 1e-6, 1e6, 1.0),
    "epochs": ParamSpec(int, 1, 5000, 100),
}

BATCH = 16


@njit(cache=True, nogil=True)
def _pegasos(X, y, lam, perms, batch):
    n, d = X.shape
    w = np.zeros(d + 1)
    avg = np.zeros(d + 1)
    n_epochs = perms.shape[0]
    steps_per_epoch = (n + batch - 1) // batch
    total = n_epochs * steps_per_epoch
    start_avg = total // 2
    n_avg = 0
    radius = 1.0 / np.sqrt(lam)
    grad = np.zeros(d + 1)
    t = 0
    for ep in range(n_epochs):
        for s in range(steps_per_epoch):
            t += 1
            eta = 1.0 / (lam * t)
            lo = s * batch
            hi = min(lo + batch, n)
            for j in range(d + 1):
                grad[j] = 0.0
            for p in range(lo, hi):
                i = perms[ep, p]
                m = w[d]
                for j in range(d):
                    m += w[j] * X[i, j]
                if y[i] * m < 1.0:
                    for j in range(d):
                        grad[j] += y[i] * X[i, j]
                    grad[d] += y[i]
            scale = 1.0 - eta * lam
            k = eta / (hi - lo)
            norm2 = 0.0
            for j in range(d + 1):
                w[j] = scale * w[j] + k * grad[j]
                norm2 += w[j] * w[j]
            norm = np.sqrt(norm2)
            if norm > radius:
                for j in range(d + 1):
                    w[j] *= radius / norm
            if t > start_avg:
                n_avg += 1
                for j in range(d + 1):
                    avg[j] += (w[j] - avg[j]) / n_avg
    return avg


def _fit(X, y, params, seed):
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(n) for _ in range(params["epochs"])]).astype(np.int64)
    lam = 1.0 / (params["C"] * n)
    w = _pegasos(X, np.where(y > 0, 1.0, -1.0), lam, perms, BATCH)
    return {"coef": w[:-1], "intercept": float(w[-1])}


def _scores(state, X):
    return X @ state["coef"] + state["intercept"]


LEARNER = register(Learner(
    name="SVM",
    fit=_fit,
    scores=_scores,
    params=PARAMS,
    threshold=0.0,
    probabilistic=False,
))
