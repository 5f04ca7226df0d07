"""Single-hidden-layer ReLU network with a logistic output unit.

Trained with mini-batch Adam at a constant learning rate on mean binary
cross-entropy plus an L2 penalty on the weight matrices.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import Learner, ParamSpec, register

PARAMS = {
    "hidden_units": ParamSpec(int, 1, 1024, 32),
    "learning_rate": ParamSpec(float, 1e-6, 1.0, 0.01),
    "epochs": ParamSpec(int, 1, 5000, 100),
    "l2": ParamSpec(float, 0.0, 1.0, 1e-4),
}

BATCH = 64
_BETA1, _BETA2, _EPS = 0.9, 0.999, 1e-8


def init_weights(n_in: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.normal(0.0, np.sqrt(1.0 / hidden), hidden),
        "b2": np.zeros(1),
    }


def forward(weights: dict, X: np.ndarray) -> np.ndarray:
    h = np.maximum(X @ weights["W1"] + weights["b1"], 0.0)
    return h @ weights["W2"] + weights["b2"][0]


def loss_and_grad(weights: dict, X: np.ndarray, y: np.ndarray, l2: float):
    """Penalized mean cross-entropy and its gradient by backpropagation."""
    m = X.shape[0]
    z1 = X @ weights["W1"] + weights["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ weights["W2"] + weights["b2"][0]
    data_loss = np.mean(np.logaddexp(0.0, z2) - y * z2)
    penalty = 0.5 * l2 * (np.sum(weights["W1"] ** 2) + np.sum(weights["W2"] ** 2))

    dz2 = (expit(z2) - y) / m
    dz1 = np.outer(dz2, weights["W2"]) * (z1 > 0)
    grads = {
        "W1": X.T @ dz1 + l2 * weights["W1"],
        "b1": dz1.sum(axis=0),
        "W2": a1.T @ dz2 + l2 * weights["W2"],
        "b2": np.array([dz2.sum()]),
    }
    return float(data_loss + penalty), grads


def _fit(X, y, params, seed):
    rng = np.random.default_rng(seed)
    n, d = X.shape
    wts = init_weights(d, params["hidden_units"], rng)
    mom = {k: np.zeros_like(v) for k, v in wts.items()}
    vel = {k: np.zeros_like(v) for k, v in wts.items()}
    lr, l2 = params["learning_rate"], params["l2"]
    t = 0
    for _ in range(params["epochs"]):
        order = rng.permutation(n)
        for lo in range(0, n, BATCH):
            idx = order[lo:lo + BATCH]
            _, grads = loss_and_grad(wts, X[idx], y[idx], l2)
            t += 1
            c1 = 1.0 - _BETA1 ** t
            c2 = 1.0 - _BETA2 ** t
            for k, g in grads.items():
                mom[k] *= _BETA1
                mom[k] += (1.0 - _BETA1) * g
                vel[k] *= _BETA2
                vel[k] += (1.0 - _BETA2) * g * g
                wts[k] -= lr * (mom[k] / c1) / (np.sqrt(vel[k] / c2) + _EPS)
    return wts


def _scores(state, X):
    return expit(forward(state, X))


LEARNER = register(Learner(
    name="ANN",
    fit=_fit,
    scores=_scores,
    params=PARAMS,
    threshold=0.5,
))
