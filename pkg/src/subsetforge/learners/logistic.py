"""L2-regularized logistic regression solved by damped Newton iterations."""
from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit

from .base import Learner, ParamSpec, register

logger = logging.getLogger(__name__)

PARAMS = {
    "C": ParamSpec(float, 1e-6, 1e6, 1.0),
    "max_iter": ParamSpec(int, 1, 10_000, 100),
    "tol": ParamSpec(float, 1e-12, 1.0, 1e-6),
}


def objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float):
    """Value and gradient of ``0.5*|w|^2 + C * sum(logloss)``; the intercept is unpenalized.

    Returns:
        (value, grad_w, grad_b)
    """
    z = X @ w + b
    # log(1 + exp(z)) - y*z, stable for large |z|
    loss = np.sum(np.logaddexp(0.0, z) - y * z)
    r = expit(z) - y
    value = 0.5 * float(w @ w) + C * float(loss)
    return value, w + C * (X.T @ r), C * float(r.sum())


def newton_fit(X: np.ndarray, y: np.ndarray, C: float, max_iter: int = 100, tol: float = 1e-6):
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    Xa = np.hstack([X, np.ones((n, 1))])
    reg = np.ones(d + 1)
    reg[-1] = 0.0
    f, gw, gb = objective(w, b, X, y, C)
    for _ in range(max_iter):
        g = np.append(gw, gb)
        if np.linalg.norm(g) <= tol:
            break
        p = expit(Xa @ np.append(w, b))
        s = p * (1.0 - p)
        H = C * (Xa.T * s) @ Xa + np.diag(reg)
        # tiny ridge on the intercept keeps H invertible when s underflows
        H[-1, -1] += 1e-12
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        slope = float(g @ step)
        while True:
            w_new = w - t * step[:-1]
            b_new = b - t * step[-1]
            f_new, gw_new, gb_new = objective(w_new, b_new, X, y, C)
            if f_new <= f - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        if f_new > f:
            # no descent possible at working precision
            break
        w, b, f, gw, gb = w_new, b_new, f_new, gw_new, gb_new
    grad_norm = float(np.linalg.norm(np.append(gw, gb)))
    if grad_norm > tol:
        logger.debug("logistic regression stopped with gradient norm %.3g > tol %.3g", grad_norm, tol)
    return w, b, grad_norm <= tol


def _fit(X, y, params, seed):
    w, b, converged = newton_fit(X, y, params["C"], params["max_iter"], params["tol"])
    return {"coef": w, "intercept": b, "converged": converged}


def _scores(state, X):
    return expit(X @ state["coef"] + state["intercept"])


LEARNER = register(Learner(
    name="LR",
    fit=_fit,
    scores=_scores,
    params=PARAMS,
    threshold=0.5,
))
