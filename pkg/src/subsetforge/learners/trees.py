"""Histogram CART growing shared by the random forest and boosted trees.

Columns are pre-binned once per fit (exact for binary/ordinal columns and for
continuous columns with at most ``max_bins`` distinct values). Two split
criteria are supported: Gini impurity on weighted class counts, and the
second-order gain of logistic boosting with L2 leaf regularization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GINI = 0
NEWTON = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@njit(cache=True, nogil=True)
def _splitmix(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def _score(a, b, criterion, reg_lambda):
    if criterion == GINI:
        if b <= 0.0:
            return 0.0
        return (a * a + (b - a) * (b - a)) / b
    return a * a / (b + reg_lambda)


@njit(cache=True, nogil=True)
def _leaf(a, b, criterion, reg_lambda):
    if criterion == GINI:
        return a / b if b > 0.0 else 0.0
    return -a / (b + reg_lambda)


@njit(cache=True, nogil=True)
def _grow(Xb, n_bins, a, b, c, rows, features, mtry, max_depth, min_leaf,
          criterion, reg_lambda, min_child_weight, seed,
          out_feature, out_bin, out_left, out_right, out_value):
    cap = out_feature.size
    n_cand = features.size
    max_b = 1
    for f in range(n_bins.size):
        if n_bins[f] > max_b:
            max_b = n_bins[f]
    ha = np.zeros(max_b)
    hb = np.zeros(max_b)
    hc = np.zeros(max_b)
    feat = features.copy()
    idx = rows.copy()
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed)

    st_node = np.empty(max_depth + 2, np.int64)
    st_start = np.empty(max_depth + 2, np.int64)
    st_end = np.empty(max_depth + 2, np.int64)
    st_depth = np.empty(max_depth + 2, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = idx.size
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    m = mtry if 0 < mtry < n_cand else n_cand

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_start[sp]
        e = st_end[sp]
        depth = st_depth[sp]

        A = 0.0
        B = 0.0
        C = 0.0
        for p in range(s, e):
            r = idx[p]
            A += a[r]
            B += b[r]
            C += c[r]
        out_value[node] = _leaf(A, B, criterion, reg_lambda)
        out_feature[node] = -1
        if depth >= max_depth or C < 2.0 * min_leaf or n_nodes + 2 > cap:
            continue
        if criterion == GINI and (A <= 0.0 or A >= B):
            continue

        parent = _score(A, B, criterion, reg_lambda)
        if m < n_cand:
            for i in range(m):
                j = i + np.int64(_splitmix(state) % np.uint64(n_cand - i))
                tmp = feat[i]
                feat[i] = feat[j]
                feat[j] = tmp

        best_gain = 1e-12 * (C if criterion == GINI else 1.0)
        best_f = -1
        best_t = -1
        for fi in range(m):
            f = feat[fi]
            nb = n_bins[f]
            if nb < 2:
                continue
            for k in range(nb):
                ha[k] = 0.0
                hb[k] = 0.0
                hc[k] = 0.0
            for p in range(s, e):
                r = idx[p]
                k = Xb[r, f]
                ha[k] += a[r]
                hb[k] += b[r]
                hc[k] += c[r]
            la = 0.0
            lb = 0.0
            lc = 0.0
            for t in range(nb - 1):
                la += ha[t]
                lb += hb[t]
                lc += hc[t]
                if lc < min_leaf:
                    continue
                if C - lc < min_leaf:
                    break
                ra = A - la
                rb = B - lb
                if criterion == NEWTON and (lb < min_child_weight or rb < min_child_weight):
                    continue
                gain = (_score(la, lb, criterion, reg_lambda)
                        + _score(ra, rb, criterion, reg_lambda) - parent)
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_t = t
        if best_f < 0:
            continue

        # in-place partition: bin <= best_t goes left
        lo = s
        hi = e - 1
        while lo <= hi:
            if Xb[idx[lo], best_f] <= best_t:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        left = n_nodes
        right = n_nodes + 1
        n_nodes += 2
        out_feature[node] = best_f
        out_bin[node] = best_t
        out_left[node] = left
        out_right[node] = right

        st_node[sp] = right
        st_start[sp] = lo
        st_end[sp] = e
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = left
        st_start[sp] = s
        st_end[sp] = lo
        st_depth[sp] = depth + 1
        sp += 1
    return n_nodes


@njit(cache=True, nogil=True)
def _predict_sum(X, roots, feature, threshold, left, right, value, vote):
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(roots.size):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            if vote:
                if value[node] > 0.5:
                    acc += 1.0
            else:
                acc += value[node]
        out[i] = acc
    return out


@dataclass(frozen=True)
class Binning:
    cuts: tuple[np.ndarray, ...]
    n_bins: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.uint8)
        for j, cuts in enumerate(self.cuts):
            out[:, j] = np.searchsorted(cuts, X[:, j], side="left")
        return out


def make_bins(X: np.ndarray, max_bins: int = 255) -> Binning:
    """Cut points between consecutive distinct values, or quantile cuts past ``max_bins``."""
    cuts = []
    for j in range(X.shape[1]):
        u = np.unique(X[:, j])
        if u.size <= max_bins:
            cj = (u[:-1] + u[1:]) / 2.0
        else:
            q = np.quantile(X[:, j], np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            cj = np.unique(q)
        cuts.append(cj)
    n_bins = np.array([c.size + 1 for c in cuts], dtype=np.int64)
    return Binning(tuple(cuts), n_bins)


@dataclass(frozen=True)
class TreeArrays:
    """Flat node arrays for one or more trees; ``roots`` index each tree's root."""

    roots: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_trees(self) -> int:
        return self.roots.size

    def predict_sum(self, X: np.ndarray, vote: bool = False) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_sum(X, self.roots, self.feature, self.threshold,
                            self.left, self.right, self.value, vote)

    def tree(self, t: int) -> "TreeArrays":
        """Standalone copy of tree ``t``."""
        start = self.roots[t]
        end = self.roots[t + 1] if t + 1 < self.roots.size else self.feature.size
        sl = slice(start, end)
        shift = lambda a: np.where(a >= 0, a - start, -1)  # noqa: E731
        return TreeArrays(np.array([0]), self.feature[sl].copy(), self.threshold[sl].copy(),
                          shift(self.left[sl]), shift(self.right[sl]), self.value[sl].copy())

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("roots", "feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(
            roots=np.asarray(d["roots"], dtype=np.int64),
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )

    @classmethod
    def concat(cls, trees: list["TreeArrays"]) -> "TreeArrays":
        roots, parts = [], {k: [] for k in ("feature", "threshold", "left", "right", "value")}
        offset = 0
        for t in trees:
            roots.append(offset + t.roots[0])
            parts["feature"].append(t.feature)
            parts["threshold"].append(t.threshold)
            parts["left"].append(np.where(t.left >= 0, t.left + offset, -1))
            parts["right"].append(np.where(t.right >= 0, t.right + offset, -1))
            parts["value"].append(t.value)
            offset += t.feature.size
        return cls(np.array(roots, dtype=np.int64),
                   **{k: np.concatenate(v) if v else np.empty(0) for k, v in parts.items()})


def grow_tree(Xb, binning: Binning, a, b, c, rows, features, *, mtry=0, max_depth=8,
              min_leaf=1.0, criterion=GINI, reg_lambda=0.0, min_child_weight=0.0,
              seed=0, value_scale=1.0) -> TreeArrays:
    """Grow one tree on ``rows`` using per-row statistics ``a``, ``b``, ``c``.

    For Gini, ``a`` is the weighted positive count, ``b`` the weight and ``c``
    the weighted row count. For boosting, ``a``/``b`` are gradient/hessian.
    """
    n_rows = rows.size
    cap = int(min(2 * max(n_rows, 1) + 1, 2 ** min(max_depth + 1, 30) - 1))
    feature = np.empty(cap, np.int64)
    bins = np.full(cap, -1, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    n = _grow(Xb, binning.n_bins, a, b, c, rows.astype(np.int64), features.astype(np.int64),
              int(mtry), int(max_depth), float(min_leaf), int(criterion), float(reg_lambda),
              float(min_child_weight), int(seed) & 0x7FFFFFFFFFFFFFFF,
              feature, bins, left, right, value)
    feature, bins, left, right, value = feature[:n], bins[:n], left[:n], right[:n], value[:n]
    threshold = np.array([binning.cuts[f][t] if f >= 0 else 0.0 for f, t in zip(feature, bins)])
    return TreeArrays(np.array([0]), feature, threshold, left, right, value * value_scale)
