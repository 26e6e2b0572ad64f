"""Random forest of CART trees (Gini impurity, bootstrap rows, random feature subsets)."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True, nogil=True)
def _next_u64(state):
    # splitmix64
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _build_tree(x, y, samples, n_classes, max_features, max_depth, min_leaf, seed):
    n_features = x.shape[1]
    cap = 2 * samples.shape[0] + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))

    idx = samples.copy()
    scratch = np.empty_like(idx)
    perm = np.arange(n_features)
    counts = np.zeros(n_classes)
    left_counts = np.zeros(n_classes)
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed

    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = idx.shape[0]
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        counts[:] = 0.0
        for i in range(start, end):
            counts[y[idx[i]]] += 1.0
        for c in range(n_classes):
            value[node, c] = counts[c] / m
        n_present = 0
        sq_total = 0.0
        for c in range(n_classes):
            if counts[c] > 0:
                n_present += 1
            sq_total += counts[c] * counts[c]
        if n_present <= 1 or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        best_score = np.inf
        best_feature = -1
        best_threshold = 0.0
        visited = 0
        vals = np.empty(m)
        for k in range(n_features):
            j = k + np.int64(_next_u64(state) % np.uint64(n_features - k))
            tmp = perm[k]
            perm[k] = perm[j]
            perm[j] = tmp
            f = perm[k]
            for i in range(m):
                vals[i] = x[idx[start + i], f]
            lo = vals.min()
            hi = vals.max()
            if lo == hi:
                continue
            visited += 1
            order = np.argsort(vals, kind="mergesort")
            left_counts[:] = 0.0
            sq_left = 0.0
            sq_right = sq_total
            for i in range(m - 1):
                c = y[idx[start + order[i]]]
                sq_left += 2.0 * left_counts[c] + 1.0
                sq_right -= 2.0 * (counts[c] - left_counts[c]) - 1.0
                left_counts[c] += 1.0
                n_left = i + 1
                n_right = m - n_left
                v_here = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_here == v_next or n_left < min_leaf or n_right < min_leaf:
                    continue
                # n * weighted Gini of the two children
                score = (n_left - sq_left / n_left) + (n_right - sq_right / n_right)
                if score < best_score:
                    best_score = score
                    best_feature = f
                    mid = 0.5 * (v_here + v_next)
                    best_threshold = mid if mid < v_next else v_here
            if visited >= max_features:
                break
        if best_feature < 0:
            continue

        n_left = 0
        n_right = 0
        for i in range(start, end):
            s = idx[i]
            if x[s, best_feature] <= best_threshold:
                idx[start + n_left] = s
                n_left += 1
            else:
                scratch[n_right] = s
                n_right += 1
        for i in range(n_right):
            idx[start + n_left + i] = scratch[i]

        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = n_nodes + 1
        stack[top + 1, 1] = start + n_left
        stack[top + 1, 2] = end
        stack[top + 1, 3] = depth + 1
        top += 2
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _accumulate_proba(x, feature, threshold, left, right, value, out):
    for i in range(x.shape[0]):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        for c in range(out.shape[1]):
            out[i, c] += value[node, c]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: str | int | float = "sqrt"
    seed: int = 0
    min_class_flows: int = 50

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_class_flows < 1:
            raise ValueError("min_class_flows must be >= 1")

    def resolve_features(self, d: int) -> int:
        rule = self.features_per_split
        if rule == "sqrt":
            k = int(math.sqrt(d))
        elif rule in ("all", None):
            k = d
        elif isinstance(rule, float):
            k = int(rule * d)
        else:
            k = int(rule)
        return min(d, max(1, k))


class ForestModel:
    """A fitted forest. ``predict`` returns labels from ``classes``."""

    def __init__(self, classes: np.ndarray, trees: list, n_features: int):
        self.classes = classes
        self.trees = trees
        self.n_features = n_features

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(f"forest expects {self.n_features} columns, got {x.shape}")
        out = np.zeros((x.shape[0], self.classes.size))
        if not self.trees:
            out[:, 0] = 1.0
            return out
        for tree in self.trees:
            _accumulate_proba(x, *tree, out)
        return out / len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(x), axis=1)]


def train_forest(x: np.ndarray, labels, cfg: ForestConfig = ForestConfig(), jobs: int = 1) -> ForestModel:
    """Fit ``cfg.n_trees`` CART trees, each on its own bootstrap sample.

    Per-tree seeds are spawned from ``cfg.seed`` so the result does not
    depend on ``jobs``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = np.asarray(labels).astype(str)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise ValueError("x and labels disagree on row count")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training rows")
    classes, y = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        warnings.warn("single-class training data; returning a constant classifier",
                      stacklevel=2)
        return ForestModel(classes, [], x.shape[1])

    max_features = cfg.resolve_features(x.shape[1])
    max_depth = -1 if cfg.max_depth is None else int(cfg.max_depth)
    children = np.random.SeedSequence(int(cfg.seed)).spawn(cfg.n_trees)
    y = y.astype(np.int64)

    def grow(seq):
        boot_state, split_state = seq.generate_state(2, dtype=np.uint64)
        samples = np.random.default_rng(int(boot_state)).integers(0, n, n)
        return _build_tree(x, y, samples, classes.size, max_features, max_depth,
                           cfg.min_samples_leaf, np.uint64(split_state))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            trees = list(pool.map(grow, children))
    else:
        trees = [grow(seq) for seq in children]
    return ForestModel(classes, trees, x.shape[1])
