"""CART regression trees, random forests and gradient boosting."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import InvalidHyperparameter
from .linear import check_predict_input, check_xy

LEAF = -1


def _nullable(a: np.ndarray) -> list:
    # strict JSON has no NaN
    return [None if np.isnan(v) else float(v) for v in a]


@dataclass(frozen=True)
class Tree:
    """Regression tree stored as parallel node arrays (node 0 is the root).

    ``feature[i] == -1`` marks a leaf predicting ``value[i]``; otherwise rows
    with ``x[feature] <= threshold`` go to ``left[i]`` and the rest to ``right[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    n_features: int

    kind = "tree"

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row."""
        X = check_predict_input(X, self.n_features)
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active[r] = self.feature[node[r]] != LEAF
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": _nullable(self.threshold),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": _nullable(self.value),
            "n_samples": self.n_samples.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = lambda k: np.asarray(d[k], dtype=np.int64)  # noqa: E731
        floats = lambda k: np.asarray(d[k], dtype=np.float64)  # noqa: E731
        return cls(ints("feature"), floats("threshold"), ints("left"), ints("right"),
                   floats("value"), ints("n_samples"), int(d["n_features"]))

    @classmethod
    def leaf(cls, value: float, n: int, n_features: int) -> "Tree":
        return cls(np.array([LEAF]), np.array([np.nan]), np.array([LEAF]), np.array([LEAF]),
                   np.array([float(value)]), np.array([n]), n_features)

    @classmethod
    def stump(cls, feature: int, threshold: float, left_value: float, right_value: float,
              n_features: int) -> "Tree":
        return cls(np.array([feature, LEAF, LEAF]), np.array([threshold, np.nan, np.nan]),
                   np.array([1, LEAF, LEAF]), np.array([2, LEAF, LEAF]),
                   np.array([np.nan, left_value, right_value]), np.array([0, 0, 0]), n_features)


def best_split(x, y, min_samples_leaf: int = 1, min_improvement: float = 0.0):
    """Best threshold on one feature column.

    Returns ``(threshold, sse_reduction)`` or None when the targets are
    constant or no midpoint between distinct values reduces the SSE by at
    least ``min_improvement``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0 or np.all(y == y[0]):
        return None
    order = np.argsort(x, kind="stable")
    thr, gain = _kernels.best_split_sorted(x[order], y[order], min_samples_leaf)
    if not np.isfinite(gain) or max(gain, 0.0) < min_improvement:
        return None
    return thr, max(gain, 0.0)


def _grow(X, y, max_depth, min_samples_leaf, min_improvement, max_features, rng) -> Tree:
    n, d = X.shape
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[idx])))
        count.append(len(idx))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if len(idx) < 2 * min_samples_leaf:
            continue
        yi = y[idx]
        if np.all(yi == yi[0]):
            continue
        if max_features is None or max_features >= d:
            candidates = range(d)
        else:
            candidates = np.sort(rng.choice(d, size=max_features, replace=False))
        best_f, best_thr, best_gain = -1, np.nan, -np.inf
        for f in candidates:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            thr, gain = _kernels.best_split_sorted(col[order], yi[order], min_samples_leaf)
            if gain > best_gain:
                best_f, best_thr, best_gain = int(f), thr, gain
        if best_f < 0 or max(best_gain, 0.0) < min_improvement:
            continue
        go_left = X[idx, best_f] <= best_thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64), np.array(count, dtype=np.int64), d,
    )


def _check_tree_params(max_depth, min_samples_leaf):
    if max_depth is not None and max_depth < 0:
        raise InvalidHyperparameter("max_depth must be >= 0 or None")
    if min_samples_leaf < 1:
        raise InvalidHyperparameter("min_samples_leaf must be >= 1")


def fit_tree(X, y, max_depth: int | None = 6, min_samples_leaf: int = 2,
             min_improvement: float = 1e-9) -> Tree:
    """Greedy CART on squared error; ties go to the lower feature, then lower threshold."""
    X, y = check_xy(X, y)
    _check_tree_params(max_depth, min_samples_leaf)
    return _grow(X, y, max_depth, min_samples_leaf, min_improvement, None, None)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    seeds: tuple[int, ...]
    feature_subsample: int
    bootstrap: bool
    n_features: int

    kind = "forest"

    def predict(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        acc = np.zeros(X.shape[0])
        for t in self.trees:
            acc += t.predict(X)
        return acc / len(self.trees)

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees], "seeds": list(self.seeds),
                "feature_subsample": self.feature_subsample, "bootstrap": self.bootstrap,
                "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(tuple(Tree.from_dict(t) for t in d["trees"]), tuple(d["seeds"]),
                   int(d["feature_subsample"]), bool(d["bootstrap"]), int(d["n_features"]))


def tree_seed(seed: int, index: int) -> int:
    """Independent per-tree seed derived from the forest seed and tree index."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, index]).generate_state(2, np.uint64)[0])


def fit_forest(X, y, n_trees: int = 100, max_depth: int | None = 6, feature_subsample: int | None = None,
               bootstrap: bool = True, seed: int = 0, min_samples_leaf: int = 2,
               min_improvement: float = 1e-9, n_jobs: int = 1) -> ForestModel:
    X, y = check_xy(X, y)
    n, d = X.shape
    if n_trees < 1:
        raise InvalidHyperparameter("n_trees must be >= 1")
    if feature_subsample is None:
        feature_subsample = max(1, d // 3)
    if not 1 <= feature_subsample <= d:
        raise InvalidHyperparameter(f"feature_subsample must lie in [1, {d}]")
    _check_tree_params(max_depth, min_samples_leaf)
    seeds = tuple(tree_seed(seed, t) for t in range(n_trees))

    def build(s):
        rng = np.random.default_rng(s)
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        return _grow(Xb, yb, max_depth, min_samples_leaf, min_improvement, feature_subsample, rng)

    if n_jobs == 1:
        trees = [build(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            trees = list(pool.map(build, seeds))
    return ForestModel(tuple(trees), seeds, feature_subsample, bootstrap, d)


@dataclass(frozen=True)
class GbmModel:
    initial: float
    trees: tuple[Tree, ...]
    learning_rates: tuple[float, ...]
    n_features: int
    seed: int = 0
    train_mse: tuple[float, ...] = field(default=(), compare=False)

    kind = "gbm"

    @property
    def rounds(self) -> int:
        return len(self.trees)

    def staged_predict(self, X):
        """Yield predictions after 0, 1, ..., rounds stages."""
        X = check_predict_input(X, self.n_features)
        F = np.full(X.shape[0], self.initial)
        yield F.copy()
        for tree, lr in zip(self.trees, self.learning_rates):
            F += lr * tree.predict(X)
            yield F.copy()

    def predict(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        F = np.full(X.shape[0], self.initial)
        for tree, lr in zip(self.trees, self.learning_rates):
            F += lr * tree.predict(X)
        return F

    def to_dict(self) -> dict:
        return {"initial": self.initial, "trees": [t.to_dict() for t in self.trees],
                "learning_rates": list(self.learning_rates), "n_features": self.n_features,
                "seed": self.seed, "train_mse": list(self.train_mse)}

    @classmethod
    def from_dict(cls, d: dict) -> "GbmModel":
        return cls(float(d["initial"]), tuple(Tree.from_dict(t) for t in d["trees"]),
                   tuple(float(v) for v in d["learning_rates"]), int(d["n_features"]),
                   int(d["seed"]), tuple(float(v) for v in d.get("train_mse", ())))


def fit_gbm(X, y, rounds: int = 100, learning_rate: float = 0.1, max_depth: int = 3, seed: int = 0,
            min_samples_leaf: int = 2, min_improvement: float = 1e-9) -> GbmModel:
    """Stagewise boosting on squared loss: each tree fits the current residuals.

    Trees are grown deterministically on all rows and features, so ``seed`` is
    recorded but does not change the fit.
    """
    X, y = check_xy(X, y)
    if rounds < 1:
        raise InvalidHyperparameter("rounds must be >= 1")
    if not 0 <= learning_rate <= 1:
        raise InvalidHyperparameter("learning_rate must lie in [0, 1]")
    _check_tree_params(max_depth, min_samples_leaf)
    initial = float(np.mean(y))
    F = np.full(len(y), initial)
    trees, history = [], [float(np.mean((y - F) ** 2))]
    for _ in range(rounds):
        tree = _grow(X, y - F, max_depth, min_samples_leaf, min_improvement, None, None)
        F = F + learning_rate * tree.predict(X)
        trees.append(tree)
        history.append(float(np.mean((y - F) ** 2)))
    return GbmModel(initial, tuple(trees), (float(learning_rate),) * rounds, X.shape[1], int(seed),
                    tuple(history))
