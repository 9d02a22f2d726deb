"""Random forests of best-first, leaf-capped CART trees.

Trees split on ``x[feature] <= threshold`` with thresholds at midpoints
between consecutive distinct values. The frontier leaf whose best split
yields the largest weighted impurity decrease is split first (Gini for
classification, squared error for regression) until the leaf cap is hit or
no split with positive decrease remains. Gains equal up to a relative 1e-12
are treated as ties and resolved toward the lowest feature index, then the
lowest threshold.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, FitError, IncompleteDataError
from .seeding import stream

TIE_TOL = 1e-12


@numba.njit(cache=True)
def _scan_classification(xs, ys, n_classes):  # pragma: no cover - compiled
    """Best split position over one sorted feature column.

    Returns ``(gain, position)`` where the split puts sorted samples
    ``[0, position]`` on the left; gain is ``-inf`` when the column is constant.
    """
    n = xs.shape[0]
    total = np.zeros(n_classes)
    for i in range(n):
        total[ys[i]] += 1.0
    sq_total = 0.0
    for k in range(n_classes):
        sq_total += total[k] * total[k]
    left = np.zeros(n_classes)
    sq_left = 0.0
    sq_right = sq_total
    parent = sq_total / n
    best = -np.inf
    best_pos = -1
    for i in range(n - 1):
        c = ys[i]
        sq_left += 2.0 * left[c] + 1.0
        sq_right += -2.0 * (total[c] - left[c]) + 1.0
        left[c] += 1.0
        if xs[i] < xs[i + 1]:
            nl = i + 1.0
            gain = sq_left / nl + sq_right / (n - nl) - parent
            if best_pos < 0 or gain > best + 1e-12 * max(1.0, abs(best)):
                best = gain
                best_pos = i
    return best, best_pos


@numba.njit(cache=True)
def _scan_regression(xs, ys):  # pragma: no cover - compiled
    n = xs.shape[0]
    s_total = 0.0
    for i in range(n):
        s_total += ys[i]
    s_left = 0.0
    parent = s_total * s_total / n
    best = -np.inf
    best_pos = -1
    for i in range(n - 1):
        s_left += ys[i]
        if xs[i] < xs[i + 1]:
            nl = i + 1.0
            s_right = s_total - s_left
            gain = s_left * s_left / nl + s_right * s_right / (n - nl) - parent
            if best_pos < 0 or gain > best + 1e-12 * max(1.0, abs(best)):
                best = gain
                best_pos = i
    return best, best_pos


@numba.njit(cache=True)
def _best_split(X, y_cls, y_reg, idx, features, classification, n_classes):  # pragma: no cover - compiled
    """Best ``(gain, feature, threshold)`` over `features` (ascending) for rows `idx`."""
    best = -np.inf
    best_f = -1
    best_t = 0.0
    n = idx.shape[0]
    xs = np.empty(n)
    for f in features:
        for i in range(n):
            xs[i] = X[idx[i], f]
        order = np.argsort(xs, kind="mergesort")
        xs_sorted = xs[order]
        if classification:
            ys = np.empty(n, dtype=np.int64)
            for i in range(n):
                ys[i] = y_cls[idx[order[i]]]
            gain, pos = _scan_classification(xs_sorted, ys, n_classes)
        else:
            yr = np.empty(n)
            for i in range(n):
                yr[i] = y_reg[idx[order[i]]]
            gain, pos = _scan_regression(xs_sorted, yr)
        if pos >= 0 and (best_f < 0 or gain > best + 1e-12 * max(1.0, abs(best))):
            best = gain
            best_f = f
            a = xs_sorted[pos]
            b = xs_sorted[pos + 1]
            t = a / 2.0 + b / 2.0
            if t >= b or t < a:
                t = a
            best_t = t
    return best, best_f, best_t


@dataclass
class Tree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes) class frequencies, or (n_nodes,) means

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of `X`."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X) -> np.ndarray:
        """Class index (argmax of leaf frequencies) or regression mean."""
        leaves = self.value[self.apply(X)]
        return leaves.argmax(axis=1) if leaves.ndim == 2 else leaves


def resolve_max_features(value, d: int, task: str) -> int:
    """``"auto"``: floor(sqrt(d)) for classification, ceil(d/3) for regression."""
    if value is None or value == "all":
        return d
    if value == "auto":
        value = "sqrt" if task == "classification" else "third"
    if value == "sqrt":
        return max(1, int(math.isqrt(d)))
    if value == "third":
        return max(1, math.ceil(d / 3))
    if isinstance(value, int) and 1 <= value <= d:
        return value
    raise ConfigError(f"invalid max_features {value!r} for d={d}")


def fit_tree(X, y, task: str = "classification", max_leaf_nodes: int | None = 1000,
             max_features="auto", rng: np.random.Generator | None = None,
             n_classes: int | None = None) -> Tree:
    """Grow one best-first CART tree on all rows of `X` (no bootstrap here)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError(f"cannot fit a tree on input of shape {X.shape}")
    if task not in ("classification", "regression"):
        raise ConfigError(f"unknown task {task!r}")
    if max_leaf_nodes is not None and max_leaf_nodes < 1:
        raise ConfigError("max_leaf_nodes must be at least 1")
    n, d = X.shape
    rng = np.random.default_rng(0) if rng is None else rng
    classification = task == "classification"
    if classification:
        y_cls = np.asarray(y, dtype=np.int64)
        n_classes = int(y_cls.max()) + 1 if n_classes is None else n_classes
        y_reg = np.zeros(1)
    else:
        y_reg = np.asarray(y, dtype=np.float64)
        y_cls = np.zeros(1, dtype=np.int64)
        n_classes = 1
    k = resolve_max_features(max_features, d, task)
    cap = math.inf if max_leaf_nodes is None else max_leaf_nodes

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if classification:
            value.append(np.bincount(y_cls[idx], minlength=n_classes) / len(idx))
        else:
            value.append(y_reg[idx].mean())
        return len(feature) - 1

    def find_split(idx):
        if len(idx) < 2:
            return None
        if classification:
            if np.all(y_cls[idx] == y_cls[idx[0]]):
                return None
        elif np.all(y_reg[idx] == y_reg[idx[0]]):
            return None
        perm = rng.permutation(d)
        gain, f, t = _best_split(X, y_cls, y_reg, idx, np.sort(perm[:k]), classification, n_classes)
        pos = k
        # keep drawing features while every candidate so far is constant on this node
        while f < 0 and pos < d:
            gain, f, t = _best_split(X, y_cls, y_reg, idx, perm[pos:pos + 1], classification, n_classes)
            pos += 1
        if f < 0 or not gain > TIE_TOL * max(1.0, len(idx)):
            return None
        return gain, f, t

    root = np.arange(n)
    new_node(root)
    heap = []
    members = {0: root}
    split = find_split(root)
    if split is not None:
        heapq.heappush(heap, (-split[0], 0, split[1], split[2]))
    n_leaves = 1
    while heap and n_leaves < cap:
        _, node, f, t = heapq.heappop(heap)
        idx = members.pop(node)
        go_left = X[idx, f] <= t
        children = []
        for part in (idx[go_left], idx[~go_left]):
            child = new_node(part)
            members[child] = part
            children.append((child, part))
        feature[node], threshold[node] = f, t
        left[node], right[node] = children[0][0], children[1][0]
        n_leaves += 1
        for child, part in children:
            split = find_split(part)
            if split is not None:
                heapq.heappush(heap, (-split[0], child, split[1], split[2]))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


@dataclass
class ForestConfig:
    n_estimators: int = 100
    max_leaf_nodes: int | None = 1000
    task: str = "classification"
    seed: int = 0
    max_features: object = "auto"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError(f"n_estimators must be at least 1, got {self.n_estimators}")
        if self.task not in ("classification", "regression"):
            raise ConfigError(f"unknown task {self.task!r}")


@dataclass
class Forest:
    trees: list
    task: str
    n_classes: int = 1

    def predict(self, X) -> np.ndarray:
        """Majority vote (ties to the lowest class) or mean of tree predictions."""
        preds = np.stack([tree.predict(X) for tree in self.trees])
        if self.task == "regression":
            return preds.mean(axis=0)
        votes = np.zeros((preds.shape[1], self.n_classes), dtype=np.int64)
        for p in preds:
            votes[np.arange(p.size), p] += 1
        return votes.argmax(axis=1)


def bootstrap_rows(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` row indices drawn uniformly with replacement."""
    return rng.integers(0, n, size=n)


def fit_forest(X, y, cfg: ForestConfig, rng: np.random.Generator | None = None) -> Forest:
    """Bagged trees; tree ``i`` uses the ``i``-th child stream of `rng`."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError(f"cannot fit a forest on input of shape {X.shape}")
    rng = stream(cfg.seed, "forest") if rng is None else rng
    n = X.shape[0]
    y = np.asarray(y)
    n_classes = int(y.max()) + 1 if cfg.task == "classification" else 1
    trees = []
    for tree_rng in rng.spawn(cfg.n_estimators):
        rows = bootstrap_rows(tree_rng, n) if cfg.bootstrap else np.arange(n)
        trees.append(fit_tree(X[rows], y[rows], cfg.task, cfg.max_leaf_nodes, cfg.max_features,
                              tree_rng, n_classes))
    return Forest(trees, cfg.task, n_classes)


def score(forest: Forest, X, y) -> float:
    """Accuracy, or NRMS (RMSE over the std of the true targets) for regression."""
    pred = forest.predict(X)
    y = np.asarray(y)
    if forest.task == "classification":
        return float(np.mean(pred == y))
    std = np.std(y)
    if std == 0:
        raise ConfigError("regression targets are constant; NRMS is undefined")
    return float(np.sqrt(np.mean((pred - y) ** 2)) / std)


def downstream_score(train_X, train_y, test_X, test_y, task: str, cfg: ForestConfig | None = None,
                     n_repeats: int = 10, seed: int = 0) -> float:
    """Mean test score of `n_repeats` forests trained on the imputed train set."""
    for name, arr in (("train", train_X), ("test", test_X)):
        if np.isnan(np.asarray(arr, dtype=np.float64)).any():
            raise IncompleteDataError(f"{name} features still contain missing cells")
    cfg = ForestConfig(task=task) if cfg is None else cfg
    if cfg.task != task:
        cfg = ForestConfig(cfg.n_estimators, cfg.max_leaf_nodes, task, cfg.seed, cfg.max_features, cfg.bootstrap)
    scores = [
        score(fit_forest(train_X, train_y, cfg, stream(seed, "forest", r)), test_X, test_y)
        for r in range(n_repeats)
    ]
    return float(np.mean(scores))
