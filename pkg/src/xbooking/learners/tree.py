"""Binary regression/classification trees with exact greedy split search.

A single builder serves CART (gini), first-order boosting (squared error on
pseudo-residuals) and second-order boosting (gradient/hessian gain).  Missing
values (NaN) are routed to whichever side gives the larger gain, and the
choice is stored per node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..errors import EmptyDataset

LEAF = -1


@dataclass
class Tree:
    """Flat array representation; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("feature", "threshold", "missing_left", "left", "right", "value"))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            ids = node[r]
            x = X[r, self.feature[ids]]
            go_left = np.where(np.isnan(x), self.missing_left[ids], x <= self.threshold[ids])
            node[r] = np.where(go_left, self.left[ids], self.right[ids])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_nodes(self) -> List[dict]:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] == LEAF:
                nodes.append({"id": i, "leaf": float(self.value[i])})
            else:
                nodes.append({
                    "id": i, "feature": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "missing_left": bool(self.missing_left[i]),
                    "left": int(self.left[i]), "right": int(self.right[i]),
                })
        return nodes

    @classmethod
    def from_nodes(cls, nodes: Sequence[dict]) -> "Tree":
        n = len(nodes)
        t = cls(np.full(n, LEAF, dtype=np.int64), np.zeros(n), np.ones(n, dtype=bool),
                np.full(n, LEAF, dtype=np.int64), np.full(n, LEAF, dtype=np.int64), np.zeros(n))
        for node in nodes:
            i = node["id"]
            if "leaf" in node:
                t.value[i] = node["leaf"]
            else:
                t.feature[i] = node["feature"]
                t.threshold[i] = node["threshold"]
                t.missing_left[i] = node["missing_left"]
                t.left[i] = node["left"]
                t.right[i] = node["right"]
        t.validate()
        return t

    def validate(self) -> None:
        seen = set()
        stack = [0]
        while stack:
            i = stack.pop()
            if i in seen or not 0 <= i < self.n_nodes:
                raise ValueError("tree is not a well-formed binary tree")
            seen.add(i)
            if self.feature[i] != LEAF:
                if not np.isfinite(self.threshold[i]):
                    raise ValueError(f"node {i} has a non-finite threshold")
                stack.extend((int(self.left[i]), int(self.right[i])))
        if len(seen) != self.n_nodes:
            raise ValueError("tree has unreachable nodes")


# -- split criteria -------------------------------------------------------------
# Each criterion works on per-sample statistic rows S (column 0 is always the
# unweighted count) and scores candidate (left, right) sums in bulk.

class Gini:
    """Columns: count, weight, weight * y."""

    min_gain = -1e-12   # zero-gain splits allowed so XOR-type structure can be found

    def __init__(self, min_samples_leaf: int = 1):
        self.min_samples_leaf = min_samples_leaf

    @staticmethod
    def _impurity(s):
        w, p = s[..., 1], s[..., 2]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 2.0 * p * (w - p) / w
        return np.where(w > 0, out, 0.0)

    def gain(self, left, right, parent):
        return self._impurity(parent) - self._impurity(left) - self._impurity(right)

    def admissible(self, left, right):
        return (left[..., 0] >= self.min_samples_leaf) & (right[..., 0] >= self.min_samples_leaf)

    def should_split(self, parent) -> bool:
        return self._impurity(parent) > 1e-12

    def leaf_value(self, s, rows) -> float:
        return float(s[2] / s[1]) if s[1] > 0 else 0.0


class SquaredError:
    """Columns: count, weight, weight * residual.  Variance-reduction gain."""

    min_gain = 1e-12

    def __init__(self, leaf_fn: Callable[[np.ndarray], float], min_samples_leaf: int = 1):
        self.leaf_fn = leaf_fn
        self.min_samples_leaf = min_samples_leaf

    @staticmethod
    def _score(s):
        w, r = s[..., 1], s[..., 2]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = r * r / w
        return np.where(w > 0, out, 0.0)

    def gain(self, left, right, parent):
        return self._score(left) + self._score(right) - self._score(parent)

    def admissible(self, left, right):
        return (left[..., 0] >= self.min_samples_leaf) & (right[..., 0] >= self.min_samples_leaf)

    def should_split(self, parent) -> bool:
        return True

    def leaf_value(self, s, rows) -> float:
        return self.leaf_fn(rows)


class Newton:
    """Columns: count, gradient, hessian.  Regularised second-order gain."""

    min_gain = 1e-12

    def __init__(self, reg_lambda=1.0, gamma=0.0, min_child_weight=1.0, min_samples_leaf=1):
        self.reg_lambda = reg_lambda
        self.gamma = gamma
        self.min_child_weight = min_child_weight
        self.min_samples_leaf = min_samples_leaf

    def _score(self, s):
        g, h = s[..., 1], s[..., 2]
        return g * g / (h + self.reg_lambda)

    def gain(self, left, right, parent):
        return 0.5 * (self._score(left) + self._score(right) - self._score(parent)) - self.gamma

    def admissible(self, left, right):
        return ((left[..., 2] >= self.min_child_weight) & (right[..., 2] >= self.min_child_weight)
                & (left[..., 0] >= self.min_samples_leaf) & (right[..., 0] >= self.min_samples_leaf))

    def should_split(self, parent) -> bool:
        return True

    def leaf_value(self, s, rows) -> float:
        return float(-s[1] / (s[2] + self.reg_lambda))


# -- builder ---------------------------------------------------------------------

def presort(X: np.ndarray) -> List[np.ndarray]:
    """Per-feature row order by value, NaNs dropped."""
    out = []
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        out.append(order[~np.isnan(col[order])])
    return out


def _midpoint(a: float, b: float) -> float:
    mid = a + (b - a) / 2.0
    # rule is x <= threshold goes left, so keep a <= mid < b under rounding
    return a if mid >= b else mid


def build_tree(X: np.ndarray, S: np.ndarray, criterion, max_depth: Optional[int] = None,
               rows: Optional[np.ndarray] = None,
               sorted_idx: Optional[List[np.ndarray]] = None) -> Tree:
    """Grow one tree greedily.

    ``rows`` restricts growth to a subset of samples (row subsampling);
    ``sorted_idx`` may carry a precomputed :func:`presort` of the full ``X``.
    Ties are broken by lowest feature index, then lowest threshold, then
    missing-goes-left.
    """
    n, d = X.shape
    if rows is None:
        rows = np.arange(n)
    if len(rows) == 0:
        raise EmptyDataset("cannot grow a tree on zero rows")
    if sorted_idx is None:
        sorted_idx = presort(X)
    member = np.zeros(n, dtype=bool)
    member[rows] = True
    root_sorted = [s[member[s]] for s in sorted_idx]
    missing = np.isnan(X)

    feature: List[int] = []
    threshold: List[float] = []
    miss_left: List[bool] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        miss_left.append(True)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        return len(feature) - 1

    go_left = np.zeros(n, dtype=bool)
    stack = [(new_node(), np.sort(rows), root_sorted, 0)]
    while stack:
        node, node_rows, node_sorted, depth = stack.pop()
        total = S[node_rows].sum(axis=0)
        split = None
        if (max_depth is None or depth < max_depth) and len(node_rows) > 1 \
                and criterion.should_split(total):
            split = _best_split(X, S, missing, node_rows, node_sorted, total, criterion)
        if split is None:
            value[node] = criterion.leaf_value(total, node_rows)
            continue
        f, thr, ml = split
        x = X[node_rows, f]
        lmask = np.where(np.isnan(x), ml, x <= thr)
        go_left[node_rows] = lmask
        l_rows, r_rows = node_rows[lmask], node_rows[~lmask]
        l_sorted = [s[go_left[s]] for s in node_sorted]
        r_sorted = [s[~go_left[s]] for s in node_sorted]
        feature[node], threshold[node], miss_left[node] = f, thr, ml
        left[node] = new_node()
        right[node] = new_node()
        # right pushed first so the left subtree is grown first
        stack.append((right[node], r_rows, r_sorted, depth + 1))
        stack.append((left[node], l_rows, l_sorted, depth + 1))

    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                np.array(miss_left, dtype=bool), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value, dtype=float))


def _best_split(X, S, missing, node_rows, node_sorted, total, criterion):
    best_gain = -np.inf
    best = None
    for f in range(X.shape[1]):
        srt = node_sorted[f]
        if len(srt) == 0:
            continue
        vals = X[srt, f]
        cut = np.nonzero(vals[:-1] < vals[1:])[0]
        miss_rows = node_rows[missing[node_rows, f]]
        if len(miss_rows):
            # last candidate: every observed row left, missing rows right
            cut = np.r_[cut, len(srt) - 1]
        if cut.size == 0:
            continue
        cs = np.cumsum(S[srt], axis=0)
        miss = S[miss_rows].sum(axis=0) if len(miss_rows) else np.zeros(S.shape[1])
        lo = cs[cut]
        hi = cs[-1] - lo
        # candidate layout: (threshold, direction) with missing-left first
        L = np.stack([lo + miss, lo], axis=1)
        R = np.stack([hi, hi + miss], axis=1)
        g = criterion.gain(L, R, total)
        g = np.where(criterion.admissible(L, R), g, -np.inf)
        k = int(np.argmax(g))
        gk = g.flat[k]
        if gk > best_gain:
            ci, direction = divmod(k, 2)
            i = cut[ci]
            best_gain = gk
            thr = _midpoint(float(vals[i]), float(vals[i + 1])) if i + 1 < len(vals) \
                else float(vals[i])
            best = (f, thr, direction == 0)
    if best is None or not best_gain > criterion.min_gain:
        return None
    return best


# -- CART classifier ------------------------------------------------------------

@dataclass
class DecisionTree:
    """CART classifier; leaf values are the (weighted) positive-class fraction."""

    tree: Tree
    feature_names: List[str]
    params: dict = field(default_factory=dict)

    model_type = "tree"

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)


def train_tree(X: np.ndarray, y: np.ndarray, feature_names: Sequence[str],
               max_depth: Optional[int] = None, min_samples_leaf: int = 1,
               criterion: str = "gini", pos_weight: float = 1.0) -> DecisionTree:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise EmptyDataset("training set is empty")
    if criterion != "gini":
        raise ValueError("only the gini criterion is supported")
    w = np.where(y > 0, pos_weight, 1.0)
    S = np.column_stack([np.ones_like(y), w, w * y])
    tree = build_tree(X, S, Gini(min_samples_leaf), max_depth=max_depth)
    params = {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf,
              "criterion": criterion, "pos_weight": pos_weight}
    return DecisionTree(tree, list(feature_names), params)
