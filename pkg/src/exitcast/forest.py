"""Random forest of Gini-split CART trees with exact vote-fraction probabilities.

Each tree grows on a bootstrap sample, drawing a fresh random feature subset
at every split.  A tree votes with the majority class of the leaf a sample
reaches (ties vote negative), and the forest's probability output is exactly
(positive votes) / (number of trees).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tree",
    "ForestModel",
    "tree_fit",
    "forest_fit",
    "forest_prob",
    "save_forest",
    "load_forest",
]

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class Tree:
    """Flat preorder node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_neg: np.ndarray
    n_pos: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    n_trees: int
    mtry: int
    min_node: int
    seed: int


def _gini_from_counts(n_pos: int, n_neg: int) -> float:
    n = n_pos + n_neg
    if n == 0:
        return 0.0
    return 1.0 - (n_pos * n_pos + n_neg * n_neg) / (n * n)


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    feats: np.ndarray,
    min_node: int,
    parent_gini: float,
) -> tuple[int, float] | None:
    """Exhaustive threshold search over the drawn features; None if nothing improves."""
    n = len(idx)
    y_node = y[idx]
    total_pos = int(y_node.sum())
    best_impurity = parent_gini - _MIN_GAIN
    best: tuple[int, float] | None = None

    left_n = np.arange(1, n)
    right_n = n - left_n
    size_ok = (left_n >= min_node) & (right_n >= min_node)
    if not size_ok.any():
        return None

    for f in feats:
        xv = X[idx, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        left_pos = np.cumsum(y_node[order])[:-1]
        left_neg = left_n - left_pos
        right_pos = total_pos - left_pos
        right_neg = right_n - right_pos
        gini_l = 1.0 - (left_pos * left_pos + left_neg * left_neg) / (left_n * left_n)
        gini_r = 1.0 - (right_pos * right_pos + right_neg * right_neg) / (
            right_n * right_n
        )
        weighted = (left_n * gini_l + right_n * gini_r) / n
        weighted[~valid] = np.inf
        j = int(np.argmin(weighted))
        if weighted[j] < best_impurity:
            best_impurity = float(weighted[j])
            thr = 0.5 * (xs[j] + xs[j + 1])
            # Midpoint rounding must never swallow the right side.
            if not xs[j] <= thr < xs[j + 1]:
                thr = float(xs[j])
            best = (int(f), float(thr))
    return best


def tree_fit(
    X: np.ndarray,
    y: np.ndarray,
    mtry: int,
    min_node: int,
    rng: np.random.Generator,
    row_indices: np.ndarray | None = None,
) -> Tree:
    """Grow one CART tree greedily; ``row_indices`` selects (possibly repeated) rows.

    Splits stop at purity, at the minimum leaf size, or when no candidate
    improves the weighted Gini impurity.  Nodes are expanded in preorder so
    the random feature draws are a deterministic function of the stream.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("cannot grow a tree from zero rows")
    p = X.shape[1]
    m = min(mtry, p)
    if m < 1:
        raise ValueError(f"mtry must be >= 1, got {mtry}")
    root_idx = np.arange(len(y)) if row_indices is None else np.asarray(row_indices)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    n_neg: list[int] = []
    n_pos: list[int] = []

    # LIFO with the right child pushed first, so pops happen in preorder.
    stack: list[tuple[np.ndarray, int, bool]] = [(root_idx, -1, False)]
    while stack:
        idx, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = node_id
            else:
                left[parent] = node_id

        pos = int(y[idx].sum())
        neg = len(idx) - pos
        n_pos.append(pos)
        n_neg.append(neg)

        split = None
        if pos and neg and len(idx) >= 2 * min_node:
            feats = rng.choice(p, size=m, replace=False)
            split = _best_split(X, y, idx, feats, min_node, _gini_from_counts(pos, neg))

        if split is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
        else:
            f, thr = split
            feature.append(f)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            go_left = X[idx, f] <= thr
            stack.append((idx[~go_left], node_id, True))
            stack.append((idx[go_left], node_id, False))

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        n_neg=np.asarray(n_neg, dtype=np.int64),
        n_pos=np.asarray(n_pos, dtype=np.int64),
    )


def forest_fit(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 500,
    mtry: int = 4,
    min_node: int = 1,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestModel:
    """Grow ``n_trees`` bootstrap trees, each on its own seed-derived stream.

    ``bootstrap=False`` is a test hook that trains every tree on the full
    sample.  Deterministic given the seed, independent of build order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    if len(np.unique(y)) < 2:
        raise ValueError("labels are single-class; nothing to fit")
    streams = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    n = len(y)
    for child_seed in streams:
        rng = np.random.default_rng(child_seed)
        rows = rng.integers(0, n, size=n) if bootstrap else None
        trees.append(tree_fit(X, y, mtry, min_node, rng, row_indices=rows))
    return ForestModel(
        trees=tuple(trees), n_trees=n_trees, mtry=mtry, min_node=min_node, seed=seed
    )


def _tree_votes(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Route rows to leaves; vote 1 where the leaf's positives outnumber negatives."""
    node = np.zeros(len(X), dtype=np.int32)
    rows = np.flatnonzero(tree.feature[node] >= 0)
    while len(rows):
        cur = node[rows]
        go_left = X[rows, tree.feature[cur]] <= tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
        rows = rows[tree.feature[node[rows]] >= 0]
    return (tree.n_pos[node] > tree.n_neg[node]).astype(np.int64)


def forest_prob(model: ForestModel, x: np.ndarray) -> float | np.ndarray:
    """Fraction of trees voting positive, for one vector or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    votes = np.zeros(len(X), dtype=np.int64)
    for tree in model.trees:
        votes += _tree_votes(tree, X)
    probs = votes / model.n_trees
    return float(probs[0]) if single else probs


def save_forest(path, model: ForestModel) -> None:
    """Write the forest as plain text: one preorder node line per row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("forest v1\n")
        fh.write(
            f"n_trees={model.n_trees} mtry={model.mtry} "
            f"min_node={model.min_node} seed={model.seed}\n"
        )
        for t, tree in enumerate(model.trees):
            fh.write(f"tree {t} nodes={tree.n_nodes}\n")
            for i in range(tree.n_nodes):
                if tree.feature[i] < 0:
                    fh.write(f"leaf {tree.n_neg[i]} {tree.n_pos[i]}\n")
                else:
                    fh.write(
                        f"split {tree.feature[i]} {float(tree.threshold[i])!r} "
                        f"{tree.left[i]} {tree.right[i]} "
                        f"{tree.n_neg[i]} {tree.n_pos[i]}\n"
                    )


def load_forest(path) -> ForestModel:
    """Read back a forest written by save_forest."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "forest v1":
        raise ValueError("not a forest model file")
    meta = dict(kv.split("=") for kv in lines[1].split())
    trees = []
    pos = 2
    for _ in range(int(meta["n_trees"])):
        head = lines[pos].split()
        n_nodes = int(head[2].split("=")[1])
        pos += 1
        feature, threshold, left, right, n_neg, n_pos = [], [], [], [], [], []
        for line in lines[pos : pos + n_nodes]:
            parts = line.split()
            if parts[0] == "leaf":
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                n_neg.append(int(parts[1]))
                n_pos.append(int(parts[2]))
            else:
                feature.append(int(parts[1]))
                threshold.append(float(parts[2]))
                left.append(int(parts[3]))
                right.append(int(parts[4]))
                n_neg.append(int(parts[5]))
                n_pos.append(int(parts[6]))
        pos += n_nodes
        trees.append(
            Tree(
                feature=np.asarray(feature, dtype=np.int32),
                threshold=np.asarray(threshold, dtype=float),
                left=np.asarray(left, dtype=np.int32),
                right=np.asarray(right, dtype=np.int32),
                n_neg=np.asarray(n_neg, dtype=np.int64),
                n_pos=np.asarray(n_pos, dtype=np.int64),
            )
        )
    return ForestModel(
        trees=tuple(trees),
        n_trees=int(meta["n_trees"]),
        mtry=int(meta["mtry"]),
        min_node=int(meta["min_node"]),
        seed=int(meta["seed"]),
    )
