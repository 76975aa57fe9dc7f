"""Class-balancing resampler and k-fold splitter for the experimental protocol."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["FoldAssignment", "balance", "kfold"]


@dataclass(frozen=True)
class FoldAssignment:
    """Which fold each of n records belongs to; fold sizes differ by at most 1."""

    fold_of: np.ndarray
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "fold_of", np.asarray(self.fold_of, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.fold_of)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def balance(
    train_indices: Sequence[int], labels: Sequence[int], seed: int
) -> np.ndarray:
    """Rebalance a training split by upsampling the minority class with replacement.

    ``labels`` is the full label array; ``train_indices`` selects the training
    rows.  The majority class is kept exactly once per index; the minority
    class is drawn with replacement until both classes have the majority
    cardinality.  With equal counts the positive class is the one redrawn.

    Returns the balanced index multiset (majority indices first, in input
    order, then the minority draws).  Raises on single-class input.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    labels = np.asarray(labels)
    y = labels[train_indices]
    pos = train_indices[y == 1]
    neg = train_indices[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError(
            f"degenerate training set: {len(pos)} positive / {len(neg)} negative"
        )
    rng = np.random.default_rng(seed)
    if len(pos) <= len(neg):
        kept, redrawn = neg, pos
    else:
        kept, redrawn = pos, neg
    draws = rng.choice(redrawn, size=len(kept), replace=True)
    return np.concatenate([kept, draws])


def kfold(n: int, k: int, seed: int) -> FoldAssignment:
    """Uniformly random partition of range(n) into k folds of near-equal size.

    The first ``n % k`` folds get the extra element, so sizes are ceil(n/k)
    or floor(n/k).
    """
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    base, extra = divmod(n, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        fold_of[order[start : start + size]] = fold
        start += size
    return FoldAssignment(fold_of=fold_of, k=k)
