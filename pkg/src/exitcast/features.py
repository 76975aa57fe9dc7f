"""Turn company records into the 19-component numeric vectors the classifiers consume.

The investor-importance index is built from training data only; feature
extraction itself never looks at labels, so the split between ``build_investor_index``
(train-side) and ``featurize`` (anywhere) is what keeps the pipeline leakage-free.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import MAX_ROUNDS, CompanyRecord

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "InvestorIndex",
    "build_investor_index",
    "featurize",
    "featurize_all",
    "write_feature_csv",
    "read_feature_csv",
]

# Fixed column order: foundation year, then six components per round.
FEATURE_NAMES: tuple[str, ...] = ("foundation_year",) + tuple(
    f"{name}_{r}"
    for r in range(1, MAX_ROUNDS + 1)
    for name in ("lag", "vix", "n_investors", "top_rank", "mean_rank", "present")
)
N_FEATURES = len(FEATURE_NAMES)  # 19


@dataclass(frozen=True)
class InvestorIndex:
    """Importance score per investor, max-normalized to [0, 1].

    ``score(inv) = deal_count(inv) / max_deal_count`` where deal_count counts
    the distinct training companies the investor participated in.  Unseen
    investors score 0.
    """

    scores: Mapping[str, float]
    built_from: int

    def score(self, investor_id: str) -> float:
        return self.scores.get(investor_id, 0.0)

    def __len__(self) -> int:
        return len(self.scores)


def build_investor_index(train: Sequence[CompanyRecord]) -> InvestorIndex:
    """Count distinct deals per investor over the training records and normalize."""
    if len(train) == 0:
        raise ValueError("cannot build an investor index from zero records")
    counts: dict[str, int] = {}
    for record in train:
        seen: set[str] = set()
        for rnd in record.rounds:
            seen.update(rnd.investor_ids)
        for inv in seen:
            counts[inv] = counts.get(inv, 0) + 1
    if not counts:
        return InvestorIndex(scores={}, built_from=len(train))
    top = max(counts.values())
    scores = {inv: c / top for inv, c in counts.items()}
    return InvestorIndex(scores=scores, built_from=len(train))


def featurize(record: CompanyRecord, index: InvestorIndex) -> np.ndarray:
    """Map one record to its 19-component vector (see FEATURE_NAMES for order).

    Missing rounds contribute zeros plus a present flag of 0, so models can
    tell "no round" apart from "round at lag 0".
    """
    x = np.zeros(N_FEATURES)
    x[0] = record.foundation_year
    for rnd in record.rounds:
        base = 1 + (rnd.round_index - 1) * 6
        scores = [index.score(inv) for inv in rnd.investor_ids]
        x[base + 0] = rnd.year - record.foundation_year
        x[base + 1] = rnd.vix
        x[base + 2] = len(rnd.investor_ids)
        x[base + 3] = max(scores) if scores else 0.0
        x[base + 4] = float(np.mean(scores)) if scores else 0.0
        x[base + 5] = 1.0
    return x


def featurize_all(records: Sequence[CompanyRecord], index: InvestorIndex) -> np.ndarray:
    """Stack featurize() over records into an (n, 19) matrix."""
    if len(records) == 0:
        return np.zeros((0, N_FEATURES))
    return np.stack([featurize(r, index) for r in records])


def write_feature_csv(path, X: np.ndarray, labels: Sequence[int]) -> None:
    """Export a feature matrix with its labels for external inspection."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} feature columns, got {X.shape[1]}")
    if X.shape[0] != len(labels):
        raise ValueError("feature rows and labels must align")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + ["label"])
        for row, lab in zip(X, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def read_feature_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back a matrix written by write_feature_csv."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != list(FEATURE_NAMES) + ["label"]:
            raise ValueError(f"unexpected feature CSV header: {header}")
        rows, labels = [], []
        for row in reader:
            rows.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    if not rows:
        return np.zeros((0, N_FEATURES)), np.zeros(0, dtype=int)
    return np.asarray(rows), np.asarray(labels, dtype=int)
