"""Combine the three component classifiers by vote and describe their voting dynamics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import BinaryLabel

__all__ = [
    "TriplePrediction",
    "FusionReport",
    "fuse_majority",
    "fuse_unanimity",
    "fuse_majority_labels",
    "fuse_unanimity_labels",
    "voting_dynamics",
    "write_fusion_csv",
    "read_fusion_csv",
]

FUSION_FIELDS = ("ar", "tari", "tarni", "trf_min", "tlr_min", "tsvm_min")


def fuse_majority(lr: BinaryLabel, rf: BinaryLabel, svm: BinaryLabel) -> BinaryLabel:
    """The label at least two of the three voters cast."""
    votes = int(lr) + int(rf) + int(svm)
    return BinaryLabel.POSITIVE if votes >= 2 else BinaryLabel.NEGATIVE


def fuse_unanimity(lr: BinaryLabel, rf: BinaryLabel, svm: BinaryLabel) -> BinaryLabel:
    """Positive only when all three voters say positive."""
    votes = int(lr) + int(rf) + int(svm)
    return BinaryLabel.POSITIVE if votes == 3 else BinaryLabel.NEGATIVE


def fuse_majority_labels(lr: np.ndarray, rf: np.ndarray, svm: np.ndarray) -> np.ndarray:
    """Vectorized majority vote over aligned 0/1 label arrays."""
    return ((np.asarray(lr) + np.asarray(rf) + np.asarray(svm)) >= 2).astype(np.int64)


def fuse_unanimity_labels(lr: np.ndarray, rf: np.ndarray, svm: np.ndarray) -> np.ndarray:
    """Vectorized unanimity vote over aligned 0/1 label arrays."""
    return ((np.asarray(lr) + np.asarray(rf) + np.asarray(svm)) == 3).astype(np.int64)


@dataclass(frozen=True)
class TriplePrediction:
    """One test sample as seen by all three components, plus the truth.

    Construction checks that each label is its probability thresholded at
    that component's gamma.
    """

    lr_label: BinaryLabel
    rf_label: BinaryLabel
    svm_label: BinaryLabel
    lr_prob: float
    rf_prob: float
    svm_prob: float
    truth: BinaryLabel
    lr_gamma: float = 0.5
    rf_gamma: float = 0.5
    svm_gamma: float = 0.5

    def __post_init__(self) -> None:
        for which in ("lr", "rf", "svm"):
            prob = getattr(self, f"{which}_prob")
            gamma = getattr(self, f"{which}_gamma")
            label = getattr(self, f"{which}_label")
            expected = BinaryLabel.POSITIVE if prob > gamma else BinaryLabel.NEGATIVE
            if label is not expected:
                raise ValueError(
                    f"{which} label {label.name} inconsistent with prob {prob} at gamma {gamma}"
                )

    @classmethod
    def from_probs(
        cls,
        lr_prob: float,
        rf_prob: float,
        svm_prob: float,
        truth: BinaryLabel,
        lr_gamma: float = 0.5,
        rf_gamma: float = 0.5,
        svm_gamma: float = 0.5,
    ) -> "TriplePrediction":
        def lab(p: float, g: float) -> BinaryLabel:
            return BinaryLabel.POSITIVE if p > g else BinaryLabel.NEGATIVE

        return cls(
            lr_label=lab(lr_prob, lr_gamma),
            rf_label=lab(rf_prob, rf_gamma),
            svm_label=lab(svm_prob, svm_gamma),
            lr_prob=lr_prob,
            rf_prob=rf_prob,
            svm_prob=svm_prob,
            truth=truth,
            lr_gamma=lr_gamma,
            rf_gamma=rf_gamma,
            svm_gamma=svm_gamma,
        )


@dataclass(frozen=True)
class FusionReport:
    """Voting-dynamics statistics; None marks an empty conditioning set."""

    ar: float | None
    tari: float | None
    tarni: float | None
    tlr_min: float | None
    trf_min: float | None
    tsvm_min: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in FUSION_FIELDS}


def voting_dynamics(
    triples: Sequence[TriplePrediction],
    condition_on_agreed_label: bool = True,
) -> FusionReport:
    """Agreement frequency and conditional correctness of the three voters.

    ``ar`` is the fraction of samples where all three labels coincide;
    ``tari``/``tarni`` are the fractions of positive/negative agreements
    whose agreed label matches the truth.  With
    ``condition_on_agreed_label=False`` both instead condition on agreement
    alone and count truths of the matching class.  Each ``t*_min`` is the
    fraction of that component's lone-dissent cases where the dissenter was
    right.
    """
    if not triples:
        raise ValueError("voting dynamics need at least one sample")
    n = len(triples)
    lr = np.array([int(t.lr_label) for t in triples])
    rf = np.array([int(t.rf_label) for t in triples])
    svm = np.array([int(t.svm_label) for t in triples])
    truth = np.array([int(t.truth) for t in triples])

    agree = (lr == rf) & (rf == svm)

    def ratio(num: int, den: int) -> float | None:
        return num / den if den else None

    if condition_on_agreed_label:
        pos_agree = agree & (lr == 1)
        neg_agree = agree & (lr == 0)
        tari = ratio(int((pos_agree & (truth == 1)).sum()), int(pos_agree.sum()))
        tarni = ratio(int((neg_agree & (truth == 0)).sum()), int(neg_agree.sum()))
    else:
        tari = ratio(int((agree & (truth == 1) & (lr == 1)).sum()), int(agree.sum()))
        tarni = ratio(int((agree & (truth == 0) & (lr == 0)).sum()), int(agree.sum()))

    def minority_correct(this: np.ndarray, a: np.ndarray, b: np.ndarray) -> float | None:
        lone = (a == b) & (this != a)
        return ratio(int((lone & (this == truth)).sum()), int(lone.sum()))

    return FusionReport(
        ar=int(agree.sum()) / n,
        tari=tari,
        tarni=tarni,
        tlr_min=minority_correct(lr, rf, svm),
        trf_min=minority_correct(rf, lr, svm),
        tsvm_min=minority_correct(svm, lr, rf),
    )


def _format(v: float | None) -> str:
    return "NA" if v is None else repr(float(v))


def write_fusion_csv(path, report: FusionReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FUSION_FIELDS))
        writer.writerow([_format(getattr(report, name)) for name in FUSION_FIELDS])


def read_fusion_csv(path) -> FusionReport:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != list(FUSION_FIELDS):
            raise ValueError(f"unexpected fusion CSV header: {header}")
        row = next(reader)
    return FusionReport(
        **{name: (None if v == "NA" else float(v)) for name, v in zip(FUSION_FIELDS, row)}
    )
