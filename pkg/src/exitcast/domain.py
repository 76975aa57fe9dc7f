"""Core data model: companies, funding rounds, exit outcomes, binary labels.

Everything here is immutable after construction and safe to share across
parallel workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable

__all__ = [
    "ExitStatus",
    "BinaryLabel",
    "LabelMapping",
    "RoundRecord",
    "CompanyRecord",
    "aggregate_label",
    "censor_filter",
    "N_SECTORS",
    "MAX_ROUNDS",
]

N_SECTORS = 9
MAX_ROUNDS = 3


class ExitStatus(Enum):
    """Terminal outcome of a private company."""

    IPO = "IPO"
    MA = "MA"
    LBO = "LBO"
    BANKRUPT = "Bankrupt"
    PRIVATE = "Private"


class BinaryLabel(IntEnum):
    """Two-class target: POSITIVE (went public / acquired) beats NEGATIVE."""

    NEGATIVE = 0
    POSITIVE = 1


@dataclass(frozen=True)
class LabelMapping:
    """Total map from exit status to binary label.

    IPO and MA are always positive; Bankrupt and Private always negative.
    Only the buyout direction is configurable: a buyout is an acquisition
    event, so it defaults to positive.
    """

    lbo: BinaryLabel = BinaryLabel.POSITIVE

    def label_for(self, exit: ExitStatus) -> BinaryLabel:
        if exit is ExitStatus.LBO:
            return self.lbo
        if exit in (ExitStatus.IPO, ExitStatus.MA):
            return BinaryLabel.POSITIVE
        return BinaryLabel.NEGATIVE

    def as_dict(self) -> dict[ExitStatus, BinaryLabel]:
        return {status: self.label_for(status) for status in ExitStatus}


def aggregate_label(exit: ExitStatus, mapping: LabelMapping) -> BinaryLabel:
    """Collapse a five-way exit status into the two-class target."""
    return mapping.label_for(exit)


@dataclass(frozen=True)
class RoundRecord:
    """One financing round: position, year, participating investors, VIX level."""

    round_index: int
    year: int
    investor_ids: tuple[str, ...] = ()
    vix: float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.round_index <= MAX_ROUNDS:
            raise ValueError(f"round_index must be in 1..{MAX_ROUNDS}, got {self.round_index}")
        if self.vix < 0:
            raise ValueError(f"vix must be nonnegative, got {self.vix}")
        if not isinstance(self.investor_ids, tuple):
            object.__setattr__(self, "investor_ids", tuple(self.investor_ids))


@dataclass(frozen=True)
class CompanyRecord:
    """One private company with up to three rounds and a known exit."""

    company_id: str
    sector: int
    foundation_year: int
    rounds: tuple[RoundRecord, ...]
    exit: ExitStatus
    exit_year: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.sector <= N_SECTORS:
            raise ValueError(f"sector must be in 1..{N_SECTORS}, got {self.sector}")
        if not isinstance(self.rounds, tuple):
            object.__setattr__(self, "rounds", tuple(self.rounds))
        if len(self.rounds) > MAX_ROUNDS:
            raise ValueError(f"at most {MAX_ROUNDS} rounds allowed, got {len(self.rounds)}")
        years = [r.year for r in self.rounds]
        if any(a > b for a, b in zip(years, years[1:])):
            raise ValueError(f"rounds must be sorted nondecreasing by year, got {years}")
        for r in self.rounds:
            if r.year < self.foundation_year:
                raise ValueError(
                    f"round year {r.year} precedes foundation year {self.foundation_year}"
                )

    @property
    def first_round_year(self) -> int | None:
        return self.rounds[0].year if self.rounds else None


def censor_filter(
    records: Iterable[CompanyRecord], year_lo: int, year_hi: int
) -> list[CompanyRecord]:
    """Keep records whose first round falls inside [year_lo, year_hi].

    Records without rounds are dropped (they have no first-round year).
    Input order is preserved; the input itself is untouched.
    """
    if year_lo > year_hi:
        raise ValueError(f"empty window: year_lo={year_lo} > year_hi={year_hi}")
    return [
        r
        for r in records
        if r.rounds and year_lo <= r.rounds[0].year <= year_hi
    ]
