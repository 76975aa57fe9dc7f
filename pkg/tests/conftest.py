"""Shared fixtures and builders for the test suite."""
import numpy as np
import pytest

from exitcast.domain import CompanyRecord, ExitStatus, RoundRecord


def make_company(
    company_id="c1",
    sector=2,
    foundation_year=2000,
    round_years=(2002,),
    investors=(("a",),),
    vix=20.0,
    exit=ExitStatus.IPO,
    exit_year=None,
):
    """Terse builder for a valid CompanyRecord."""
    rounds = tuple(
        RoundRecord(round_index=i + 1, year=y, investor_ids=tuple(inv), vix=vix)
        for i, (y, inv) in enumerate(zip(round_years, investors))
    )
    return CompanyRecord(
        company_id=company_id,
        sector=sector,
        foundation_year=foundation_year,
        rounds=rounds,
        exit=exit,
        exit_year=exit_year,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def small_records():
    """A deterministic synthetic population shared by the slower tests."""
    from exitcast.ingest import SyntheticConfig, generate_synthetic

    return generate_synthetic(SyntheticConfig(n_companies=1200, seed=11))
