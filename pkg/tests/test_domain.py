import pytest
from hypothesis import given
from hypothesis import strategies as st

from exitcast.domain import (
    BinaryLabel,
    CompanyRecord,
    ExitStatus,
    LabelMapping,
    RoundRecord,
    aggregate_label,
    censor_filter,
)

from conftest import make_company


class TestAggregateLabel:
    def test_ipo_is_positive(self):
        assert aggregate_label(ExitStatus.IPO, LabelMapping()) is BinaryLabel.POSITIVE

    def test_bankrupt_is_negative(self):
        assert aggregate_label(ExitStatus.BANKRUPT, LabelMapping()) is BinaryLabel.NEGATIVE

    def test_lbo_positive_under_default_mapping(self):
        assert aggregate_label(ExitStatus.LBO, LabelMapping()) is BinaryLabel.POSITIVE

    def test_lbo_direction_is_configurable(self):
        flipped = LabelMapping(lbo=BinaryLabel.NEGATIVE)
        assert aggregate_label(ExitStatus.LBO, flipped) is BinaryLabel.NEGATIVE

    def test_total_over_all_statuses_and_mappings(self):
        for mapping in (LabelMapping(), LabelMapping(lbo=BinaryLabel.NEGATIVE)):
            table = mapping.as_dict()
            assert set(table) == set(ExitStatus)
            assert table[ExitStatus.MA] is BinaryLabel.POSITIVE
            assert table[ExitStatus.PRIVATE] is BinaryLabel.NEGATIVE

    def test_label_order(self):
        assert BinaryLabel.POSITIVE > BinaryLabel.NEGATIVE


class TestCensorFilter:
    def test_boundary_years_are_kept(self):
        record = make_company(round_years=(1996,), foundation_year=1995)
        assert censor_filter([record], 1996, 2011) == [record]

    def test_late_first_round_is_dropped(self):
        record = make_company(round_years=(2014,), foundation_year=2010)
        assert censor_filter([record], 1996, 2011) == []

    def test_empty_input(self):
        assert censor_filter([], 1996, 2011) == []

    def test_zero_round_records_are_dropped(self):
        bare = CompanyRecord(
            company_id="x", sector=1, foundation_year=2000, rounds=(), exit=ExitStatus.PRIVATE
        )
        assert censor_filter([bare], 1996, 2011) == []

    def test_order_preserved_and_input_untouched(self):
        records = [
            make_company(company_id=f"c{i}", round_years=(y,), foundation_year=y - 1)
            for i, y in enumerate([1997, 2015, 2001, 1990, 2011])
        ]
        kept = censor_filter(records, 1996, 2011)
        assert [r.company_id for r in kept] == ["c0", "c2", "c4"]
        assert len(records) == 5

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            censor_filter([], 2011, 1996)

    @given(
        years=st.lists(st.integers(min_value=1980, max_value=2030), min_size=0, max_size=30),
        lo=st.integers(min_value=1990, max_value=2010),
        span=st.integers(min_value=0, max_value=15),
    )
    def test_subset_idempotent_and_in_window(self, years, lo, span):
        hi = lo + span
        records = [
            make_company(company_id=f"c{i}", round_years=(y,), foundation_year=y)
            for i, y in enumerate(years)
        ]
        kept = censor_filter(records, lo, hi)
        assert all(r in records for r in kept)
        assert censor_filter(kept, lo, hi) == kept
        assert all(lo <= r.rounds[0].year <= hi for r in kept)


class TestRecordInvariants:
    def test_sector_range(self):
        with pytest.raises(ValueError):
            make_company(sector=0)
        with pytest.raises(ValueError):
            make_company(sector=10)

    def test_round_year_before_foundation(self):
        with pytest.raises(ValueError):
            make_company(foundation_year=2005, round_years=(2003,))

    def test_rounds_must_be_sorted(self):
        with pytest.raises(ValueError):
            make_company(round_years=(2005, 2003), investors=(("a",), ("b",)))

    def test_at_most_three_rounds(self):
        with pytest.raises(ValueError):
            make_company(
                round_years=(2001, 2002, 2003, 2004),
                investors=((), (), (), ()),
            )

    def test_round_index_range(self):
        with pytest.raises(ValueError):
            RoundRecord(round_index=4, year=2000)

    def test_negative_vix_rejected(self):
        with pytest.raises(ValueError):
            RoundRecord(round_index=1, year=2000, vix=-1.0)

    def test_nondecreasing_round_years_allowed(self):
        record = make_company(round_years=(2002, 2002), investors=(("a",), ("b",)))
        assert len(record.rounds) == 2
