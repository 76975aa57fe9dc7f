import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exitcast.domain import ExitStatus, LabelMapping, aggregate_label
from exitcast.ingest import (
    CSV_HEADER,
    DEFAULT_SECTOR_WEIGHTS,
    IngestError,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    summarize,
    write_csv,
)

from conftest import make_company

HEADER_LINE = ",".join(CSV_HEADER)

GOOD_ROWS = [
    "c1,2,2000,IPO,2007,2002,21.5,a;b,2004,18.0,b,,,",
    "c2,6,1999,Private,,2001,25.0,,,,,,,",
    "c3,9,2005,Bankrupt,2009,2005,32.25,x;y;z,2006,30.0,x,2007,28.0,y",
]


def write_file(tmp_path, lines, name="data.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoadCSV:
    def test_well_formed(self, tmp_path):
        path = write_file(tmp_path, [HEADER_LINE] + GOOD_ROWS)
        result = load_csv(path)
        assert len(result.records) == 3
        assert result.n_rejected == 0
        first = result.records[0]
        assert first.exit is ExitStatus.IPO
        assert first.exit_year == 2007
        assert first.rounds[0].investor_ids == ("a", "b")
        assert first.rounds[1].vix == 18.0
        assert result.records[1].exit_year is None
        assert result.records[1].rounds[0].investor_ids == ()

    def test_round_before_foundation_rejected_with_row(self, tmp_path):
        bad = "c9,2,2005,IPO,,2003,20.0,a,,,,,,"
        path = write_file(tmp_path, [HEADER_LINE, GOOD_ROWS[0], bad])
        result = load_csv(path)
        assert len(result.records) == 1
        assert result.n_rejected == 1
        assert "line 3" in result.diagnostics[0]

    def test_header_only(self, tmp_path):
        path = write_file(tmp_path, [HEADER_LINE])
        result = load_csv(path)
        assert result.records == [] and result.n_rejected == 0

    def test_missing_file_is_fatal(self, tmp_path):
        with pytest.raises(IngestError):
            load_csv(tmp_path / "nope.csv")

    def test_malformed_header_is_fatal(self, tmp_path):
        path = write_file(tmp_path, ["a,b,c", GOOD_ROWS[0]])
        with pytest.raises(IngestError):
            load_csv(path)

    def test_empty_file_is_fatal(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(IngestError):
            load_csv(path)

    def test_zero_round_row_rejected(self, tmp_path):
        bare = "c4,1,2000,IPO,2005,,,,,,,,,"
        path = write_file(tmp_path, [HEADER_LINE, bare])
        result = load_csv(path)
        assert result.records == []
        assert "no rounds" in result.diagnostics[0]

    def test_round_gap_rejected(self, tmp_path):
        gap = "c5,1,2000,IPO,2005,,,,2003,20.0,a,,,"
        path = write_file(tmp_path, [HEADER_LINE, gap])
        result = load_csv(path)
        assert result.records == []
        assert result.n_rejected == 1

    def test_bad_field_count_rejected(self, tmp_path):
        path = write_file(tmp_path, [HEADER_LINE, "c6,1,2000"])
        result = load_csv(path)
        assert result.records == []
        assert "fields" in result.diagnostics[0]

    def test_unknown_status_rejected(self, tmp_path):
        row = "c7,1,2000,Unicorn,,2001,20.0,a,,,,,,"
        path = write_file(tmp_path, [HEADER_LINE, row])
        result = load_csv(path)
        assert result.records == []

    def test_missing_vix_rejected(self, tmp_path):
        row = "c8,1,2000,IPO,,2001,,a,,,,,,"
        path = write_file(tmp_path, [HEADER_LINE, row])
        result = load_csv(path)
        assert result.records == []


class TestRoundTrip:
    def test_records_to_file_and_back(self, tmp_path):
        records = [
            make_company(company_id="r1", exit=ExitStatus.MA, exit_year=2009),
            make_company(
                company_id="r2",
                sector=7,
                round_years=(2001, 2003, 2003),
                investors=(("a", "b"), (), ("c",)),
                exit=ExitStatus.LBO,
                exit_year=2010,
            ),
        ]
        path = tmp_path / "out.csv"
        write_csv(path, records)
        assert load_csv(path).records == records

    def test_canonical_form_is_stable(self, tmp_path):
        path = write_file(tmp_path, [HEADER_LINE] + GOOD_ROWS)
        records = load_csv(path).records
        canon = tmp_path / "canon.csv"
        write_csv(canon, records)
        again = tmp_path / "again.csv"
        write_csv(again, load_csv(canon).records)
        assert canon.read_bytes() == again.read_bytes()


class TestSummarize:
    def test_empty(self):
        summary = summarize([])
        assert summary.total == 0
        assert (summary.counts == 0).all()

    def test_hand_count(self):
        records = [
            make_company(company_id="a", sector=2, exit=ExitStatus.IPO),
            make_company(company_id="b", sector=2, exit=ExitStatus.IPO),
            make_company(company_id="c", sector=6, exit=ExitStatus.PRIVATE),
        ]
        summary = summarize(records)
        assert summary.cell(2, ExitStatus.IPO) == 2
        assert summary.cell(6, ExitStatus.PRIVATE) == 1
        assert summary.total == 3

    @given(st.lists(st.tuples(st.integers(1, 9), st.sampled_from(list(ExitStatus))), max_size=40))
    @settings(max_examples=40, deadline=None)
    def test_partition_law(self, pairs):
        records = [
            make_company(company_id=f"c{i}", sector=s, exit=e)
            for i, (s, e) in enumerate(pairs)
        ]
        summary = summarize(records)
        assert summary.total == len(records)
        assert summary.sector_totals.sum() == len(records)
        assert summary.status_totals.sum() == len(records)


class TestSyntheticConfig:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SyntheticConfig(n_companies=10, sector_weights=(0.5,) * 9)

    def test_coefficient_length_checked(self):
        with pytest.raises(ValueError):
            SyntheticConfig(n_companies=10, signal_coefficients=(0.0,) * 5)

    def test_n_companies_positive(self):
        with pytest.raises(ValueError):
            SyntheticConfig(n_companies=0)

    def test_year_range_ordered(self):
        with pytest.raises(ValueError):
            SyntheticConfig(n_companies=10, year_range=(2011, 1996))


class TestGenerator:
    def test_deterministic(self):
        cfg = SyntheticConfig(n_companies=300, seed=5)
        assert generate_synthetic(cfg) == generate_synthetic(cfg)

    def test_zero_signal_is_a_fair_coin(self):
        cfg = SyntheticConfig(
            n_companies=100_000, seed=1, signal_coefficients=(0.0,) * 20
        )
        records = generate_synthetic(cfg)
        mapping = LabelMapping()
        share = np.mean([int(aggregate_label(r.exit, mapping)) for r in records])
        assert abs(share - 0.5) < 0.01

    def test_sector_shares_match_weights(self):
        cfg = SyntheticConfig(n_companies=54697, seed=2)
        records = generate_synthetic(cfg)
        counts = np.bincount([r.sector for r in records], minlength=10)[1:]
        shares = counts / len(records)
        assert np.all(np.abs(shares - np.asarray(DEFAULT_SECTOR_WEIGHTS)) < 0.01)

    def test_statuses_back_fill_the_label(self, small_records):
        for r in small_records:
            assert r.exit is not ExitStatus.LBO  # back-fill never uses the buyout class
            if r.exit is ExitStatus.PRIVATE:
                assert r.exit_year is None
            else:
                assert r.exit_year is not None and r.exit_year > r.rounds[-1].year

    def test_records_are_valid_and_in_window(self, small_records):
        for r in small_records:
            assert 1 <= len(r.rounds) <= 3
            assert 1996 <= r.foundation_year <= 2011
            assert r.rounds[0].year >= r.foundation_year
            for rnd in r.rounds:
                assert 9.0 <= rnd.vix <= 80.0

    def test_round_trip_through_csv(self, tmp_path, small_records):
        path = tmp_path / "synth.csv"
        write_csv(path, small_records[:100])
        assert load_csv(path).records == small_records[:100]
