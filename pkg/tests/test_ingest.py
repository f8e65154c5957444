"""Parser, categorical expansion, factor loading, and generator tests."""

import io
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from munifolio.ingest import (
    ColumnSchema,
    SchemaError,
    SynthSpec,
    TransactionRecord,
    expand_categoricals,
    load_centroids,
    load_factor_csv,
    parse_transactions,
    synth_generate,
    synth_schema,
    write_factor_csv,
    write_transactions_csv,
)

SIMPLE_SCHEMA = ColumnSchema(attributes={"rooms": "numeric", "use": "categorical"})


def csv_stream(*rows):
    return io.StringIO("\n".join(rows) + "\n")


# ----------------------------------------------------------------------
# parse_transactions
# ----------------------------------------------------------------------


class TestParseTransactions:
    def test_basic_row(self):
        stream = csv_stream(
            "area_code,year,trade_price,unit_area,rooms,use",
            "13101,2010,50000000,50,3,Residential",
        )
        records = parse_transactions(stream, SIMPLE_SCHEMA)
        assert len(records) == 1
        r = records[0]
        assert r.area_code == "13101"
        assert r.trade_price == 50_000_000
        assert r.log_price_per_area == pytest.approx(math.log(1_000_000), abs=1e-9)
        assert r.attributes == {"rooms": 3.0, "use": "Residential"}

    def test_comma_grouped_price(self):
        stream = csv_stream(
            "area_code,year,trade_price,unit_area,rooms,use",
            '13101,2010,"50,000,000",50,3,Residential',
        )
        records = parse_transactions(stream, SIMPLE_SCHEMA)
        assert records[0].trade_price == 50_000_000
        assert records[0].log_price_per_area == pytest.approx(13.8155, abs=5e-5)

    def test_missing_price_rejected_with_reason(self):
        stream = csv_stream(
            "area_code,year,trade_price,unit_area,rooms,use",
            "13101,2010,,50,3,Residential",
        )
        tally = Counter()
        records = parse_transactions(stream, SIMPLE_SCHEMA, tally=tally)
        assert records == []
        assert tally["missing price"] == 1

    def test_malformed_header_fatal(self):
        stream = csv_stream("nope,year", "1,2")
        with pytest.raises(SchemaError, match="missing required"):
            parse_transactions(stream, SIMPLE_SCHEMA)

    def test_corruption_count_matches(self):
        header = "area_code,year,trade_price,unit_area,rooms,use"
        good = ["13101,2010,1000000,50,2,Residential"] * 997
        bad = [
            "13101,2010,-5,50,2,Residential",  # non-positive price
            "13101,zzz,1000000,50,2,Residential",  # bad year
            "13101,2010,1000000,,2,Residential",  # missing area
        ]
        tally = Counter()
        records = parse_transactions(csv_stream(header, *good, *bad), SIMPLE_SCHEMA, tally=tally)
        assert len(records) == 997
        assert sum(tally.values()) == 3

    @given(
        st.lists(
            st.tuples(
                st.text(alphabet="0123456789abc,-. ", max_size=12),
                st.text(alphabet="0123456789-", max_size=6),
                st.text(alphabet="0123456789.-,", max_size=12),
                st.text(alphabet="0123456789.-", max_size=8),
            ),
            max_size=30,
        )
    )
    @settings(max_examples=80, deadline=None)
    def test_fuzzed_rows_never_violate_invariants(self, rows):
        body = ["area_code,year,trade_price,unit_area,rooms,use"]
        body += [",".join([a, y, p, u, "1", "x"]) for a, y, p, u in rows]
        try:
            records = parse_transactions(io.StringIO("\n".join(body) + "\n"), SIMPLE_SCHEMA)
        except SchemaError:
            return
        for r in records:
            assert r.trade_price > 0
            assert r.unit_area > 0
            assert r.year >= 2005
            assert len(r.area_code) >= 5


# ----------------------------------------------------------------------
# expand_categoricals
# ----------------------------------------------------------------------


def make_record(area="13101", year=2010, price=1e6, unit=50.0, **attrs):
    return TransactionRecord(area_code=area, year=year, trade_price=price, unit_area=unit, attributes=attrs)


class TestExpandCategoricals:
    def test_multi_valued_cell_sets_both_indicators(self):
        records = [
            make_record(use="Residential, Commercial", rooms=2.0),
            make_record(use="Residential", rooms=3.0),
            make_record(use="Commercial", rooms=1.0),
        ]
        frame = expand_categoricals(records)
        i_res = frame.columns.index("use=Residential")
        i_com = frame.columns.index("use=Commercial")
        assert frame.matrix[0, i_res] == 1.0
        assert frame.matrix[0, i_com] == 1.0
        assert frame.matrix[1, i_com] == 0.0

    def test_ideographic_comma_split(self):
        records = [
            make_record(use="A、B"),
            make_record(use="A"),
            make_record(use="B"),
        ]
        frame = expand_categoricals(records)
        assert "use=A" in frame.columns and "use=B" in frame.columns
        assert frame.matrix[0].sum() == 2.0

    def test_missing_gets_dedicated_indicator(self):
        records = [make_record(use=None), make_record(use="A"), make_record(use="B")]
        frame = expand_categoricals(records)
        i_missing = frame.columns.index("use=<missing>")
        assert frame.matrix[0, i_missing] == 1.0
        assert frame.matrix[1, i_missing] == 0.0

    def test_numeric_median_imputation(self):
        records = [make_record(rooms=1.0, use="A"), make_record(rooms=None, use="B"), make_record(rooms=5.0, use="A")]
        frame = expand_categoricals(records)
        i_rooms = frame.columns.index("rooms")
        assert frame.matrix[1, i_rooms] == 3.0  # median of 1, 5

    def test_constant_column_dropped(self):
        records = [make_record(use="OnlyLevel", rooms=float(i)) for i in range(4)]
        tally = Counter()
        frame = expand_categoricals(records, tally=tally)
        assert "use=OnlyLevel" not in frame.columns
        assert "use=OnlyLevel" in frame.dropped_columns
        assert tally["zero-variance column"] == 1

    def test_no_missing_entries_and_no_zero_variance(self):
        spec = SynthSpec(n_areas=1, year_start=2006, year_end=2009, tx_per_area_year=80, sigma=0.1, seed=5)
        records = synth_generate(spec).transactions
        frame = expand_categoricals(records)
        assert np.isfinite(frame.matrix).all()
        assert (frame.matrix.var(axis=0) > 0).all()

    def test_column_cap_enforced(self):
        rng = np.random.default_rng(0)
        records = [
            make_record(use=f"Level{rng.integers(0, 40)}", rooms=float(rng.normal()))
            for _ in range(300)
        ]
        frame = expand_categoricals(records, max_columns=10)
        assert frame.matrix.shape[1] <= 10

    def test_response_is_log_price_per_area(self):
        records = [make_record(price=50_000_000, unit=50.0, use="A"), make_record(use="B")]
        frame = expand_categoricals(records)
        assert frame.response[0] == pytest.approx(math.log(1_000_000))

    def test_mixed_municipalities_rejected(self):
        with pytest.raises(ValueError, match="several municipalities"):
            expand_categoricals([make_record(area="13101"), make_record(area="13102")])


# ----------------------------------------------------------------------
# load_factor_csv
# ----------------------------------------------------------------------


class TestFactorCsv:
    def test_unknown_schema_fatal(self):
        with pytest.raises(SchemaError, match="unknown factor schema"):
            load_factor_csv(csv_stream("year,area_code,value", "2010,13101,5"), "nope")

    def test_duplicate_key_fatal(self):
        stream = csv_stream("year,area_code,population", "2010,13101,5", "2010,13101,6")
        with pytest.raises(SchemaError, match="duplicate"):
            load_factor_csv(stream, "population")

    def test_empty_file_warns(self):
        tally = Counter()
        panel = load_factor_csv(csv_stream("year,area_code,population"), "population", tally=tally)
        assert len(panel) == 0
        assert tally["empty factor file"] == 1

    def test_generic_value_column_accepted(self):
        panel = load_factor_csv(csv_stream("year,area_code,value", "2010,13101,42"), "population")
        assert panel.get("13101", 2010) == 42.0

    def test_round_trip(self, tmp_path):
        spec = SynthSpec(n_areas=3, year_start=2006, year_end=2010, tx_per_area_year=1, sigma=0.0, seed=2)
        panels = synth_generate(spec).factor_panels
        for schema_id, panel in panels.items():
            path = tmp_path / f"{schema_id}.csv"
            write_factor_csv(panel, schema_id, path)
            again = load_factor_csv(path, schema_id)
            assert again.data == panel.data
            assert again.kind == panel.kind


# ----------------------------------------------------------------------
# synth_generate
# ----------------------------------------------------------------------


class TestSynthGenerate:
    def test_noiseless_two_years_recovers_ratio(self):
        spec = SynthSpec(n_areas=2, year_start=2006, year_end=2007, tx_per_area_year=60, sigma=0.0, seed=9)
        data = synth_generate(spec)
        for area in data.true_index.areas():
            base = data.true_index.get(area, 2007)
            assert base == pytest.approx(100.0)
            gamma0 = data.true_gamma[(area, 2006)]
            gamma1 = data.true_gamma[(area, 2007)]
            expected = 100.0 * math.exp(gamma0 - gamma1)
            assert data.true_index.get(area, 2006) == pytest.approx(expected, rel=1e-12)

    def test_deterministic_under_seed(self, tmp_path):
        spec = SynthSpec(n_areas=2, year_start=2006, year_end=2008, tx_per_area_year=20, sigma=0.1, seed=7)
        a, b = synth_generate(spec), synth_generate(spec)
        path_a, path_b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_transactions_csv(a.transactions, path_a)
        write_transactions_csv(b.transactions, path_b)
        assert path_a.read_bytes() == path_b.read_bytes()
        assert a.true_index.data == b.true_index.data
        assert a.centroids == b.centroids

    def test_transactions_parse_back(self, tmp_path):
        spec = SynthSpec(n_areas=2, year_start=2006, year_end=2008, tx_per_area_year=30, sigma=0.1, seed=4)
        data = synth_generate(spec)
        path = tmp_path / "tx.csv"
        write_transactions_csv(data.transactions, path)
        tally = Counter()
        records = parse_transactions(path, synth_schema(), tally=tally)
        assert len(records) == len(data.transactions)
        assert sum(tally.values()) == 0
        # attribute payloads survive the round trip
        assert records[0].attributes["use"] == data.transactions[0].attributes["use"]
        assert records[0].log_price_per_area == pytest.approx(
            data.transactions[0].log_price_per_area, abs=1e-12
        )

    def test_factor_panels_cover_all_areas_and_years(self):
        spec = SynthSpec(n_areas=4, year_start=2006, year_end=2012, tx_per_area_year=1, sigma=0.0, seed=3)
        data = synth_generate(spec)
        years = set(range(2006, 2013))
        for schema_id in ("population", "in_migration", "out_migration", "taxable_income", "taxpayers", "new_starts"):
            panel = data.factor_panels[schema_id]
            assert set(panel.years()) == years
            assert len(panel.areas()) == 4
        # dwelling stock only on survey years
        stock_years = set(data.factor_panels["dwelling_stock"].years())
        assert stock_years == {y for y in years if y % 5 == 3}

    def test_centroids_round_trip(self, tmp_path):
        from munifolio.ingest import write_centroids

        spec = SynthSpec(n_areas=3, year_start=2006, year_end=2007, tx_per_area_year=1, sigma=0.0, seed=1)
        data = synth_generate(spec)
        path = tmp_path / "centroids.csv"
        write_centroids(data.centroids, path)
        assert load_centroids(path) == data.centroids
