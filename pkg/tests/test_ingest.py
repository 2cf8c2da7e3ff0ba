import io
import math
from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TABLE1
from forecastlab.errors import (
    InvalidDate,
    InvalidMultiplier,
    MalformedRow,
    MissingColumn,
    RecordAfterEnd,
)
from forecastlab.ingest import (
    Month,
    SalesRecord,
    aggregate_monthly,
    convert_units,
    filter_by_date,
    latest_month,
    months_between,
    parse_sales_csv,
    read_conversion,
)


def parse(text: str):
    return parse_sales_csv(io.BytesIO(text.encode()))


class TestMonth:
    def test_arithmetic(self):
        assert Month(2019, 12) + 1 == Month(2020, 1)
        assert Month(2020, 1) - 1 == Month(2019, 12)
        assert Month(2020, 3) - Month(2019, 12) == 3
        assert months_between(Month(2010, 1), Month(2010, 1)) == 0

    def test_parse_and_str(self):
        assert Month.parse("2010-01") == Month(2010, 1)
        assert str(Month(2010, 1)) == "2010-01"
        with pytest.raises(ValueError):
            Month.parse("2010-1-01")
        with pytest.raises(ValueError):
            Month(2010, 13)


class TestParse:
    def test_table1_row(self):
        records = parse(TABLE1)
        assert records[0] == SalesRecord("501001000001", date(2010, 1, 2), 399, 1.33)
        assert [r.quantity for r in records] == [399, 812, 516]

    def test_header_only(self):
        assert parse("item_code,date,quantity,unit_price\n") == []

    def test_price_column_optional(self):
        records = parse("item_code,date,quantity\nA,2010-01-02,5\n")
        assert records == [SalesRecord("A", date(2010, 1, 2), 5.0, None)]

    def test_empty_price_cell_and_omitted_cell(self):
        records = parse("item_code,date,quantity,unit_price\nA,2010-01-02,5,\nB,2010-01-03,6\n")
        assert [r.unit_price for r in records] == [None, None]

    def test_text_stream_accepted(self):
        assert len(parse_sales_csv(io.StringIO(TABLE1))) == 3

    def test_negative_quantity_is_a_return(self):
        (r,) = parse("item_code,date,quantity\nA,2010-01-02,-3\n")
        assert r.quantity == -3

    def test_missing_column(self):
        with pytest.raises(MissingColumn) as err:
            parse("item_code,quantity\nA,5\n")
        assert err.value.column == "date"

    def test_impossible_date_names_line(self):
        with pytest.raises(InvalidDate) as err:
            parse("item_code,date,quantity\nA,2010-01-02,1\nA,2010-13-01,2\n")
        assert err.value.line == 3
        assert "line 3" in str(err.value)

    @pytest.mark.parametrize("bad", ["02/01/2010", "2010-1-2", "yesterday"])
    def test_non_iso_date_is_malformed(self, bad):
        with pytest.raises(MalformedRow) as err:
            parse(f"item_code,date,quantity\nA,{bad},1\n")
        assert not isinstance(err.value, InvalidDate)
        assert err.value.line == 2

    @pytest.mark.parametrize("qty", ["abc", "nan", "inf", ""])
    def test_bad_quantity(self, qty):
        with pytest.raises(MalformedRow):
            parse(f"item_code,date,quantity\nA,2010-01-02,{qty}\n")

    def test_empty_item_code(self):
        with pytest.raises(MalformedRow):
            parse("item_code,date,quantity\n ,2010-01-02,1\n")


def _records_between(first: date, last: date, step_days: int = 20):
    out, d = [], first
    while d <= last:
        out.append(SalesRecord("A", d, 1.0))
        d += timedelta(days=step_days)
    return out


class TestFilter:
    def test_six_year_window(self):
        records = _records_between(date(2010, 1, 1), date(2019, 12, 31), step_days=3)
        kept = filter_by_date(records, date(2019, 12, 31), 6)
        # brute-force boundary check on every record
        boundary = date(2013, 12, 31)
        assert kept == [r for r in records if boundary < r.date <= date(2019, 12, 31)]
        assert kept and min(r.date for r in kept) > boundary
        assert len(kept) < len(records)

    def test_boundary_is_exclusive_at_start_inclusive_at_end(self):
        records = [SalesRecord("A", date(2013, 12, 31), 1), SalesRecord("A", date(2014, 1, 1), 1),
                   SalesRecord("A", date(2019, 12, 31), 1), SalesRecord("A", date(2020, 1, 1), 1)]
        kept = filter_by_date(records, date(2019, 12, 31), 6)
        assert [r.date for r in kept] == [date(2014, 1, 1), date(2019, 12, 31)]

    def test_identity_when_inside(self):
        records = _records_between(date(2019, 1, 1), date(2019, 12, 1))
        assert filter_by_date(records, date(2019, 12, 31), 6) == records

    def test_empty(self):
        assert filter_by_date([], date(2019, 12, 31)) == []

    def test_leap_day_window_end(self):
        kept = filter_by_date([SalesRecord("A", date(2014, 2, 28), 1)], date(2020, 2, 29), 6)
        assert kept == []

    def test_rejects_zero_years(self):
        with pytest.raises(ValueError):
            filter_by_date([], date(2019, 1, 1), 0)

    @given(
        st.lists(st.dates(date(2005, 1, 1), date(2021, 1, 1)), max_size=40),
        st.dates(date(2010, 1, 1), date(2020, 12, 31)),
        st.integers(1, 8),
    )
    def test_idempotent(self, dates, end, years):
        records = [SalesRecord("A", d, 1.0) for d in dates]
        once = filter_by_date(records, end, years)
        assert filter_by_date(once, end, years) == once


class TestConvert:
    def test_empty_map_is_identity(self):
        records = parse(TABLE1)
        assert convert_units(records, {}) == records

    def test_multiplier(self):
        (r,) = convert_units([SalesRecord("P", date(2010, 1, 1), 2, 5.0)], {"P": 100})
        assert r.quantity == 200
        assert r.unit_price == 5.0 and r.item_code == "P" and r.date == date(2010, 1, 1)

    def test_other_items_untouched(self):
        records = [SalesRecord("P", date(2010, 1, 1), 2), SalesRecord("Q", date(2010, 1, 1), 3)]
        assert [r.quantity for r in convert_units(records, {"P": 10})] == [20, 3]

    @pytest.mark.parametrize("bad", [-1, 0, math.inf, math.nan])
    def test_invalid_multiplier(self, bad):
        with pytest.raises(InvalidMultiplier):
            convert_units([], {"P": bad})

    def test_read_conversion_sidecar(self):
        table = read_conversion(io.StringIO("item_code,multiplier\nP,100\nQ,0.5\n"))
        assert table == {"P": 100.0, "Q": 0.5}
        with pytest.raises(InvalidMultiplier):
            read_conversion(io.StringIO("item_code,multiplier\nP,-2\n"))


class TestAggregate:
    def test_table1_january_total(self):
        series = aggregate_monthly(parse(TABLE1), Month(2010, 1))
        s = series["501001000001"]
        assert s.start_month == Month(2010, 1)
        assert s.values == (1727.0,)

    def test_zero_fill(self):
        records = [SalesRecord("A", date(2019, 1, 5), 4), SalesRecord("A", date(2019, 3, 9), 7)]
        s = aggregate_monthly(records, Month(2019, 3))["A"]
        assert s.values == (4.0, 0.0, 7.0)

    def test_trailing_zero_months_up_to_dataset_end(self):
        records = [SalesRecord("A", date(2019, 1, 5), 4)]
        assert aggregate_monthly(records, Month(2019, 4))["A"].values == (4.0, 0.0, 0.0, 0.0)

    def test_negative_net_is_floored(self):
        records = [SalesRecord("A", date(2019, 1, 5), 5), SalesRecord("A", date(2019, 1, 6), -8)]
        s = aggregate_monthly(records, Month(2019, 1))["A"]
        assert s.values == (0.0,)
        assert s.floored_months == 1

    def test_record_after_end(self):
        with pytest.raises(RecordAfterEnd):
            aggregate_monthly([SalesRecord("A", date(2019, 5, 1), 1)], Month(2019, 4))

    def test_items_sorted(self):
        records = [SalesRecord(c, date(2019, 1, 1), 1) for c in ("b", "a", "c")]
        assert list(aggregate_monthly(records, Month(2019, 1))) == ["a", "b", "c"]

    def test_latest_month(self):
        assert latest_month(parse(TABLE1)) == Month(2010, 1)
        assert latest_month([]) is None


record_strategy = st.builds(
    SalesRecord,
    item_code=st.sampled_from(["A", "B", "C"]),
    date=st.dates(date(2015, 1, 1), date(2019, 12, 31)),
    quantity=st.floats(0, 1e4, allow_nan=False),
)


@settings(max_examples=60)
@given(st.lists(record_strategy, max_size=60))
def test_conservation_and_contiguity(records):
    end = Month(2019, 12)
    series = aggregate_monthly(records, end)
    for item, s in series.items():
        assert len(s.values) == months_between(s.start_month, end) + 1
        assert s.start_month == min(Month.of(r.date) for r in records if r.item_code == item)
        assert all(v >= 0 for v in s.values)
        raw = math.fsum(r.quantity for r in records if r.item_code == item)
        assert math.isclose(math.fsum(s.values), raw, rel_tol=1e-9, abs_tol=1e-9)


@given(st.lists(st.tuples(st.integers(0, 47), st.floats(0, 1e5, allow_nan=False)), unique_by=lambda t: t[0]))
def test_aggregating_monthly_totals_is_idempotent(month_values):
    start = Month(2016, 1)
    records = [
        SalesRecord("A", date((start + i).year, (start + i).month, 1), v) for i, v in month_values
    ]
    if not records:
        return
    s = aggregate_monthly(records, start + 47)["A"]
    offset = min(i for i, _ in month_values)
    for i, v in month_values:
        assert s.values[i - offset] == v
