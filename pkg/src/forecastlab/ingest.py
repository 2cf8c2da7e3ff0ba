"""Transaction CSV parsing, date filtering, unit conversion and monthly aggregation."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import date
from typing import IO, Iterable, Mapping

from .errors import (
    InvalidDate,
    InvalidMultiplier,
    MalformedRow,
    MissingColumn,
    RecordAfterEnd,
)

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("item_code", "date", "quantity")
_ISO_DATE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")


@dataclass(frozen=True, order=True)
class Month:
    """A calendar year-month. Supports ``Month + int`` and ``Month - Month``."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def of(cls, d: date) -> "Month":
        return cls(d.year, d.month)

    @classmethod
    def parse(cls, text: str) -> "Month":
        m = re.fullmatch(r"(\d{4})-(\d{2})", text.strip())
        if not m:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_ordinal(cls, n: int) -> "Month":
        return cls(n // 12, n % 12 + 1)

    def __add__(self, months: int) -> "Month":
        if not isinstance(months, int):
            return NotImplemented
        return Month.from_ordinal(self.ordinal + months)

    def __sub__(self, other):
        if isinstance(other, Month):
            return self.ordinal - other.ordinal
        if isinstance(other, int):
            return Month.from_ordinal(self.ordinal - other)
        return NotImplemented

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def months_between(start: Month, end: Month) -> int:
    return end - start


@dataclass(frozen=True)
class SalesRecord:
    item_code: str
    date: date
    quantity: float
    unit_price: float | None = None

    def __post_init__(self):
        if not self.item_code:
            raise ValueError("item_code must be non-empty")
        if not math.isfinite(self.quantity):
            raise ValueError("quantity must be finite")


@dataclass(frozen=True)
class MonthlySeries:
    """Zero-filled monthly quantities for one item.

    ``values[0]`` is the quantity for ``start_month``; the series has no gaps.
    ``floored_months`` counts months whose net quantity was negative and was
    replaced by 0 during aggregation.
    """

    item_code: str
    start_month: Month
    values: tuple[float, ...]
    floored_months: int = field(default=0, compare=False)

    @property
    def end_month(self) -> Month:
        return self.start_month + (len(self.values) - 1)

    def months(self) -> list[Month]:
        return [self.start_month + i for i in range(len(self.values))]

    def __len__(self) -> int:
        return len(self.values)


def _text_stream(source: IO) -> IO[str]:
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def _parse_date(text: str, line: int) -> date:
    m = _ISO_DATE.match(text.strip())
    if not m:
        raise MalformedRow(line, f"unparseable date {text!r} (expected YYYY-MM-DD)")
    try:
        return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except ValueError as exc:
        raise InvalidDate(line, f"invalid calendar date {text!r}: {exc}") from None


def _parse_number(text: str, line: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(line, f"unparseable {name} {text!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(line, f"non-finite {name} {text!r}")
    return value


def parse_sales_csv(source: IO) -> list[SalesRecord]:
    """Parse a transaction CSV (header ``item_code,date,quantity[,unit_price]``).

    ``source`` may be a binary or text stream. Line numbers in errors are
    physical file lines, the header being line 1.
    """
    reader = csv.reader(_text_stream(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn(REQUIRED_COLUMNS[0]) from None
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise MissingColumn(col)
    i_item, i_date, i_qty = (header.index(c) for c in REQUIRED_COLUMNS)
    i_price = header.index("unit_price") if "unit_price" in header else None

    records = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        # a trailing unit_price cell may be omitted entirely
        price_omitted = i_price == len(header) - 1 and len(row) == len(header) - 1
        if len(row) != len(header) and not price_omitted:
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
        item = row[i_item].strip()
        if not item:
            raise MalformedRow(line, "empty item_code")
        when = _parse_date(row[i_date], line)
        qty = _parse_number(row[i_qty].strip(), line, "quantity")
        price = None
        if i_price is not None and not price_omitted and row[i_price].strip():
            price = _parse_number(row[i_price].strip(), line, "unit_price")
            if price < 0:
                raise MalformedRow(line, f"negative unit_price {price}")
        records.append(SalesRecord(item, when, qty, price))
    return records


def _years_before(d: date, years: int) -> date:
    try:
        return d.replace(year=d.year - years)
    except ValueError:  # 29 February
        return d.replace(year=d.year - years, day=28)


def filter_by_date(
    records: Iterable[SalesRecord], window_end: date, max_history_years: int = 6
) -> list[SalesRecord]:
    """Keep records with ``window_end - max_history_years < date <= window_end``."""
    if max_history_years < 1:
        raise ValueError("max_history_years must be >= 1")
    start = _years_before(window_end, max_history_years)
    return [r for r in records if start < r.date <= window_end]


def convert_units(
    records: Iterable[SalesRecord], conversion: Mapping[str, float]
) -> list[SalesRecord]:
    for item, mult in conversion.items():
        if not (isinstance(mult, (int, float)) and math.isfinite(mult) and mult > 0):
            raise InvalidMultiplier(f"multiplier for {item!r} must be finite and > 0, got {mult!r}")
    return [
        replace(r, quantity=r.quantity * conversion[r.item_code]) if r.item_code in conversion else r
        for r in records
    ]


def latest_month(records: Iterable[SalesRecord]) -> Month | None:
    latest = max((r.date for r in records), default=None)
    return Month.of(latest) if latest is not None else None


def aggregate_monthly(
    records: Iterable[SalesRecord], dataset_end: Month
) -> dict[str, MonthlySeries]:
    """Sum quantities per item and calendar month, zero-filling up to ``dataset_end``.

    Negative monthly nets (returns exceeding sales) are floored to 0 and
    counted on the resulting series. Items are returned sorted by code.
    """
    totals: dict[str, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    for r in records:
        m = Month.of(r.date)
        if m > dataset_end:
            raise RecordAfterEnd(
                f"record for {r.item_code!r} dated {r.date} is after dataset end {dataset_end}"
            )
        totals[r.item_code][m.ordinal] += r.quantity

    out = {}
    for item in sorted(totals):
        by_month = totals[item]
        first = min(by_month)
        values = []
        floored = 0
        for ordinal in range(first, dataset_end.ordinal + 1):
            v = by_month.get(ordinal, 0.0)
            if v < 0:
                floored += 1
                v = 0.0
            values.append(v + 0.0)
        if floored:
            log.info("%s: %d month(s) with negative net quantity floored to 0", item, floored)
        out[item] = MonthlySeries(item, Month.from_ordinal(first), tuple(values), floored)
    return out


def read_keyed_table(source: IO, value_column: str) -> dict[str, float]:
    reader = csv.reader(_text_stream(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("item_code") from None
    for col in ("item_code", value_column):
        if col not in header:
            raise MissingColumn(col)
    i_item, i_val = header.index("item_code"), header.index(value_column)
    table = {}
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(i_item, i_val):
            raise MalformedRow(reader.line_num, f"expected {len(header)} fields, got {len(row)}")
        table[row[i_item].strip()] = _parse_number(row[i_val].strip(), reader.line_num, value_column)
    return table


def read_conversion(source: IO) -> dict[str, float]:
    """Read a ``item_code,multiplier`` sidecar."""
    table = read_keyed_table(source, "multiplier")
    for item, mult in table.items():
        if mult <= 0:
            raise InvalidMultiplier(f"multiplier for {item!r} must be > 0, got {mult}")
    return table
