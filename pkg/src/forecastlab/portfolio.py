"""Product ranking, Top-N / coverage selection and horizon eligibility."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Literal, Mapping, Sequence

from .errors import InvalidCoverage, PriceDataMissing, ProfitDataMissing
from .ingest import Month, MonthlySeries, SalesRecord, read_keyed_table

Criterion = Literal["profit", "turnover", "quantity"]
CRITERIA = ("profit", "turnover", "quantity")

REFERENCE_MONTHS = 12
MIN_FORECAST_HORIZON = 24
MIN_BACKTEST_HORIZON = 39
INACTIVE_DOWNTIME = 3


class Category(str, Enum):
    INACTIVE = "Inactive"
    TOO_SHORT = "TooShortToForecast"
    FORECAST_ONLY = "ForecastOnly"
    FULLY_ELIGIBLE = "FullyEligible"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PortfolioEntry:
    item_code: str
    rank_value: float
    rank: int
    cumulative_share: float
    horizon_months: int
    downtime_months: int
    category: Category


def categorize(horizon_months: int, downtime_months: int) -> Category:
    if downtime_months >= INACTIVE_DOWNTIME:
        return Category.INACTIVE
    if horizon_months < MIN_FORECAST_HORIZON:
        return Category.TOO_SHORT
    if horizon_months < MIN_BACKTEST_HORIZON:
        return Category.FORECAST_ONLY
    return Category.FULLY_ELIGIBLE


def classify_horizon(series: MonthlySeries, dataset_end: Month) -> tuple[int, int, Category]:
    """Return ``(horizon_months, downtime_months, category)`` for a series ending at ``dataset_end``."""
    if series.end_month != dataset_end:
        raise ValueError(
            f"series {series.item_code!r} ends {series.end_month}, expected {dataset_end}"
        )
    horizon = len(series.values)
    downtime = 0
    for v in reversed(series.values):
        if v != 0:
            break
        downtime += 1
    return horizon, downtime, categorize(horizon, downtime)


def reference_window(dataset_end: Month) -> tuple[Month, Month]:
    """The 12 calendar months ending at ``dataset_end``, inclusive."""
    return dataset_end - (REFERENCE_MONTHS - 1), dataset_end


def is_active(series: MonthlySeries, dataset_end: Month) -> bool:
    """Non-zero sales in at least one of the last 12 months."""
    first, _ = reference_window(dataset_end)
    skip = max(0, first - series.start_month)
    return any(v != 0 for v in series.values[skip:])


def _rank_values(
    items: Iterable[str],
    records: Iterable[SalesRecord],
    criterion: Criterion,
    dataset_end: Month,
    margins: Mapping[str, float] | None,
) -> dict[str, float]:
    first, last = reference_window(dataset_end)
    totals = {item: 0.0 for item in items}
    for r in records:
        if r.item_code not in totals or not first <= Month.of(r.date) <= last:
            continue
        if criterion == "quantity":
            totals[r.item_code] += r.quantity
        elif criterion == "turnover":
            if r.unit_price is None:
                raise PriceDataMissing(f"record of {r.item_code!r} on {r.date} has no unit_price")
            totals[r.item_code] += r.quantity * r.unit_price
        else:
            if r.item_code not in margins:
                raise ProfitDataMissing(f"no unit_margin for {r.item_code!r}")
            totals[r.item_code] += r.quantity * margins[r.item_code]
    # net returns may exceed sales over the year; such items carry no weight
    return {item: max(0.0, v) for item, v in totals.items()}


def rank_products(
    series: Mapping[str, MonthlySeries],
    records: Iterable[SalesRecord],
    criterion: Criterion = "turnover",
    dataset_end: Month | None = None,
    margins: Mapping[str, float] | None = None,
) -> list[PortfolioEntry]:
    """Rank every item in ``series`` by its last-12-month value under ``criterion``.

    Sorted descending by value, ties by ascending item code. ``margins`` maps
    item code to margin per unit and is required for ``criterion="profit"``.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if criterion == "profit" and margins is None:
        raise ProfitDataMissing("criterion 'profit' requires a unit margin table")
    if not series:
        return []
    if dataset_end is None:
        dataset_end = max(s.end_month for s in series.values())

    values = _rank_values(series, records, criterion, dataset_end, margins)
    order = sorted(values, key=lambda item: (-values[item], item))

    running = []
    total = 0.0
    for item in order:
        total += values[item]
        running.append(total)

    entries = []
    for rank, (item, cum) in enumerate(zip(order, running), start=1):
        share = cum / total if total > 0 else rank / len(order)
        horizon, downtime, category = classify_horizon(series[item], dataset_end)
        entries.append(PortfolioEntry(item, values[item], rank, share, horizon, downtime, category))
    return entries


def select_top(
    ranked: Sequence[PortfolioEntry],
    coverage: float | None = None,
    top_n: int | None = None,
) -> list[PortfolioEntry]:
    """Smallest prefix reaching ``coverage`` of the total, or the first ``top_n`` entries."""
    if (coverage is None) == (top_n is None):
        raise ValueError("give exactly one of coverage or top_n")
    if top_n is not None:
        if top_n < 1:
            raise ValueError("top_n must be a positive integer")
        return list(ranked[:top_n])
    if not 0 < coverage <= 1:
        raise InvalidCoverage(f"coverage must be in (0, 1], got {coverage}")
    for i, entry in enumerate(ranked):
        if entry.cumulative_share >= coverage:
            return list(ranked[:i + 1])
    return list(ranked)


def read_margins(source: IO) -> dict[str, float]:
    """Read a ``item_code,unit_margin`` sidecar."""
    return read_keyed_table(source, "unit_margin")


PORTFOLIO_COLUMNS = (
    "rank", "item_code", "rank_value", "cumulative_share",
    "horizon_months", "downtime_months", "category",
)


def portfolio_to_csv(entries: Sequence[PortfolioEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PORTFOLIO_COLUMNS)
    for e in entries:
        writer.writerow([
            e.rank, e.item_code, repr(e.rank_value), repr(e.cumulative_share),
            e.horizon_months, e.downtime_months, e.category.value,
        ])
    return buf.getvalue()
