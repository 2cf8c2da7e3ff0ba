"""MAPE binning and portfolio-level classification summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Literal, NamedTuple

from .backtest import BacktestReport
from .errors import MissingReport, NegativeMape, UnexpectedReport
from .portfolio import Category, PortfolioEntry


class MapeBin(str, Enum):
    B1 = "B1"  # mape <= 15
    B2 = "B2"  # 15 < mape <= 30
    B3 = "B3"  # 30 < mape <= 50
    B4 = "B4"  # mape > 50

    @property
    def label(self) -> str:
        return BIN_LABELS[self]

    def __str__(self) -> str:
        return self.value


BIN_LABELS = {
    MapeBin.B1: "MAPE <= 15%",
    MapeBin.B2: "15% < MAPE <= 30%",
    MapeBin.B3: "30% < MAPE <= 50%",
    MapeBin.B4: "MAPE > 50%",
}


def bin_by_mape(mape_percent: float) -> MapeBin:
    if math.isnan(mape_percent) or mape_percent < 0:
        raise NegativeMape(f"MAPE must be a non-negative number, got {mape_percent}")
    if mape_percent <= 15:
        return MapeBin.B1
    if mape_percent <= 30:
        return MapeBin.B2
    if mape_percent <= 50:
        return MapeBin.B3
    return MapeBin.B4


class ItemClassification(NamedTuple):
    item_code: str
    monthly_mape: float
    quarterly_mape: float
    monthly_bin: MapeBin
    quarterly_bin: MapeBin


@dataclass(frozen=True)
class ClassificationReport:
    horizon_counts: dict[Category, int]
    monthly_bin_counts: dict[MapeBin, int]
    quarterly_bin_counts: dict[MapeBin, int]
    per_item: tuple[ItemClassification, ...]

    def share_below(self, threshold: float, which: Literal["monthly", "quarterly"]) -> float:
        """Fraction of backtested items whose MAPE is strictly below ``threshold``."""
        if not self.per_item:
            return 0.0
        attr = f"{which}_mape"
        hits = sum(1 for row in self.per_item if getattr(row, attr) < threshold)
        return hits / len(self.per_item)

    def to_dict(self) -> dict:
        return {
            "portfolio_size": sum(self.horizon_counts.values()),
            "horizon_counts": {c.value: n for c, n in self.horizon_counts.items()},
            "monthly_bin_counts": {b.value: n for b, n in self.monthly_bin_counts.items()},
            "quarterly_bin_counts": {b.value: n for b, n in self.quarterly_bin_counts.items()},
            "bin_labels": {b.value: b.label for b in MapeBin},
            "per_item": [
                {
                    "item_code": row.item_code,
                    "monthly_mape": row.monthly_mape,
                    "quarterly_mape": row.quarterly_mape,
                    "monthly_bin": row.monthly_bin.value,
                    "quarterly_bin": row.quarterly_bin.value,
                }
                for row in self.per_item
            ],
        }


def summarize_portfolio(
    entries: Iterable[PortfolioEntry], reports: Iterable[BacktestReport]
) -> ClassificationReport:
    """Count items per horizon category and per MAPE bin.

    Every FullyEligible entry needs exactly one report and no other entry may
    have one.
    """
    entries = list(entries)
    by_item: dict[str, BacktestReport] = {}
    for r in reports:
        if r.item_code in by_item:
            raise UnexpectedReport(f"duplicate report for {r.item_code!r}")
        by_item[r.item_code] = r

    horizon_counts = {c: 0 for c in Category}
    eligible = []
    for e in entries:
        horizon_counts[e.category] += 1
        if e.category is Category.FULLY_ELIGIBLE:
            if e.item_code not in by_item:
                raise MissingReport(f"no backtest report for eligible item {e.item_code!r}")
            eligible.append(e.item_code)
        elif e.item_code in by_item:
            raise UnexpectedReport(f"report given for {e.category.value} item {e.item_code!r}")
    stray = set(by_item) - {e.item_code for e in entries}
    if stray:
        raise UnexpectedReport(f"reports for items outside the portfolio: {sorted(stray)}")

    monthly_counts = {b: 0 for b in MapeBin}
    quarterly_counts = {b: 0 for b in MapeBin}
    per_item = []
    for item in sorted(eligible):
        r = by_item[item]
        row = ItemClassification(
            item, r.monthly_mape, r.quarterly_mape,
            bin_by_mape(r.monthly_mape), bin_by_mape(r.quarterly_mape),
        )
        monthly_counts[row.monthly_bin] += 1
        quarterly_counts[row.quarterly_bin] += 1
        per_item.append(row)
    return ClassificationReport(horizon_counts, monthly_counts, quarterly_counts, tuple(per_item))


def histogram_csv(counts: dict) -> str:
    """``bin,count`` table for external plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin", "count"])
    for key, n in counts.items():
        writer.writerow([key.value, n])
    return buf.getvalue()
