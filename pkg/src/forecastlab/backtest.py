"""Expanding-window backtesting of a forecaster over the most recent history."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

from .errors import TooShort, ZeroActual
from .forecaster import AdditiveForecaster, FitConfig
from .ingest import MonthlySeries
from .metrics import ErrorPair, ZeroPolicy, mape, percentage_error

REPETITIONS = 12
HORIZON = 3
MIN_TRAIN = 24
MIN_SERIES = MIN_TRAIN + REPETITIONS + HORIZON  # 39

Forecaster = Callable[[Sequence[float], int], Sequence[float]]


class Window(NamedTuple):
    train_len: int
    test_months: tuple[int, ...]  # 1-based month numbers within the series


def make_windows(n: int) -> list[Window]:
    """End-anchored expanding windows; the last window's test ends at month ``n``."""
    if n < MIN_SERIES:
        raise TooShort(f"series of {n} months is shorter than {MIN_SERIES}")
    windows = []
    for j in range(1, REPETITIONS + 1):
        train_len = n - HORIZON - (REPETITIONS - j)
        windows.append(Window(train_len, tuple(range(train_len + 1, train_len + HORIZON + 1))))
    return windows


@dataclass(frozen=True)
class BacktestStep:
    window_index: int
    train_len: int
    monthly_forecasts: tuple[float, ...]
    monthly_actuals: tuple[float, ...]
    monthly_pes: tuple[float | None, ...]
    quarterly_pe: float | None

    def to_dict(self) -> dict:
        return {
            "window_index": self.window_index,
            "train_len": self.train_len,
            "monthly_forecasts": list(self.monthly_forecasts),
            "monthly_actuals": list(self.monthly_actuals),
            "monthly_pes": list(self.monthly_pes),
            "quarterly_pe": self.quarterly_pe,
        }


@dataclass(frozen=True)
class BacktestReport:
    item_code: str
    steps: tuple[BacktestStep, ...]
    monthly_mape: float
    quarterly_mape: float
    monthly_used: int
    monthly_skipped: int
    quarterly_used: int
    quarterly_skipped: int

    def to_dict(self) -> dict:
        return {
            "item_code": self.item_code,
            "monthly_mape": self.monthly_mape,
            "quarterly_mape": self.quarterly_mape,
            "monthly_used": self.monthly_used,
            "monthly_skipped": self.monthly_skipped,
            "quarterly_used": self.quarterly_used,
            "quarterly_skipped": self.quarterly_skipped,
            "steps": [s.to_dict() for s in self.steps],
        }


def _pe_or_none(pair: ErrorPair, zero_policy: ZeroPolicy) -> float | None:
    if pair.y_true == 0:
        if zero_policy == "error":
            raise ZeroActual("zero actual in backtest window with zero_policy='error'")
        return None
    return percentage_error(pair)


def backtest_item(
    series: MonthlySeries,
    cfg: FitConfig | None = None,
    zero_policy: ZeroPolicy = "skip",
    forecaster: Forecaster | None = None,
) -> BacktestReport:
    """Run the 12-window expanding backtest for one item.

    ``forecaster(history, horizon)`` defaults to the additive model fitted
    with ``cfg``; any callable with that signature can be injected.
    """
    forecaster = forecaster or AdditiveForecaster(cfg)
    values = [float(v) for v in series.values]
    steps = []
    monthly_pairs: list[ErrorPair] = []
    quarterly_pairs: list[ErrorPair] = []
    for index, window in enumerate(make_windows(len(values)), start=1):
        history = values[:window.train_len]
        actuals = values[window.train_len:window.train_len + HORIZON]
        forecasts = [float(f) for f in forecaster(history, HORIZON)]
        if len(forecasts) != HORIZON:
            raise ValueError(f"forecaster returned {len(forecasts)} values, expected {HORIZON}")
        pairs = [ErrorPair(f, a) for f, a in zip(forecasts, actuals)]
        quarter = ErrorPair(sum(forecasts), sum(actuals))
        monthly_pairs += pairs
        quarterly_pairs.append(quarter)
        steps.append(BacktestStep(
            window_index=index,
            train_len=window.train_len,
            monthly_forecasts=tuple(forecasts),
            monthly_actuals=tuple(actuals),
            monthly_pes=tuple(_pe_or_none(p, zero_policy) for p in pairs),
            quarterly_pe=_pe_or_none(quarter, zero_policy),
        ))

    monthly = mape(monthly_pairs, zero_policy)
    quarterly = mape(quarterly_pairs, zero_policy)
    return BacktestReport(
        item_code=series.item_code,
        steps=tuple(steps),
        monthly_mape=monthly.mape,
        quarterly_mape=quarterly.mape,
        monthly_used=monthly.used,
        monthly_skipped=monthly.skipped,
        quarterly_used=quarterly.used,
        quarterly_skipped=quarterly.skipped,
    )


def _backtest_job(args) -> BacktestReport:
    series, cfg, zero_policy = args
    return backtest_item(series, cfg, zero_policy)


def backtest_many(
    series: Iterable[MonthlySeries],
    cfg: FitConfig | None = None,
    zero_policy: ZeroPolicy = "skip",
    jobs: int = 1,
) -> list[BacktestReport]:
    """Backtest several items, returning reports sorted by item code.

    With ``jobs > 1`` items are spread over a process pool; results do not
    depend on the worker count.
    """
    ordered = sorted(series, key=lambda s: s.item_code)
    tasks = [(s, cfg, zero_policy) for s in ordered]
    if jobs <= 1 or len(tasks) <= 1:
        return [_backtest_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_backtest_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


CSV_COLUMNS = (
    "item_code", "monthly_mape", "quarterly_mape",
    "monthly_used", "monthly_skipped", "quarterly_used", "quarterly_skipped",
)


def reports_to_csv(reports: Sequence[BacktestReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([
            r.item_code, repr(r.monthly_mape), repr(r.quarterly_mape),
            r.monthly_used, r.monthly_skipped, r.quarterly_used, r.quarterly_skipped,
        ])
    return buf.getvalue()


def reports_to_json(reports: Sequence[BacktestReport]) -> list[dict]:
    return [r.to_dict() for r in reports]
