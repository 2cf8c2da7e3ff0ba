"""Command-line entry point: ``forecastlab {ingest,backtest,run,forecast}``.

Stages hand off through files in the output directory:

* ``ingest`` writes ``series.json`` and ``ingest_summary.json``.
* ``backtest`` reads ``series.json`` (and the raw CSV for ranking) and writes
  the ranked portfolio, backtest reports, classification summary and
  histograms.
* ``forecast`` reads ``series.json`` and writes ``forecast_<item>.csv``.

Every stage records its outputs with SHA-256 digests in ``manifest.json``.

Exit codes: 0 ok, 1 usage, 2 I/O or parse failure, 3 empty eligible
portfolio, 4 unknown item, 5 insufficient history.
"""

from __future__ import annotations

import argparse
import calendar
import csv
import hashlib
import io
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import __version__
from .backtest import backtest_many, reports_to_csv, reports_to_json
from .classify import histogram_csv, summarize_portfolio
from .errors import ForecastLabError, TooShortToFit
from .forecaster import AdditiveModel, FitConfig, fit_additive_model, predict
from .ingest import (
    Month,
    MonthlySeries,
    aggregate_monthly,
    convert_units,
    filter_by_date,
    latest_month,
    parse_sales_csv,
    read_conversion,
)
from .metrics import ZERO_POLICIES
from .portfolio import (
    CRITERIA,
    Category,
    is_active,
    portfolio_to_csv,
    rank_products,
    read_margins,
    select_top,
)

log = logging.getLogger("forecastlab")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_EMPTY, EXIT_UNKNOWN_ITEM, EXIT_SHORT = 0, 1, 2, 3, 4, 5

SERIES_FILE = "series.json"
MANIFEST_FILE = "manifest.json"


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    input_path: Path | None = None
    output_dir: Path = Path("out")
    dataset_end: Month | None = None
    max_history_years: int = 6
    conversion_path: Path | None = None
    margins_path: Path | None = None
    drop_partial_month: bool = False
    criterion: str = "turnover"
    coverage: float | None = 0.9
    top_n: int | None = None
    fit: FitConfig = field(default_factory=FitConfig)
    zero_policy: str = "skip"
    jobs: int = 1


# --- file helpers -----------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out_dir: Path, name: str, text: str, written: dict[str, str]) -> None:
    data = text.encode("utf-8")
    (out_dir / name).write_bytes(data)
    written[name] = hashlib.sha256(data).hexdigest()


def _update_manifest(out_dir: Path, written: dict[str, str]) -> None:
    path = out_dir / MANIFEST_FILE
    files = {}
    if path.exists():
        files = json.loads(path.read_text(encoding="utf-8")).get("files", {})
    files.update(written)
    path.write_text(_dump_json({"files": dict(sorted(files.items()))}), encoding="utf-8")


def _open_input(path: Path | None, what: str):
    if path is None:
        raise UsageError(f"{what} path is required")
    try:
        return open(path, "rb")
    except OSError as exc:
        raise StageError(f"cannot open {what} {path}: {exc.strerror}", EXIT_IO) from None


def _month_end(m: Month) -> date:
    return date(m.year, m.month, calendar.monthrange(m.year, m.month)[1])


def series_to_json(series: dict[str, MonthlySeries], dataset_end: Month) -> dict:
    return {
        "dataset_end": str(dataset_end),
        "items": {
            item: {
                "start_month": str(s.start_month),
                "values": list(s.values),
                "floored_months": s.floored_months,
            }
            for item, s in sorted(series.items())
        },
    }


def series_from_json(doc: dict) -> tuple[dict[str, MonthlySeries], Month]:
    series = {
        item: MonthlySeries(
            item,
            Month.parse(d["start_month"]),
            tuple(float(v) for v in d["values"]),
            int(d.get("floored_months", 0)),
        )
        for item, d in doc["items"].items()
    }
    return series, Month.parse(doc["dataset_end"])


def _load_series(cfg: RunConfig) -> tuple[dict[str, MonthlySeries], Month]:
    path = cfg.output_dir / SERIES_FILE
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return series_from_json(doc)
    except OSError as exc:
        raise StageError(f"cannot read {path}: {exc.strerror}; run 'ingest' first", EXIT_IO) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise StageError(f"malformed {path}: {exc}", EXIT_IO) from None


def _read_records(cfg: RunConfig):
    with _open_input(cfg.input_path, "input") as fh:
        return parse_sales_csv(fh)


def _read_conversion(cfg: RunConfig) -> dict[str, float]:
    if cfg.conversion_path is None:
        return {}
    with _open_input(cfg.conversion_path, "conversion table") as fh:
        return read_conversion(fh)


def _resolve_dataset_end(cfg: RunConfig, records) -> Month:
    end = cfg.dataset_end or latest_month(records)
    if end is None:
        raise StageError(f"{cfg.input_path} contains no records and no --dataset-end was given", EXIT_IO)
    if cfg.drop_partial_month:
        end = end - 1
    return end


# --- stages -----------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> int:
    records = _read_records(cfg)
    conversion = _read_conversion(cfg)
    dataset_end = _resolve_dataset_end(cfg, records)
    filtered = filter_by_date(records, _month_end(dataset_end), cfg.max_history_years)
    series = aggregate_monthly(convert_units(filtered, conversion), dataset_end)

    summary = {
        "records_read": len(records),
        "records_used": len(filtered),
        "items": len(series),
        "active_items": sum(is_active(s, dataset_end) for s in series.values()),
        "floored_months": sum(s.floored_months for s in series.values()),
        "dataset_end": str(dataset_end),
        "max_history_years": cfg.max_history_years,
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, str] = {}
    _write(cfg.output_dir, SERIES_FILE, _dump_json(series_to_json(series, dataset_end)), written)
    _write(cfg.output_dir, "ingest_summary.json", _dump_json(summary), written)
    _update_manifest(cfg.output_dir, written)
    print(
        f"ingested {summary['records_used']}/{summary['records_read']} records: "
        f"{summary['items']} items ({summary['active_items']} active), dataset end {dataset_end}"
    )
    return EXIT_OK


def cmd_backtest(cfg: RunConfig) -> int:
    series, dataset_end = _load_series(cfg)
    records = filter_by_date(_read_records(cfg), _month_end(dataset_end), cfg.max_history_years)
    margins = None
    if cfg.criterion == "profit" and cfg.margins_path is not None:
        with _open_input(cfg.margins_path, "margin table") as fh:
            margins = read_margins(fh)
    if cfg.criterion == "quantity":
        records = convert_units(records, _read_conversion(cfg))

    ranked = rank_products(series, records, cfg.criterion, dataset_end, margins)
    selected = select_top(ranked, coverage=cfg.coverage if cfg.top_n is None else None, top_n=cfg.top_n)
    eligible = [series[e.item_code] for e in selected if e.category is Category.FULLY_ELIGIBLE]
    reports = backtest_many(eligible, cfg.fit, cfg.zero_policy, jobs=cfg.jobs)
    summary = summarize_portfolio(selected, reports)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, str] = {}
    out = cfg.output_dir
    _write(out, "ranking.csv", portfolio_to_csv(ranked), written)
    _write(out, "portfolio.csv", portfolio_to_csv(selected), written)
    _write(out, "backtest.json", _dump_json(reports_to_json(reports)), written)
    _write(out, "backtest.csv", reports_to_csv(reports), written)
    _write(out, "classification.json", _dump_json(summary.to_dict()), written)
    _write(out, "histogram_monthly.csv", histogram_csv(summary.monthly_bin_counts), written)
    _write(out, "histogram_quarterly.csv", histogram_csv(summary.quarterly_bin_counts), written)
    _update_manifest(out, written)

    share = selected[-1].cumulative_share if selected else 0.0
    print(f"portfolio: {len(selected)} of {len(ranked)} items, cumulative share {share:.4f}")
    for category, n in summary.horizon_counts.items():
        print(f"  {category.value:<20} {n}")
    if not reports:
        print("no FullyEligible item in the selected portfolio", file=sys.stderr)
        return EXIT_EMPTY
    for label, counts in (("monthly", summary.monthly_bin_counts), ("quarterly", summary.quarterly_bin_counts)):
        dist = ", ".join(f"{b.label}: {n}" for b, n in counts.items())
        print(f"{label} MAPE bins ({len(reports)} items): {dist}")
    return EXIT_OK


def _safe_name(item: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", item)


def cmd_forecast(cfg: RunConfig, item_code: str, horizon: int) -> int:
    series, _ = _load_series(cfg)
    if item_code not in series:
        raise StageError(f"unknown item {item_code!r}", EXIT_UNKNOWN_ITEM)
    s = series[item_code]
    try:
        model = fit_additive_model(s.values, cfg.fit)
    except TooShortToFit as exc:
        raise StageError(f"{item_code}: {exc}", EXIT_SHORT) from None
    forecasts = predict(model, horizon)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["month", "value", "forecast"])
    for month, value in zip(s.months(), s.values):
        writer.writerow([str(month), repr(value), ""])
    for h, value in enumerate(forecasts, start=1):
        writer.writerow([str(s.end_month + h), "", repr(value)])

    written: dict[str, str] = {}
    name = _safe_name(item_code)
    _write(cfg.output_dir, f"forecast_{name}.csv", buf.getvalue(), written)
    _write(cfg.output_dir, f"model_{name}.json", model.to_json() + "\n", written)
    _update_manifest(cfg.output_dir, written)
    print(f"{item_code}: " + ", ".join(f"{s.end_month + h} {v:.2f}" for h, v in enumerate(forecasts, 1)))
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _month_arg(text: str) -> Month:
    try:
        return Month.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _coverage_arg(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"coverage must be in (0, 1], got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_ingest(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, required=True, help="transaction CSV")
    p.add_argument("--dataset-end", type=_month_arg, help="last month YYYY-MM (default: latest record)")
    p.add_argument("--max-history-years", type=_positive_int, default=6)
    p.add_argument("--conversion", type=Path, help="item_code,multiplier CSV")
    p.add_argument("--drop-partial-month", action="store_true", help="discard the final month")


def _add_fit(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fourier-order", type=int, default=FitConfig.fourier_order)
    p.add_argument("--n-changepoints", type=int, default=FitConfig.n_changepoints)
    p.add_argument("--changepoint-range", type=float, default=FitConfig.changepoint_range)
    p.add_argument("--lambda-delta", type=float, default=FitConfig.lambda_delta)
    p.add_argument("--lambda-season", type=float, default=FitConfig.lambda_season)


def _add_backtest(p: argparse.ArgumentParser, with_input: bool) -> None:
    if with_input:
        p.add_argument("--input", type=Path, required=True, help="transaction CSV used for ranking")
        p.add_argument("--max-history-years", type=_positive_int, default=6)
        p.add_argument("--conversion", type=Path, help="item_code,multiplier CSV")
    p.add_argument("--criterion", choices=CRITERIA, default="turnover")
    p.add_argument("--margins", type=Path, help="item_code,unit_margin CSV (criterion profit)")
    sel = p.add_mutually_exclusive_group()
    sel.add_argument("--coverage", type=_coverage_arg, default=None, help="coverage cut in (0, 1] (default 0.9)")
    sel.add_argument("--top-n", type=_positive_int, default=None)
    _add_fit(p)
    p.add_argument("--zero-policy", choices=ZERO_POLICIES, default="skip")
    p.add_argument("--jobs", type=_positive_int, default=None,
                   help="worker processes (default: $FORECASTLAB_JOBS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="forecastlab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="aggregate transactions into monthly series")
    _add_ingest(p)
    _add_common(p)

    p = sub.add_parser("backtest", help="rank, select, backtest and classify the portfolio")
    _add_backtest(p, with_input=True)
    _add_common(p)

    p = sub.add_parser("run", help="ingest followed by backtest")
    _add_ingest(p)
    _add_backtest(p, with_input=False)
    _add_common(p)

    p = sub.add_parser("forecast", help="fit one item and forecast ahead")
    p.add_argument("--item", required=True)
    p.add_argument("--horizon", type=int, default=3)
    _add_fit(p)
    _add_common(p)
    return parser


def _resolve_jobs(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("FORECASTLAB_JOBS")
    if env:
        try:
            return _positive_int(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"FORECASTLAB_JOBS must be a positive integer, got {env!r}") from None
    return os.cpu_count() or 1


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(output_dir=args.out)
    for attr, name in (
        ("input_path", "input"), ("dataset_end", "dataset_end"),
        ("max_history_years", "max_history_years"), ("conversion_path", "conversion"),
        ("margins_path", "margins"), ("drop_partial_month", "drop_partial_month"),
        ("criterion", "criterion"), ("zero_policy", "zero_policy"),
    ):
        if hasattr(args, name):
            setattr(cfg, attr, getattr(args, name))
    if hasattr(args, "top_n"):
        cfg.top_n = args.top_n
        cfg.coverage = None if args.top_n is not None else (args.coverage or 0.9)
    if hasattr(args, "fourier_order"):
        try:
            cfg.fit = FitConfig(
                fourier_order=args.fourier_order,
                n_changepoints=args.n_changepoints,
                changepoint_range=args.changepoint_range,
                lambda_delta=args.lambda_delta,
                lambda_season=args.lambda_season,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if hasattr(args, "jobs"):
        cfg.jobs = _resolve_jobs(args.jobs)
    if cfg.criterion == "profit" and hasattr(args, "margins") and args.margins is None:
        raise UsageError("--criterion profit requires --margins")
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = config_from_args(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "backtest":
            return cmd_backtest(cfg)
        if args.command == "run":
            return cmd_ingest(cfg) or cmd_backtest(cfg)
        if args.horizon < 0:
            raise UsageError("--horizon must be >= 0")
        return cmd_forecast(cfg, args.item, args.horizon)
    except UsageError as exc:
        print(f"forecastlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"forecastlab: {exc}", file=sys.stderr)
        return exc.code
    except (ForecastLabError, OSError) as exc:
        print(f"forecastlab: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
