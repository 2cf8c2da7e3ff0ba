"""Monthly retail sales forecasting with expanding-window backtesting and
MAPE-based portfolio classification."""

__version__ = "0.1.0"

from .backtest import BacktestReport, BacktestStep, backtest_item, backtest_many, make_windows
from .classify import ClassificationReport, MapeBin, bin_by_mape, summarize_portfolio
from .forecaster import (
    AdditiveForecaster,
    AdditiveModel,
    FitConfig,
    build_design_matrix,
    fit_additive_model,
    predict,
    solve_ridge,
)
from .ingest import (
    Month,
    MonthlySeries,
    SalesRecord,
    aggregate_monthly,
    convert_units,
    filter_by_date,
    parse_sales_csv,
)
from .metrics import ErrorPair, mape, percentage_error
from .portfolio import Category, PortfolioEntry, classify_horizon, rank_products, select_top
