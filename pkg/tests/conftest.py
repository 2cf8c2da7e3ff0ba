import csv
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from forecastlab.ingest import Month, MonthlySeries

TABLE1 = """item_code,date,quantity,unit_price
501001000001,2010-01-02,399,1.3300
501001000001,2010-01-04,812,1.3380
501001000001,2010-01-05,516,1.3310
"""


def make_series(values, item="X", start=Month(2015, 1)) -> MonthlySeries:
    return MonthlySeries(item, start, tuple(float(v) for v in values))


def write_synthetic_sales(path: Path, seed: int = 7) -> dict:
    """Write a small multi-item transaction CSV ending December 2019.

    Items cover every horizon category: long seasonal sellers, a short-lived
    item, a mid-length item and one that stopped selling.
    """
    rng = np.random.default_rng(seed)
    end = Month(2019, 12)
    specs = {
        # item: (first month, last selling month, base level, trend, season amp, price)
        "A100": (Month(2014, 1), end, 400.0, 2.0, 120.0, 2.5),
        "B200": (Month(2014, 6), end, 250.0, -1.0, 60.0, 4.0),
        "C300": (Month(2015, 3), end, 120.0, 0.5, 30.0, 9.0),
        "D400": (Month(2016, 1), end, 80.0, 1.0, 10.0, 3.0),
        "E500": (Month(2017, 5), end, 60.0, 0.0, 15.0, 1.5),   # 32 months: forecast only
        "F600": (Month(2018, 9), end, 40.0, 0.0, 5.0, 6.0),    # 16 months: too short
        "G700": (Month(2014, 1), Month(2019, 8), 90.0, 0.0, 20.0, 2.0),  # inactive
        "H800": (Month(2013, 1), end, 30.0, 0.2, 8.0, 1.0),  # history older than 6 years
    }
    rows = []
    for item, (first, last, level, trend, amp, price) in specs.items():
        for i in range(last - first + 1):
            m = first + i
            monthly = max(5.0, level + trend * i + amp * np.sin(2 * np.pi * (m.month - 1) / 12))
            # split the month into a few transactions
            for day, share in ((3, 0.3), (14, 0.45), (27, 0.25)):
                qty = round(monthly * share * rng.uniform(0.9, 1.1))
                unit_price = round(price * rng.uniform(0.97, 1.03), 4)
                rows.append((item, date(m.year, m.month, day).isoformat(), qty, f"{unit_price:.4f}"))
    rows.sort(key=lambda r: (r[1], r[0]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["item_code", "date", "quantity", "unit_price"])
        writer.writerows(rows)
    return specs


@pytest.fixture
def table1_csv(tmp_path) -> Path:
    path = tmp_path / "table1.csv"
    path.write_text(TABLE1)
    return path


@pytest.fixture
def synthetic_csv(tmp_path) -> Path:
    path = tmp_path / "sales.csv"
    write_synthetic_sales(path)
    return path


# --- acceptance reporting ----------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    key = marker.args[0]
    status = None
    if rep.failed:
        status = "FAIL"
    elif rep.skipped and rep.when in ("setup", "call"):
        status = "SKIP"
    elif rep.when == "call":
        status = "PASS"
    if status is None:
        return
    previous = _ACCEPTANCE.get(key, ("PASS", ""))[0]
    # a criterion split over several tests fails if any part fails
    if status == "FAIL" or previous != "FAIL":
        reason = ""
        if status == "SKIP" and isinstance(rep.longrepr, tuple):
            reason = rep.longrepr[2]
        _ACCEPTANCE[key] = (status, reason or marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split(".")[0])):
        status, text = _ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {text}")
