"""Percentage error and mean absolute percentage error."""

from __future__ import annotations

from typing import Iterable, Literal, NamedTuple

from .errors import AllSkipped, ZeroActual

ZeroPolicy = Literal["skip", "error"]
ZERO_POLICIES = ("skip", "error")


class ErrorPair(NamedTuple):
    y_forecast: float
    y_true: float


class MapeResult(NamedTuple):
    mape: float
    used: int
    skipped: int


def percentage_error(pair: ErrorPair) -> float:
    """Signed error of a forecast relative to the actual, in percent."""
    y_forecast, y_true = pair
    if y_true == 0:
        raise ZeroActual("percentage error is undefined for a zero actual")
    return (y_forecast - y_true) / y_true * 100


def mape(pairs: Iterable[ErrorPair], zero_policy: ZeroPolicy = "skip") -> MapeResult:
    """Mean of ``|percentage_error|`` over the pairs.

    With ``zero_policy="skip"`` pairs whose actual is 0 are left out and
    counted in ``skipped``; with ``"error"`` they raise :class:`ZeroActual`.
    """
    if zero_policy not in ZERO_POLICIES:
        raise ValueError(f"unknown zero policy {zero_policy!r}")
    pairs = list(pairs)
    if not pairs:
        raise ValueError("mape needs at least one pair")
    total = 0.0
    used = skipped = 0
    for pair in pairs:
        if pair[1] == 0:
            if zero_policy == "error":
                raise ZeroActual("zero actual encountered with zero_policy='error'")
            skipped += 1
            continue
        total += abs(percentage_error(pair))
        used += 1
    if used == 0:
        raise AllSkipped(f"all {skipped} pairs have a zero actual")
    return MapeResult(total / used, used, skipped)
