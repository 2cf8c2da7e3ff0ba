"""Exception hierarchy shared by every stage of the pipeline."""


class ForecastLabError(Exception):
    """Base class for all errors raised by forecastlab."""


# ingest

class IngestError(ForecastLabError):
    pass


class MissingColumn(IngestError):
    def __init__(self, column: str):
        super().__init__(f"required column missing from header: {column!r}")
        self.column = column


class MalformedRow(IngestError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvalidDate(MalformedRow):
    pass


class InvalidMultiplier(IngestError):
    pass


class RecordAfterEnd(IngestError):
    pass


# portfolio

class PortfolioError(ForecastLabError):
    pass


class PriceDataMissing(PortfolioError):
    pass


class ProfitDataMissing(PortfolioError):
    pass


class InvalidCoverage(PortfolioError, ValueError):
    pass


# forecaster

class ForecasterError(ForecastLabError):
    pass


class DegenerateInput(ForecasterError, ValueError):
    pass


class SingularSystem(ForecasterError):
    pass


class TooShortToFit(ForecasterError):
    pass


class NonNegativeViolation(ForecasterError, ValueError):
    pass


# metrics

class MetricError(ForecastLabError):
    pass


class ZeroActual(MetricError, ZeroDivisionError):
    pass


class AllSkipped(MetricError):
    pass


# backtest

class TooShort(ForecastLabError):
    pass


# classify

class ClassifyError(ForecastLabError):
    pass


class NegativeMape(ClassifyError, ValueError):
    pass


class MissingReport(ClassifyError):
    pass


class UnexpectedReport(ClassifyError):
    pass
