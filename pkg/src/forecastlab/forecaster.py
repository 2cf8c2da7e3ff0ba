"""Additive monthly forecaster: piecewise-linear trend plus yearly Fourier seasonality.

The model on normalized time ``x = t / (n_train - 1)`` is::

    y(t) / y_scale = m + k*x + sum_l delta_l * max(0, x - s_l)
                     + sum_j a_j*sin(2*pi*j*(t mod 12)/12) + b_j*cos(2*pi*j*(t mod 12)/12)

and is fitted in closed form by ridge regression, with the offset and base
slope unpenalized.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateInput,
    NonNegativeViolation,
    SingularSystem,
    TooShortToFit,
)

PERIOD = 12
MIN_FIT_MONTHS = 24
MAX_FOURIER_ORDER = PERIOD // 2 - 1


@dataclass(frozen=True)
class FitConfig:
    fourier_order: int = 4
    n_changepoints: int = 10
    changepoint_range: float = 0.8
    lambda_delta: float = 1.0
    lambda_season: float = 0.1

    def __post_init__(self):
        if not 1 <= self.fourier_order <= MAX_FOURIER_ORDER:
            raise ValueError(f"fourier_order must be in 1..{MAX_FOURIER_ORDER} for monthly data")
        if self.n_changepoints < 0:
            raise ValueError("n_changepoints must be >= 0")
        if not 0 < self.changepoint_range <= 1:
            raise ValueError("changepoint_range must be in (0, 1]")
        for name in ("lambda_delta", "lambda_season"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class AdditiveModel:
    n_train: int
    y_scale: float
    k: float
    m: float
    changepoints: tuple[float, ...]
    deltas: tuple[float, ...]
    fourier_coeffs: tuple[tuple[float, float], ...]
    config: FitConfig

    def to_dict(self) -> dict:
        d = asdict(self)
        d["changepoints"] = list(self.changepoints)
        d["deltas"] = list(self.deltas)
        d["fourier_coeffs"] = [list(p) for p in self.fourier_coeffs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AdditiveModel":
        return cls(
            n_train=int(d["n_train"]),
            y_scale=float(d["y_scale"]),
            k=float(d["k"]),
            m=float(d["m"]),
            changepoints=tuple(float(s) for s in d["changepoints"]),
            deltas=tuple(float(v) for v in d["deltas"]),
            fourier_coeffs=tuple((float(a), float(b)) for a, b in d["fourier_coeffs"]),
            config=FitConfig(**d["config"]),
        )

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AdditiveModel":
        return cls.from_dict(json.loads(text))

    @property
    def final_slope(self) -> float:
        return self.k + sum(self.deltas)

    def seasonal_amplitudes(self) -> list[float]:
        """Amplitude of each yearly harmonic in original units."""
        return [math.hypot(a, b) * self.y_scale for a, b in self.fourier_coeffs]


def n_changepoints_for(n: int, cfg: FitConfig) -> int:
    return min(cfg.n_changepoints, max(0, n // 3 - 1))


def changepoint_positions(n: int, cfg: FitConfig) -> np.ndarray:
    """Evenly spaced changepoints inside ``(0, changepoint_range)`` of normalized time."""
    c = n_changepoints_for(n, cfg)
    return cfg.changepoint_range * np.arange(1, c + 1) / (c + 1)


def _features(t: np.ndarray, n_train: int, changepoints: np.ndarray, order: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    x = t / (n_train - 1)
    hinges = np.maximum(0.0, x[:, None] - changepoints[None, :])
    phase = 2 * np.pi * np.mod(t, PERIOD) / PERIOD
    j = np.arange(1, order + 1)
    seasonal = np.empty((len(t), 2 * order))
    seasonal[:, 0::2] = np.sin(phase[:, None] * j)
    seasonal[:, 1::2] = np.cos(phase[:, None] * j)
    return np.hstack([np.ones((len(t), 1)), x[:, None], hinges, seasonal])


def build_design_matrix(n: int, cfg: FitConfig) -> np.ndarray:
    """Columns: offset, slope, one hinge per changepoint, then sin/cos pairs per harmonic."""
    if n < 2:
        raise DegenerateInput(f"need at least 2 points, got {n}")
    return _features(np.arange(n), n, changepoint_positions(n, cfg), cfg.fourier_order)


def solve_ridge(X, y, penalties) -> np.ndarray:
    """Minimize ``||X b - y||^2 + sum(penalties * b**2)`` via the regularized normal equations."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    penalties = np.asarray(penalties, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if penalties.shape != (X.shape[1],):
        raise ValueError(f"need {X.shape[1]} penalties, got {penalties.shape}")
    if np.any(penalties < 0):
        raise ValueError("penalties must be non-negative")

    A = X.T @ X + np.diag(penalties)
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError:
        raise SingularSystem("regularized normal matrix is not positive definite") from None
    d = np.abs(np.diag(factor[0]))
    if d.min() ** 2 <= d.max() ** 2 * A.shape[0] * np.finfo(float).eps:
        raise SingularSystem("regularized normal matrix is numerically singular")
    return linalg.cho_solve(factor, X.T @ y)


def penalty_vector(n_hinges: int, cfg: FitConfig) -> np.ndarray:
    return np.concatenate([
        [0.0, 0.0],
        np.full(n_hinges, cfg.lambda_delta),
        np.full(2 * cfg.fourier_order, cfg.lambda_season),
    ])


def fit_additive_model(values: Sequence[float], cfg: FitConfig | None = None) -> AdditiveModel:
    cfg = cfg or FitConfig()
    y = np.asarray(values, dtype=float)
    if len(y) < MIN_FIT_MONTHS:
        raise TooShortToFit(f"need at least {MIN_FIT_MONTHS} months, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")
    if np.any(y < 0):
        raise NonNegativeViolation("sales values must be non-negative")

    n = len(y)
    y_scale = float(y.max()) if y.max() > 0 else 1.0
    changepoints = changepoint_positions(n, cfg)
    X = _features(np.arange(n), n, changepoints, cfg.fourier_order)
    beta = solve_ridge(X, y / y_scale, penalty_vector(len(changepoints), cfg))

    c = len(changepoints)
    seasonal = beta[2 + c:]
    return AdditiveModel(
        n_train=n,
        y_scale=y_scale,
        k=float(beta[1]),
        m=float(beta[0]),
        changepoints=tuple(float(s) for s in changepoints),
        deltas=tuple(float(v) for v in beta[2:2 + c]),
        fourier_coeffs=tuple(
            (float(seasonal[2 * i]), float(seasonal[2 * i + 1])) for i in range(cfg.fourier_order)
        ),
        config=cfg,
    )


def _coef_vector(model: AdditiveModel) -> np.ndarray:
    return np.concatenate([
        [model.m, model.k],
        model.deltas,
        np.ravel(model.fourier_coeffs),
    ])


def evaluate(model: AdditiveModel, t: Sequence[int]) -> np.ndarray:
    """Raw (unclipped) model value in original units at month indices ``t``.

    ``t = 0`` is the first training month; indices past ``n_train - 1``
    extrapolate the trend with its final slope.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    order = len(model.fourier_coeffs)
    X = _features(t, model.n_train, np.asarray(model.changepoints, dtype=float), order)
    return X @ _coef_vector(model) * model.y_scale


def predict(model: AdditiveModel, horizon: int) -> list[float]:
    """Non-negative point forecasts for the ``horizon`` months after training."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0:
        return []
    t = model.n_train - 1 + np.arange(1, horizon + 1)
    return [max(0.0, float(v)) for v in evaluate(model, t)]


class AdditiveForecaster:
    """Fit-and-predict callable usable as a backtest forecaster."""

    def __init__(self, cfg: FitConfig | None = None):
        self.cfg = cfg or FitConfig()

    def __call__(self, history: Sequence[float], horizon: int) -> list[float]:
        return predict(fit_additive_model(history, self.cfg), horizon)

    def __repr__(self) -> str:
        return f"AdditiveForecaster({self.cfg!r})"
