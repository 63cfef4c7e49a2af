"""Risk and performance measures for backtest series.

Maximum drawdown is relative by default, the largest fraction lost from a
running peak; the absolute dollar form sits behind a flag.  Sharpe ratios
are unannualized daily mean over sample standard deviation of excess
returns.  The Rachev ratio divides the expected tail gain by the expected
tail loss of excess returns at the chosen levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .backtest import BacktestResult
from .cvar import empirical_etl
from .market_data import RiskFreeSeries

__all__ = [
    "RiskSummary",
    "max_drawdown",
    "sharpe_ratio",
    "rachev_ratio",
    "summarize",
    "moving_window_metrics",
    "moving_frame",
]


@dataclass
class RiskSummary:
    """The three headline measures over one evaluation period."""

    max_drawdown: float
    sharpe: float
    rachev: float
    start: pd.Timestamp
    end: pd.Timestamp
    n_days: int


def _check_series(values: np.ndarray, label: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError(f"{label} must be a non-empty 1-d array")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{label} must be finite")
    return values


def _daily_risk_free(
    risk_free: RiskFreeSeries | np.ndarray | float,
    n: int,
    dates: pd.DatetimeIndex | None,
) -> np.ndarray:
    if isinstance(risk_free, RiskFreeSeries):
        if dates is None:
            raise ValueError("aligning a risk-free series needs the return dates")
        return risk_free.for_dates(dates)
    if np.isscalar(risk_free):
        return np.full(n, float(risk_free))
    rf = np.asarray(risk_free, dtype=np.float64)
    if rf.shape != (n,):
        raise ValueError("risk-free array must match the return series length")
    return rf


def max_drawdown(prices: np.ndarray, relative: bool = True) -> float:
    """Largest peak-to-trough loss of a value series.

    relative=True: max over t of 1 - price_t / peak_t, a fraction in [0, 1].
    relative=False: max over t of peak_t - price_t, in price units.
    """
    prices = _check_series(prices, "prices")
    if (prices <= 0).any():
        raise ValueError("prices must be positive")
    peaks = np.maximum.accumulate(prices)
    if relative:
        return float(np.max(1.0 - prices / peaks))
    return float(np.max(peaks - prices))


def sharpe_ratio(
    returns: np.ndarray,
    risk_free: RiskFreeSeries | np.ndarray | float = 0.0,
    dates: pd.DatetimeIndex | None = None,
) -> float:
    """Daily Sharpe ratio: mean excess return over its sample deviation."""
    returns = _check_series(returns, "returns")
    if returns.size < 2:
        raise ValueError("Sharpe ratio needs at least two returns")
    excess = returns - _daily_risk_free(risk_free, returns.size, dates)
    spread = float(excess.std(ddof=1))
    if spread == 0.0:
        raise ValueError("degenerate Sharpe ratio: zero variance of excess returns")
    return float(excess.mean()) / spread


def rachev_ratio(
    returns: np.ndarray,
    risk_free: RiskFreeSeries | np.ndarray | float = 0.0,
    alpha: float = 0.95,
    beta: float = 0.95,
    dates: pd.DatetimeIndex | None = None,
) -> float:
    """Expected tail gain over expected tail loss of excess returns.

    The numerator is the tail loss of the negated excess series at level
    alpha (the right tail of gains); the denominator is the tail loss of the
    excess series at level beta.  A non-positive denominator is degenerate.
    """
    returns = _check_series(returns, "returns")
    excess = returns - _daily_risk_free(risk_free, returns.size, dates)
    gain_tail = empirical_etl(-excess, alpha)
    loss_tail = empirical_etl(excess, beta)
    if loss_tail <= 0.0:
        raise ValueError("degenerate Rachev ratio: non-positive tail loss")
    return gain_tail / loss_tail


def _window_summary(
    prices: np.ndarray,
    returns: np.ndarray,
    rf: np.ndarray,
    dates: pd.DatetimeIndex,
    alpha: float,
    beta: float,
) -> RiskSummary:
    try:
        sharpe = sharpe_ratio(returns, rf)
    except ValueError:
        sharpe = math.nan
    try:
        rachev = rachev_ratio(returns, rf, alpha=alpha, beta=beta)
    except ValueError:
        rachev = math.nan
    return RiskSummary(
        max_drawdown=max_drawdown(prices),
        sharpe=sharpe,
        rachev=rachev,
        start=dates[0],
        end=dates[-1],
        n_days=len(dates),
    )


def summarize(
    result: BacktestResult,
    risk_free: RiskFreeSeries | np.ndarray | float = 0.0,
    alpha: float = 0.95,
    beta: float = 0.95,
) -> RiskSummary:
    """Full-period drawdown, Sharpe, and Rachev for one backtest."""
    rf = _daily_risk_free(risk_free, result.n_days, result.dates)
    return _window_summary(
        result.cumulative, result.log_returns, rf, result.dates, alpha, beta
    )


def moving_window_metrics(
    result: BacktestResult,
    risk_free: RiskFreeSeries | np.ndarray | float = 0.0,
    window: int = 1008,
    alpha: float = 0.95,
    beta: float = 0.95,
) -> list[RiskSummary]:
    """Trailing-window summaries, one per window end day.

    A series of T days yields T - window + 1 summaries; the final one covers
    the same days as the full period when window equals T.  Windows whose
    Sharpe or Rachev is degenerate carry NaN for that measure.
    """
    if window < 1 or window > result.n_days:
        raise ValueError("window must be between 1 and the series length")
    rf = _daily_risk_free(risk_free, result.n_days, result.dates)
    out = []
    for end in range(window, result.n_days + 1):
        sl = slice(end - window, end)
        out.append(
            _window_summary(
                result.cumulative[sl],
                result.log_returns[sl],
                rf[sl],
                result.dates[sl],
                alpha,
                beta,
            )
        )
    return out


def moving_frame(summaries: list[RiskSummary]) -> pd.DataFrame:
    """Plot-ready frame of moving-window metrics indexed by window end."""
    frame = pd.DataFrame(
        {
            "max_drawdown": [s.max_drawdown for s in summaries],
            "sharpe": [s.sharpe for s in summaries],
            "rachev": [s.rachev for s in summaries],
        },
        index=pd.DatetimeIndex([s.end for s in summaries]).strftime("%Y-%m-%d"),
    )
    frame.index.name = "date"
    return frame
