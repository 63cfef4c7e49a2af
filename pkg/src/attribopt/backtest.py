"""Rolling-window backtests against the equi-weighted benchmark.

Day t is evaluated with scenarios drawn strictly from the window of returns
before t; expected returns are the column means of that window.  The solved
weights earn the day-t returns, and cumulative value compounds the portfolio
log returns from the initial stake.  Infeasible days hold the previous
weights (the momentum fallback), starting from benchmark weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .attribution import AttributionReport, attribute, log_return_decomposition_error
from .market_data import (
    ClassPartition,
    DataError,
    ReturnPanel,
    WeightVector,
    equi_weight_benchmark,
)
from .strategies import StrategySpec, solve_day

logger = logging.getLogger(__name__)

__all__ = ["BacktestConfig", "BacktestResult", "run_backtest", "benchmark_series"]


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling estimation window and the initial stake."""

    window: int = 1008
    initial_price: float = 1.0

    def __post_init__(self) -> None:
        if int(self.window) != self.window or self.window < 1:
            raise DataError("window must be a positive integer")
        if not self.initial_price > 0:
            raise DataError("initial price must be positive")


@dataclass
class BacktestResult:
    """Daily weights, returns, value path, and attribution for one run."""

    label: str
    strategy: StrategySpec | None
    config: BacktestConfig
    partition: ClassPartition
    dates: pd.DatetimeIndex
    tickers: list[str]
    weights: np.ndarray  # (T, N)
    log_returns: np.ndarray  # (T,)
    cumulative: np.ndarray  # (T,)
    statuses: list[str]
    stages: np.ndarray
    objectives: list[tuple[float, ...]]
    reports: list[AttributionReport]
    aggregation_error: np.ndarray

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def fallback_mask(self) -> np.ndarray:
        return np.array([s == "no_solution_fallback" for s in self.statuses])

    @property
    def no_solution_rate(self) -> float:
        return float(self.fallback_mask.mean()) if self.n_days else 0.0

    # -- serialization ------------------------------------------------------

    def _date_strings(self) -> pd.Index:
        return self.dates.strftime("%Y-%m-%d")

    def weights_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.weights, index=self._date_strings(), columns=self.tickers)
        frame.index.name = "date"
        return frame

    def series_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "log_return": self.log_returns,
                "cumulative_price": self.cumulative,
                "status": self.statuses,
                "stages": self.stages,
                "aggregation_error": self.aggregation_error,
            },
            index=self._date_strings(),
        )
        frame.index.name = "date"
        return frame

    def attribution_frame(self) -> pd.DataFrame:
        cols = AttributionReport.row_columns(self.partition)
        rows = [report.to_row() for report in self.reports]
        frame = pd.DataFrame(rows, index=self._date_strings(), columns=cols)
        frame.index.name = "date"
        return frame


def run_backtest(
    returns: ReturnPanel,
    partition: ClassPartition,
    spec: StrategySpec,
    config: BacktestConfig = BacktestConfig(),
) -> BacktestResult:
    """Run one strategy over every evaluated day of the panel.

    With T return days and window W, days W..T-1 (0-based) are evaluated:
    exactly T - W days, each solved from the W rows preceding it.
    """
    if returns.n_assets != partition.n_assets:
        raise DataError("return panel and partition disagree on asset count")
    window = config.window
    n_eval = returns.n_days - window
    if n_eval < 1:
        raise DataError("window leaves no evaluated days")

    benchmark = equi_weight_benchmark(partition)
    previous = benchmark
    data = returns.returns

    weights = np.empty((n_eval, returns.n_assets))
    log_returns = np.empty(n_eval)
    aggregation = np.empty(n_eval)
    stages = np.empty(n_eval, dtype=np.int64)
    statuses: list[str] = []
    objectives: list[tuple[float, ...]] = []
    reports: list[AttributionReport] = []

    for k, t in enumerate(range(window, returns.n_days)):
        scenarios = data[t - window : t]
        mu = scenarios.mean(axis=0)
        solve = solve_day(spec, scenarios, benchmark, mu, previous)
        day = solve.weights
        weights[k] = day.weights
        log_returns[k] = day.weights @ data[t]
        # Diagnostic: leading-order error of summing asset log returns into
        # the portfolio return, evaluated at the day's realized returns.
        aggregation[k] = log_return_decomposition_error(day, data[t])
        stages[k] = solve.stages
        statuses.append(solve.status)
        objectives.append(solve.objectives)
        reports.append(attribute(day, benchmark, mu))
        previous = day

    result = BacktestResult(
        label=f"{spec.strategy}_a{spec.alpha:g}",
        strategy=spec,
        config=config,
        partition=partition,
        dates=returns.dates[window:],
        tickers=list(returns.tickers),
        weights=weights,
        log_returns=log_returns,
        cumulative=config.initial_price * np.exp(np.cumsum(log_returns)),
        statuses=statuses,
        stages=stages,
        objectives=objectives,
        reports=reports,
        aggregation_error=aggregation,
    )
    if result.no_solution_rate > 0:
        logger.info(
            "%s: %d of %d days fell back to previous weights",
            result.label,
            int(result.fallback_mask.sum()),
            result.n_days,
        )
    return result


def benchmark_series(
    returns: ReturnPanel,
    partition: ClassPartition,
    initial_price: float = 1.0,
    skip: int = 0,
) -> BacktestResult:
    """Equi-weighted benchmark, rebalanced to 1/N every day.

    ``skip`` drops leading return days so the series aligns with a strategy
    run that consumed them as its first estimation window.
    """
    if returns.n_assets != partition.n_assets:
        raise DataError("return panel and partition disagree on asset count")
    n_eval = returns.n_days - skip
    if n_eval < 1:
        raise DataError("skip leaves no evaluated days")

    benchmark = equi_weight_benchmark(partition)
    data = returns.returns[skip:]
    n = returns.n_assets
    log_returns = data.mean(axis=1)
    zero_mu = np.zeros(n)
    reports = [attribute(benchmark, benchmark, zero_mu)] * n_eval
    aggregation = np.array(
        [log_return_decomposition_error(benchmark, data[k]) for k in range(n_eval)]
    )
    return BacktestResult(
        label="benchmark",
        strategy=None,
        config=BacktestConfig(window=max(skip, 1), initial_price=initial_price),
        partition=partition,
        dates=returns.dates[skip:],
        tickers=list(returns.tickers),
        weights=np.full((n_eval, n), 1.0 / n),
        log_returns=log_returns,
        cumulative=initial_price * np.exp(np.cumsum(log_returns)),
        statuses=["optimal"] * n_eval,
        stages=np.zeros(n_eval, dtype=np.int64),
        objectives=[()] * n_eval,
        reports=reports,
        aggregation_error=aggregation,
    )
