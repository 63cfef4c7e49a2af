"""Tail-loss portfolio optimization under performance attribution constraints.

The package optimizes long-only portfolios by minimizing scenario expected
tail loss subject to Brinson-style attribution constraints against an
equi-weighted benchmark, and backtests the resulting strategies with
drawdown, Sharpe, and Rachev measures.
"""

from .attribution import (
    AttributionReport,
    EmptyClassError,
    attribute,
    class_return,
    interaction_alt_form,
    log_return_decomposition_error,
    portfolio_return,
)
from .backtest import BacktestConfig, BacktestResult, benchmark_series, run_backtest
from .cvar import (
    LinearProgram,
    SolveOutcome,
    WeightConstraint,
    build_etl_lp,
    empirical_etl,
    empirical_var,
    lp_to_mps,
    solve_lp,
)
from .market_data import (
    ClassPartition,
    DataError,
    PricePanel,
    ReturnPanel,
    RiskFreeSeries,
    WeightVector,
    default_partition,
    equi_weight_benchmark,
    load_partition_json,
    load_price_csv,
    load_riskfree_csv,
    synthesize_panel,
    to_log_returns,
)
from .risk import (
    RiskSummary,
    max_drawdown,
    moving_window_metrics,
    rachev_ratio,
    sharpe_ratio,
    summarize,
)
from .strategies import (
    STRATEGY_IDS,
    ConstraintAudit,
    DailySolve,
    StrategySpec,
    build_constraints,
    solve_day,
    verify_constraints,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # market data
    "ClassPartition",
    "DataError",
    "PricePanel",
    "ReturnPanel",
    "RiskFreeSeries",
    "WeightVector",
    "default_partition",
    "equi_weight_benchmark",
    "load_partition_json",
    "load_price_csv",
    "load_riskfree_csv",
    "synthesize_panel",
    "to_log_returns",
    # attribution
    "AttributionReport",
    "EmptyClassError",
    "attribute",
    "class_return",
    "interaction_alt_form",
    "log_return_decomposition_error",
    "portfolio_return",
    # tail loss / LP
    "LinearProgram",
    "SolveOutcome",
    "WeightConstraint",
    "build_etl_lp",
    "empirical_etl",
    "empirical_var",
    "lp_to_mps",
    "solve_lp",
    # strategies
    "STRATEGY_IDS",
    "ConstraintAudit",
    "DailySolve",
    "StrategySpec",
    "build_constraints",
    "solve_day",
    "verify_constraints",
    # backtest
    "BacktestConfig",
    "BacktestResult",
    "benchmark_series",
    "run_backtest",
    # risk
    "RiskSummary",
    "max_drawdown",
    "moving_window_metrics",
    "rachev_ratio",
    "sharpe_ratio",
    "summarize",
]
