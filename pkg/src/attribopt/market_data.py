"""Price panels, log-return panels, class partitions, and risk-free data.

Everything downstream (attribution, optimization, backtesting) consumes the
types defined here.  Weight vectors live here too, next to the partition they
reference, so the data layer has no upward imports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = [
    "DataError",
    "ClassPartition",
    "PricePanel",
    "ReturnPanel",
    "RiskFreeSeries",
    "WeightVector",
    "TRADING_DAYS_PER_YEAR",
    "load_price_csv",
    "load_partition_json",
    "load_riskfree_csv",
    "to_log_returns",
    "equi_weight_benchmark",
    "synthesize_panel",
    "default_partition",
]

TRADING_DAYS_PER_YEAR = 252

# Sum-to-one slack accepted on weight vectors.
WEIGHT_SUM_TOL = 1e-9
# Solver output can carry round-off; entries above this floor are clipped to 0.
SOLVER_WEIGHT_TOL = 1e-6


class DataError(ValueError):
    """Raised when input market data fails validation."""


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


@dataclass
class ClassPartition:
    """Disjoint, exhaustive assignment of assets to classes.

    ``class_of[j]`` is the 0-based class index of asset ``j``.  Every class
    must be non-empty.  ``labels`` are display names used in report columns
    and partition files; they default to "1".."M".
    """

    class_of: np.ndarray
    n_classes: int
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.class_of = np.asarray(self.class_of, dtype=np.int64)
        if self.class_of.ndim != 1 or self.class_of.size == 0:
            raise DataError("class assignment must be a non-empty 1-d array")
        if self.n_classes < 1:
            raise DataError("need at least one class")
        if self.class_of.min() < 0 or self.class_of.max() >= self.n_classes:
            raise DataError("class index out of range")
        sizes = np.bincount(self.class_of, minlength=self.n_classes)
        if (sizes == 0).any():
            raise DataError("every class must contain at least one asset")
        if not self.labels:
            self.labels = tuple(str(i + 1) for i in range(self.n_classes))
        if len(self.labels) != self.n_classes:
            raise DataError("one label per class required")

    @property
    def n_assets(self) -> int:
        return int(self.class_of.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.class_of, minlength=self.n_classes)

    def members(self, class_index: int) -> np.ndarray:
        """Asset indices belonging to one class."""
        return np.where(self.class_of == class_index)[0]

    @classmethod
    def from_sizes(cls, sizes: list[int] | np.ndarray) -> "ClassPartition":
        """Contiguous partition with the given class sizes."""
        sizes = np.asarray(sizes, dtype=np.int64)
        class_of = np.repeat(np.arange(sizes.size), sizes)
        return cls(class_of=class_of, n_classes=int(sizes.size))

    @classmethod
    def from_mapping(
        cls, mapping: dict[str, list[str]], tickers: list[str]
    ) -> "ClassPartition":
        """Build from a {label: [tickers]} mapping.

        The mapping must cover every ticker exactly once.  Class order
        follows the sorted labels so files round-trip deterministically.
        """
        labels = sorted(mapping)
        class_of = np.full(len(tickers), -1, dtype=np.int64)
        position = {t: j for j, t in enumerate(tickers)}
        for c, label in enumerate(labels):
            for ticker in mapping[label]:
                if ticker not in position:
                    raise DataError(f"partition names unknown ticker {ticker!r}")
                if class_of[position[ticker]] != -1:
                    raise DataError(f"ticker {ticker!r} assigned twice")
                class_of[position[ticker]] = c
        missing = [t for t, j in position.items() if class_of[j] == -1]
        if missing:
            raise DataError(f"partition misses tickers: {missing}")
        return cls(class_of=class_of, n_classes=len(labels), labels=tuple(labels))

    def to_mapping(self, tickers: list[str]) -> dict[str, list[str]]:
        return {
            self.labels[c]: [tickers[j] for j in self.members(c)]
            for c in range(self.n_classes)
        }


@dataclass
class WeightVector:
    """Non-negative asset weights summing to one over a partition."""

    weights: np.ndarray
    partition: ClassPartition

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.partition.n_assets,):
            raise DataError("weight vector length must match the partition")
        if not np.all(np.isfinite(self.weights)):
            raise DataError("weights must be finite")
        if self.weights.min() < -WEIGHT_SUM_TOL:
            raise DataError("weights must be non-negative")
        np.clip(self.weights, 0.0, None, out=self.weights)
        if abs(self.weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DataError("weights must sum to one")

    @classmethod
    def from_solver(
        cls, weights: np.ndarray, partition: ClassPartition
    ) -> "WeightVector":
        """Clean raw solver output: clip round-off negatives, renormalize."""
        w = np.asarray(weights, dtype=np.float64).copy()
        if w.min() < -SOLVER_WEIGHT_TOL:
            raise DataError("solver weights violate non-negativity beyond tolerance")
        np.clip(w, 0.0, None, out=w)
        total = w.sum()
        if not np.isfinite(total) or abs(total - 1.0) > SOLVER_WEIGHT_TOL:
            raise DataError("solver weights do not sum to one within tolerance")
        return cls(weights=w / total, partition=partition)

    def class_totals(self) -> np.ndarray:
        """Per-class weight sums w_i."""
        return np.bincount(
            self.partition.class_of,
            weights=self.weights,
            minlength=self.partition.n_classes,
        )


@dataclass
class PricePanel:
    """Daily close prices, one column per ticker."""

    dates: pd.DatetimeIndex
    tickers: list[str]
    closes: np.ndarray

    def __post_init__(self) -> None:
        self.dates = pd.DatetimeIndex(self.dates)
        self.closes = np.asarray(self.closes, dtype=np.float64)
        if self.closes.ndim != 2:
            raise DataError("closes must be a 2-d array")
        if self.closes.shape != (len(self.dates), len(self.tickers)):
            raise DataError("closes shape must be (n_dates, n_tickers)")
        if len(self.dates) < 2:
            raise DataError("need at least two price dates")
        if self.dates.has_duplicates:
            raise DataError("duplicate dates in price panel")
        if not self.dates.is_monotonic_increasing:
            raise DataError("price dates must be increasing")
        if not np.all(np.isfinite(self.closes)):
            raise DataError("missing or non-finite prices are not accepted")
        if (self.closes <= 0).any():
            raise DataError("prices must be strictly positive")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.closes, index=self.dates, columns=self.tickers)


@dataclass
class ReturnPanel:
    """Daily log returns aligned to the date the return realizes on."""

    dates: pd.DatetimeIndex
    tickers: list[str]
    returns: np.ndarray

    def __post_init__(self) -> None:
        self.dates = pd.DatetimeIndex(self.dates)
        self.returns = np.asarray(self.returns, dtype=np.float64)
        if self.returns.shape != (len(self.dates), len(self.tickers)):
            raise DataError("returns shape must be (n_dates, n_tickers)")
        if not np.all(np.isfinite(self.returns)):
            raise DataError("non-finite returns are not accepted")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.returns, index=self.dates, columns=self.tickers)


@dataclass
class RiskFreeSeries:
    """Per-day decimal risk-free rates keyed by date."""

    dates: pd.DatetimeIndex
    daily: np.ndarray

    def __post_init__(self) -> None:
        self.dates = pd.DatetimeIndex(self.dates)
        self.daily = np.asarray(self.daily, dtype=np.float64)
        if self.daily.shape != (len(self.dates),):
            raise DataError("one rate per date required")
        if self.dates.has_duplicates:
            raise DataError("duplicate dates in risk-free series")
        if not np.all(np.isfinite(self.daily)):
            raise DataError("non-finite risk-free rates are not accepted")

    @classmethod
    def from_annual_percent(
        cls, dates: pd.DatetimeIndex, annual_percent: np.ndarray
    ) -> "RiskFreeSeries":
        """Convert annualized percent yields to per-day decimal rates.

        A quoted yield of y percent becomes y / (100 * 252) per trading day.
        """
        pct = np.asarray(annual_percent, dtype=np.float64)
        return cls(dates=dates, daily=pct / (100.0 * TRADING_DAYS_PER_YEAR))

    def for_dates(self, dates: pd.DatetimeIndex) -> np.ndarray:
        """Rates aligned to the requested dates; every date must be covered."""
        series = pd.Series(self.daily, index=self.dates)
        aligned = series.reindex(pd.DatetimeIndex(dates))
        if aligned.isna().any():
            missing = aligned.index[aligned.isna()][:5].strftime("%Y-%m-%d").tolist()
            raise DataError(f"risk-free series misses dates: {missing}")
        return aligned.to_numpy()


# ---------------------------------------------------------------------------
# loading and derivation
# ---------------------------------------------------------------------------


def load_price_csv(
    path: str | Path,
    date_column: str = "date",
    tickers: list[str] | None = None,
) -> PricePanel:
    """Load a close-price CSV with a date column and one column per ticker.

    Parameters
    ----------
    path : str or Path
        CSV file with header ``date,<ticker>,<ticker>,...``.
    date_column : str
        Name of the date column.
    tickers : list of str, optional
        Subset and order of ticker columns to keep.  Defaults to every
        non-date column in file order.

    Raises
    ------
    DataError
        On unparseable dates, duplicate dates, missing cells, or
        non-positive prices.
    """
    # round_trip parsing: values written with repr precision load back exactly
    frame = pd.read_csv(path, float_precision="round_trip")
    if date_column not in frame.columns:
        raise DataError(f"price CSV lacks date column {date_column!r}")
    try:
        dates = pd.to_datetime(frame[date_column], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable dates in price CSV: {exc}") from exc
    if dates.duplicated().any():
        raise DataError("duplicate dates in price CSV")
    cols = tickers if tickers is not None else [c for c in frame.columns if c != date_column]
    if not cols:
        raise DataError("price CSV has no ticker columns")
    missing_cols = [c for c in cols if c not in frame.columns]
    if missing_cols:
        raise DataError(f"price CSV lacks columns {missing_cols}")
    values = frame[cols].to_numpy(dtype=np.float64)
    if np.isnan(values).any():
        raise DataError("price CSV has missing cells; incomplete data is rejected")
    order = np.argsort(dates.to_numpy(), kind="stable")
    return PricePanel(
        dates=pd.DatetimeIndex(dates.to_numpy()[order]),
        tickers=list(cols),
        closes=values[order],
    )


def load_partition_json(path: str | Path, tickers: list[str]) -> ClassPartition:
    """Load a {class label: [tickers]} JSON partition file."""
    with open(path) as handle:
        try:
            mapping = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"partition file is not valid JSON: {exc}") from exc
    if not isinstance(mapping, dict) or not mapping:
        raise DataError("partition file must map class labels to ticker lists")
    for label, members in mapping.items():
        if not isinstance(members, list) or not all(isinstance(t, str) for t in members):
            raise DataError(f"partition class {label!r} must list tickers")
    return ClassPartition.from_mapping(mapping, tickers)


def load_riskfree_csv(path: str | Path) -> RiskFreeSeries:
    """Load ``date,annual_yield_percent`` rows into per-day decimal rates."""
    frame = pd.read_csv(path, float_precision="round_trip")
    required = {"date", "annual_yield_percent"}
    if not required.issubset(frame.columns):
        raise DataError("risk-free CSV needs columns date,annual_yield_percent")
    try:
        dates = pd.DatetimeIndex(pd.to_datetime(frame["date"], format="ISO8601"))
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable dates in risk-free CSV: {exc}") from exc
    pct = frame["annual_yield_percent"].to_numpy(dtype=np.float64)
    if np.isnan(pct).any():
        raise DataError("risk-free CSV has missing yields")
    order = np.argsort(dates.to_numpy(), kind="stable")
    return RiskFreeSeries.from_annual_percent(dates[order], pct[order])


def to_log_returns(panel: PricePanel) -> ReturnPanel:
    """Log returns ln(P_t / P_{t-1}); the first price date is consumed."""
    returns = np.diff(np.log(panel.closes), axis=0)
    return ReturnPanel(dates=panel.dates[1:], tickers=panel.tickers, returns=returns)


def equi_weight_benchmark(partition: ClassPartition) -> WeightVector:
    """The 1/N benchmark over all assets in the partition."""
    n = partition.n_assets
    return WeightVector(weights=np.full(n, 1.0 / n), partition=partition)


def default_partition(n_assets: int, n_classes: int = 6) -> ClassPartition:
    """Contiguous partition into ``n_classes`` near-equal classes."""
    if not 1 <= n_classes <= n_assets:
        raise DataError("class count must be between 1 and the asset count")
    base, extra = divmod(n_assets, n_classes)
    sizes = [base + 1 if c < extra else base for c in range(n_classes)]
    return ClassPartition.from_sizes(sizes)


def synthesize_panel(
    n_assets: int,
    n_days: int,
    seed: int,
    drift: float | np.ndarray | None = None,
    vol: float | np.ndarray | None = None,
    start_date: str = "2016-01-04",
) -> PricePanel:
    """Deterministic synthetic close-price panel.

    Prices follow a per-asset geometric random walk
    ``P(t+1) = P(t) * exp(drift_j + vol_j * z)`` with standard normal shocks
    drawn from ``numpy.random.default_rng(seed)``.  Defaults spread drift and
    volatility across assets so classes differ in both dimensions.
    """
    if n_assets < 1 or n_days < 2:
        raise DataError("need at least one asset and two days")
    if drift is None:
        drift = np.linspace(-2e-4, 6e-4, n_assets)
    if vol is None:
        vol = np.linspace(0.008, 0.022, n_assets)
    drift = np.broadcast_to(np.asarray(drift, dtype=np.float64), (n_assets,))
    vol = np.broadcast_to(np.asarray(vol, dtype=np.float64), (n_assets,))
    if (vol < 0).any():
        raise DataError("volatility must be non-negative")
    rng = np.random.default_rng(seed)
    shocks = rng.standard_normal((n_days - 1, n_assets))
    log_increments = drift[None, :] + vol[None, :] * shocks
    start = 20.0 + 80.0 * (np.arange(n_assets) % 7) / 7.0
    log_prices = np.vstack([np.zeros(n_assets), np.cumsum(log_increments, axis=0)])
    closes = start[None, :] * np.exp(log_prices)
    dates = pd.bdate_range(start=start_date, periods=n_days)
    tickers = [f"A{j:02d}" for j in range(n_assets)]
    return PricePanel(dates=dates, tickers=tickers, closes=closes)
