"""Brinson-style performance attribution against a benchmark.

Expected asset returns are supplied as a plain vector ``mu`` (in practice the
sample means over a rolling scenario window).  For portfolio weights w and
benchmark weights b over classes i with class totals w_i, b_i:

    allocation_i = (w_i - b_i) * (Rb_i - Rb)
    selection_i  = b_i * (Rp_i - Rb_i)
    interaction_i = (w_i - b_i) * (Rp_i - Rb_i)

where Rp_i and Rb_i are the weighted mean returns of class i under the
portfolio and benchmark and Rb is the total benchmark return.  The excess
return Rp - Rb equals the sum of all three effects.  The combined selection
effect selection_i + interaction_i collapses to w_i * (Rp_i - Rb_i), which is
linear in the asset weights and is what the optimizer constrains.

Empty classes follow a fixed convention: a class with w_i = 0 has Rp_i = 0,
so selection_i = -b_i * Rb_i and combined selection is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import ClassPartition, WeightVector

__all__ = [
    "EmptyClassError",
    "AttributionReport",
    "class_return",
    "portfolio_return",
    "attribute",
    "interaction_alt_form",
    "log_return_decomposition_error",
]

# Denominator floor below which the product-form interaction is undefined.
PRODUCT_FORM_TOL = 1e-12


class EmptyClassError(ValueError):
    """Raised when a class return is requested for a zero-weight class."""


@dataclass
class AttributionReport:
    """Per-class attribution effects plus their totals for one day."""

    partition: ClassPartition
    weight_portfolio: np.ndarray
    weight_benchmark: np.ndarray
    class_return_portfolio: np.ndarray
    class_return_benchmark: np.ndarray
    allocation: np.ndarray
    selection: np.ndarray
    interaction: np.ndarray
    combined_selection: np.ndarray
    portfolio_return: float
    benchmark_return: float

    @property
    def allocation_total(self) -> float:
        return float(self.allocation.sum())

    @property
    def selection_total(self) -> float:
        return float(self.selection.sum())

    @property
    def interaction_total(self) -> float:
        return float(self.interaction.sum())

    @property
    def combined_selection_total(self) -> float:
        return float(self.combined_selection.sum())

    @property
    def excess_return(self) -> float:
        return self.portfolio_return - self.benchmark_return

    @staticmethod
    def row_columns(partition: ClassPartition) -> list[str]:
        """Flat CSV column names for one report row."""
        cols = []
        for label in partition.labels:
            cols += [
                f"allocation_{label}",
                f"selection_{label}",
                f"interaction_{label}",
                f"combined_selection_{label}",
                f"class_return_p_{label}",
                f"class_return_b_{label}",
                f"weight_p_{label}",
                f"weight_b_{label}",
            ]
        cols += [
            "allocation_total",
            "selection_total",
            "interaction_total",
            "combined_selection_total",
            "portfolio_return",
            "benchmark_return",
            "excess_return",
        ]
        return cols

    def to_row(self) -> dict[str, float]:
        """Flatten to one CSV row; keys match ``row_columns``."""
        row: dict[str, float] = {}
        for c, label in enumerate(self.partition.labels):
            row[f"allocation_{label}"] = float(self.allocation[c])
            row[f"selection_{label}"] = float(self.selection[c])
            row[f"interaction_{label}"] = float(self.interaction[c])
            row[f"combined_selection_{label}"] = float(self.combined_selection[c])
            row[f"class_return_p_{label}"] = float(self.class_return_portfolio[c])
            row[f"class_return_b_{label}"] = float(self.class_return_benchmark[c])
            row[f"weight_p_{label}"] = float(self.weight_portfolio[c])
            row[f"weight_b_{label}"] = float(self.weight_benchmark[c])
        row["allocation_total"] = self.allocation_total
        row["selection_total"] = self.selection_total
        row["interaction_total"] = self.interaction_total
        row["combined_selection_total"] = self.combined_selection_total
        row["portfolio_return"] = self.portfolio_return
        row["benchmark_return"] = self.benchmark_return
        row["excess_return"] = self.excess_return
        return row


def _check_mu(mu: np.ndarray, n_assets: int) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (n_assets,):
        raise ValueError("expected-return vector length must match the assets")
    if not np.all(np.isfinite(mu)):
        raise ValueError("expected returns must be finite")
    return mu


def class_return(weights: WeightVector, mu: np.ndarray, class_index: int) -> float:
    """Weighted mean expected return of one class, w_ij / w_i weighting.

    Raises EmptyClassError when the class carries no weight; callers decide
    whether the empty-class convention applies.
    """
    mu = _check_mu(mu, weights.partition.n_assets)
    members = weights.partition.members(class_index)
    if members.size == 0:
        raise EmptyClassError(f"class {class_index} has no assets")
    total = weights.weights[members].sum()
    if total <= 0.0:
        raise EmptyClassError(f"class {class_index} carries no weight")
    return float(weights.weights[members] @ mu[members] / total)


def portfolio_return(weights: WeightVector, mu: np.ndarray) -> float:
    """Total expected portfolio return, the weight-mu inner product."""
    mu = _check_mu(mu, weights.partition.n_assets)
    return float(weights.weights @ mu)


def attribute(
    portfolio: WeightVector, benchmark: WeightVector, mu: np.ndarray
) -> AttributionReport:
    """Decompose the expected excess return of portfolio over benchmark.

    Both weight vectors must share a partition, and every benchmark class
    weight must be strictly positive.
    """
    part = portfolio.partition
    if part is not benchmark.partition and not (
        part.n_classes == benchmark.partition.n_classes
        and np.array_equal(part.class_of, benchmark.partition.class_of)
    ):
        raise ValueError("portfolio and benchmark use different partitions")
    mu = _check_mu(mu, part.n_assets)

    wp = portfolio.class_totals()
    wb = benchmark.class_totals()
    if (wb <= 0.0).any():
        raise ValueError("benchmark must give positive weight to every class")

    weighted_p = np.bincount(
        part.class_of, weights=portfolio.weights * mu, minlength=part.n_classes
    )
    weighted_b = np.bincount(
        part.class_of, weights=benchmark.weights * mu, minlength=part.n_classes
    )
    # Empty portfolio classes take class return 0 by convention.
    occupied = wp > 0.0
    rp_class = np.zeros(part.n_classes)
    np.divide(weighted_p, wp, out=rp_class, where=occupied)
    rb_class = weighted_b / wb

    r_p = float(portfolio.weights @ mu)
    r_b = float(benchmark.weights @ mu)

    allocation = (wp - wb) * (rb_class - r_b)
    selection = wb * (rp_class - rb_class)
    interaction = (wp - wb) * (rp_class - rb_class)

    return AttributionReport(
        partition=part,
        weight_portfolio=wp,
        weight_benchmark=wb,
        class_return_portfolio=rp_class,
        class_return_benchmark=rb_class,
        allocation=allocation,
        selection=selection,
        interaction=interaction,
        combined_selection=selection + interaction,
        portfolio_return=r_p,
        benchmark_return=r_b,
    )


def interaction_alt_form(
    report: AttributionReport, class_index: int, form: str = "scaled_selection"
) -> float:
    """Interaction for one class via an algebraically equivalent route.

    form="scaled_selection": (w_i / b_i - 1) * selection_i.
    form="product": allocation_i * selection_i / (b_i * (Rb_i - Rb)), defined
    only while the denominator stays away from zero.
    """
    c = class_index
    wb = report.weight_benchmark[c]
    if form == "scaled_selection":
        return float((report.weight_portfolio[c] / wb - 1.0) * report.selection[c])
    if form == "product":
        denom = wb * (report.class_return_benchmark[c] - report.benchmark_return)
        if abs(denom) <= PRODUCT_FORM_TOL:
            raise ZeroDivisionError(
                "product form undefined: class benchmark return matches the total"
            )
        return float(report.allocation[c] * report.selection[c] / denom)
    raise ValueError(f"unknown interaction form {form!r}")


def log_return_decomposition_error(weights: WeightVector, mu: np.ndarray) -> float:
    """Leading-order error of summing asset log returns into a portfolio.

    A portfolio's log return is not the weighted sum of asset log returns;
    the second-order Taylor term is half the weighted variance of mu:
    0.5 * (sum_j w_j mu_j^2 - (sum_j w_j mu_j)^2).
    """
    mu = _check_mu(mu, weights.partition.n_assets)
    w = weights.weights
    mean = w @ mu
    return float(0.5 * (w @ (mu * mu) - mean * mean))
