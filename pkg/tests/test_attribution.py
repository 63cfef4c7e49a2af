import numpy as np
import pytest

from attribopt.attribution import (
    AttributionReport,
    EmptyClassError,
    attribute,
    class_return,
    interaction_alt_form,
    log_return_decomposition_error,
    portfolio_return,
)
from attribopt.market_data import ClassPartition, WeightVector


def two_singleton_classes():
    return ClassPartition.from_sizes([1, 1])


def test_allocation_worked_example():
    # Two single-asset classes, mu = (0.02, -0.01), benchmark 50/50:
    #   Rb = 0.005, Rb_1 - Rb = 0.015, Rb_2 - Rb = -0.015
    #   portfolio 60/40: AA_1 = 0.1 * 0.015 = 0.0015, AA_2 = (-0.1)(-0.015) = 0.0015
    # Single-asset classes force Rp_i = Rb_i, so SE = I = 0 and the excess
    # return 0.003 is pure allocation.
    part = two_singleton_classes()
    portfolio = WeightVector(np.array([0.6, 0.4]), part)
    bench = WeightVector(np.array([0.5, 0.5]), part)
    mu = np.array([0.02, -0.01])

    report = attribute(portfolio, bench, mu)
    assert report.benchmark_return == pytest.approx(0.005, abs=1e-15)
    assert report.allocation == pytest.approx([0.0015, 0.0015], abs=1e-15)
    assert report.selection == pytest.approx([0.0, 0.0], abs=1e-15)
    assert report.interaction == pytest.approx([0.0, 0.0], abs=1e-15)
    assert report.excess_return == pytest.approx(0.003, abs=1e-15)
    assert report.excess_return == pytest.approx(
        report.allocation_total + report.selection_total + report.interaction_total,
        abs=1e-15,
    )


def test_selection_and_interaction_multi_asset():
    # One class of two assets, one singleton. Portfolio tilts inside class 1,
    # so selection and interaction are non-zero there.
    part = ClassPartition.from_sizes([2, 1])
    portfolio = WeightVector(np.array([0.5, 0.1, 0.4]), part)
    bench = WeightVector(np.array([0.25, 0.25, 0.5]), part)
    mu = np.array([0.04, -0.02, 0.01])

    report = attribute(portfolio, bench, mu)
    # class 1: Rp = (0.5*0.04 + 0.1*(-0.02)) / 0.6 = 0.03, Rb = 0.01
    assert report.class_return_portfolio[0] == pytest.approx(0.03, abs=1e-15)
    assert report.class_return_benchmark[0] == pytest.approx(0.01, abs=1e-15)
    # SE_1 = 0.5 * (0.03 - 0.01) = 0.01, I_1 = 0.1 * 0.02 = 0.002
    assert report.selection[0] == pytest.approx(0.01, abs=1e-15)
    assert report.interaction[0] == pytest.approx(0.002, abs=1e-15)
    assert report.combined_selection[0] == pytest.approx(0.012, abs=1e-15)
    # combined selection is w_i (Rp_i - Rb_i) = 0.6 * 0.02
    assert report.combined_selection[0] == pytest.approx(
        report.weight_portfolio[0]
        * (report.class_return_portfolio[0] - report.class_return_benchmark[0]),
        abs=1e-15,
    )


def test_decomposition_identity_random():
    rng = np.random.default_rng(101)
    for _ in range(300):
        n_classes = int(rng.integers(1, 7))
        extra = int(rng.integers(0, 30 - n_classes))
        sizes = rng.multinomial(extra, np.ones(n_classes) / n_classes) + 1
        part = ClassPartition.from_sizes(sizes)
        n = part.n_assets
        portfolio = WeightVector(rng.dirichlet(np.ones(n)), part)
        bench = WeightVector(rng.dirichlet(np.ones(n)), part)
        mu = rng.normal(0.0, 0.05, size=n)

        report = attribute(portfolio, bench, mu)
        total = (
            report.allocation_total + report.selection_total + report.interaction_total
        )
        assert abs(report.excess_return - total) <= 1e-12
        combined = report.weight_portfolio * (
            report.class_return_portfolio - report.class_return_benchmark
        )
        assert np.max(np.abs(report.combined_selection - combined)) <= 1e-12
        assert abs(
            report.combined_selection_total
            - (report.selection_total + report.interaction_total)
        ) <= 1e-12


def test_empty_class_convention():
    # Zero-weight portfolio class: Rp_i = 0, SE_i = -b_i Rb_i, I_i = +b_i Rb_i,
    # combined selection exactly 0, and the identity still holds.
    part = two_singleton_classes()
    portfolio = WeightVector(np.array([1.0, 0.0]), part)
    bench = WeightVector(np.array([0.5, 0.5]), part)
    mu = np.array([0.02, -0.04])

    report = attribute(portfolio, bench, mu)
    assert report.class_return_portfolio[1] == 0.0
    assert report.selection[1] == pytest.approx(0.5 * 0.04, abs=1e-15)
    assert report.interaction[1] == pytest.approx(-0.5 * 0.04, abs=1e-15)
    assert report.combined_selection[1] == 0.0
    total = report.allocation_total + report.selection_total + report.interaction_total
    assert abs(report.excess_return - total) <= 1e-15


def test_class_return_basics():
    part = ClassPartition.from_sizes([2, 1])
    w = WeightVector(np.array([0.3, 0.1, 0.6]), part)
    mu = np.array([0.01, 0.05, -0.02])
    assert class_return(w, mu, 0) == pytest.approx((0.3 * 0.01 + 0.1 * 0.05) / 0.4)
    assert portfolio_return(w, mu) == pytest.approx(w.weights @ mu)

    empty = WeightVector(np.array([0.0, 0.0, 1.0]), part)
    with pytest.raises(EmptyClassError):
        class_return(empty, mu, 0)


def test_benchmark_needs_every_class():
    part = two_singleton_classes()
    portfolio = WeightVector(np.array([0.5, 0.5]), part)
    hollow = WeightVector(np.array([1.0, 0.0]), part)
    with pytest.raises(ValueError, match="positive weight"):
        attribute(portfolio, hollow, np.array([0.01, 0.02]))


def test_attribute_input_validation():
    part = two_singleton_classes()
    other = ClassPartition.from_sizes([2])
    w2 = WeightVector(np.array([0.5, 0.5]), part)
    w_other = WeightVector(np.array([0.5, 0.5]), other)
    with pytest.raises(ValueError, match="different partitions"):
        attribute(w2, w_other, np.array([0.01, 0.02]))
    with pytest.raises(ValueError, match="length"):
        attribute(w2, w2, np.array([0.01]))
    with pytest.raises(ValueError, match="finite"):
        attribute(w2, w2, np.array([0.01, np.nan]))


def test_interaction_alt_forms_agree():
    rng = np.random.default_rng(55)
    for _ in range(100):
        part = ClassPartition.from_sizes(rng.integers(1, 4, size=3))
        n = part.n_assets
        portfolio = WeightVector(rng.dirichlet(np.ones(n)), part)
        bench = WeightVector(rng.dirichlet(np.ones(n)), part)
        mu = rng.normal(0.0, 0.05, size=n)
        report = attribute(portfolio, bench, mu)
        for c in range(part.n_classes):
            direct = report.interaction[c]
            scaled = interaction_alt_form(report, c, form="scaled_selection")
            assert abs(scaled - direct) <= 1e-12
            denom = report.weight_benchmark[c] * (
                report.class_return_benchmark[c] - report.benchmark_return
            )
            if abs(denom) > 1e-12:
                product = interaction_alt_form(report, c, form="product")
                assert abs(product - direct) <= 1e-12


def test_interaction_product_form_degenerate():
    # Equal mu across classes makes Rb_i == Rb, so the product form divides
    # by zero while the scaled form stays defined.
    part = two_singleton_classes()
    portfolio = WeightVector(np.array([0.7, 0.3]), part)
    bench = WeightVector(np.array([0.5, 0.5]), part)
    report = attribute(portfolio, bench, np.array([0.01, 0.01]))
    assert interaction_alt_form(report, 0, form="scaled_selection") == pytest.approx(0.0)
    with pytest.raises(ZeroDivisionError):
        interaction_alt_form(report, 0, form="product")
    with pytest.raises(ValueError, match="unknown interaction form"):
        interaction_alt_form(report, 0, form="nope")


def test_aggregation_error_value():
    # 0.5 * (sum w mu^2 - (sum w mu)^2) at w = (.5, .5), mu = (.01, -.01):
    # weighted second moment 1e-4, mean 0, so the error is 5e-5.
    part = two_singleton_classes()
    w = WeightVector(np.array([0.5, 0.5]), part)
    err = log_return_decomposition_error(w, np.array([0.01, -0.01]))
    assert err == pytest.approx(5e-5, abs=1e-19)
    # constant returns have zero weighted variance
    assert log_return_decomposition_error(w, np.array([0.02, 0.02])) == pytest.approx(
        0.0, abs=1e-18
    )


def test_aggregation_error_nonnegative():
    rng = np.random.default_rng(8)
    part = ClassPartition.from_sizes([3, 2])
    for _ in range(50):
        w = WeightVector(rng.dirichlet(np.ones(5)), part)
        mu = rng.normal(0.0, 0.05, size=5)
        assert log_return_decomposition_error(w, mu) >= -1e-18


def test_report_row_layout():
    part = ClassPartition.from_sizes([2, 1])
    portfolio = WeightVector(np.array([0.5, 0.1, 0.4]), part)
    bench = WeightVector(np.array([0.25, 0.25, 0.5]), part)
    report = attribute(portfolio, bench, np.array([0.04, -0.02, 0.01]))
    row = report.to_row()
    cols = AttributionReport.row_columns(part)
    assert list(row) == cols
    assert row["allocation_total"] == pytest.approx(report.allocation_total)
    assert row["weight_p_1"] == pytest.approx(0.6)
    assert row["excess_return"] == pytest.approx(report.excess_return)
