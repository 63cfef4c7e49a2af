"""Acceptance gate: one test per release criterion, one verdict line each.

Every test exercises the public API end to end and records a single
pass/fail line through the ``acceptance`` fixture, so the run log carries
an auditable verdict per criterion next to the usual pytest output.
"""

import json
import time

import numpy as np

from attribopt import cli
from attribopt.attribution import attribute, interaction_alt_form
from attribopt.backtest import BacktestConfig, run_backtest
from attribopt.cvar import build_etl_lp, empirical_etl, empirical_var, solve_lp
from attribopt.market_data import (
    ClassPartition,
    ReturnPanel,
    WeightVector,
    default_partition,
    equi_weight_benchmark,
    synthesize_panel,
    to_log_returns,
)
from attribopt.risk import max_drawdown, moving_window_metrics, rachev_ratio, summarize
from attribopt.strategies import DailySolve, StrategySpec, solve_day, verify_constraints
from oracles import simplex_grid, tail_loss_grid


def _random_partition(rng, max_classes, max_assets):
    n_classes = int(rng.integers(1, max_classes + 1))
    n_assets = int(rng.integers(n_classes, max_assets + 1))
    sizes = rng.multinomial(n_assets - n_classes, np.full(n_classes, 1.0 / n_classes)) + 1
    return ClassPartition.from_sizes(sizes)


def test_criterion_1_attribution_identities(acceptance):
    """Decomposition and combined-selection identities on random instances."""
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    product_checked = 0
    for i in range(1000):
        part = _random_partition(rng, max_classes=6, max_assets=29)
        n = part.n_assets
        bench = rng.random(n) + 0.05
        bench = WeightVector(bench / bench.sum(), part)
        port = rng.random(n) + 0.02
        if i % 5 == 0 and part.n_classes > 1:
            hollow = int(rng.integers(part.n_classes))
            port[part.class_of == hollow] = 0.0
        port = WeightVector(port / port.sum(), part)
        mu = rng.normal(0.0, 0.02, n)

        report = attribute(port, bench, mu)
        residual = report.excess_return - (
            report.allocation_total + report.selection_total + report.interaction_total
        )
        worst = max(worst, abs(residual))
        combined_direct = report.weight_portfolio * (
            report.class_return_portfolio - report.class_return_benchmark
        )
        worst = max(worst, float(np.max(np.abs(combined_direct - report.combined_selection))))
        for c in range(part.n_classes):
            scaled = interaction_alt_form(report, c, form="scaled_selection")
            worst = max(worst, abs(scaled - report.interaction[c]))
            try:
                product = interaction_alt_form(report, c, form="product")
            except ZeroDivisionError:
                continue
            product_checked += 1
            worst = max(worst, abs(product - report.interaction[c]))
    elapsed = time.perf_counter() - started
    acceptance(
        1,
        "attribution identities",
        worst <= 1e-12 and elapsed < 5.0,
        f"1000 instances, max residual {worst:.2e}, "
        f"{product_checked} product-form checks, {elapsed:.2f}s",
    )


def test_criterion_2_tail_program_vs_grid(acceptance):
    """Unconstrained optimizer never loses to simplex grid search."""
    started = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_over = -np.inf  # optimum minus best grid point; must stay ~ at 0
    worst_gap = -np.inf  # best grid point minus optimum; grid granularity
    grids = {n: simplex_grid(n, step=0.01) for n in (2, 3)}
    for _ in range(200):
        n = int(rng.integers(2, 4))
        n_scen = int(rng.integers(10, 31))
        alpha = float(rng.choice([0.8, 0.95]))
        scen = rng.normal(0.001, 0.03, size=(n_scen, n))
        out = solve_lp(build_etl_lp(scen, alpha))
        assert out.is_optimal
        values = tail_loss_grid(grids[n], scen, alpha)
        best = float(values.min())
        worst_over = max(worst_over, out.objective - best)
        worst_gap = max(worst_gap, best - out.objective)
    elapsed = time.perf_counter() - started
    acceptance(
        2,
        "tail-loss program vs simplex grid",
        worst_over <= 1e-7 and worst_gap <= 1e-2 and elapsed < 60.0,
        f"200 instances, max excess over grid {worst_over:.2e}, "
        f"max gap to grid best {worst_gap:.2e}, {elapsed:.1f}s",
    )


def test_criterion_3_tail_loss_coherence(acceptance):
    """Translation, positive homogeneity, and tail ordering of the estimator."""
    rng = np.random.default_rng(303)
    worst_translation = 0.0
    worst_scaling = 0.0
    worst_order = -np.inf  # max of VaR - ETL; must never exceed round-off
    for _ in range(1000):
        size = int(rng.integers(2, 250))
        samples = rng.normal(0.0, float(rng.uniform(0.001, 0.05)), size)
        alpha = float(rng.uniform(0.5, 0.995))
        shift = float(rng.uniform(-5.0, 5.0))
        scale = float(rng.uniform(0.1, 10.0))
        base = empirical_etl(samples, alpha)
        worst_translation = max(
            worst_translation, abs(empirical_etl(samples + shift, alpha) - (base - shift))
        )
        worst_scaling = max(
            worst_scaling, abs(empirical_etl(samples * scale, alpha) - scale * base)
        )
        worst_order = max(worst_order, empirical_var(samples, alpha) - base)
    acceptance(
        3,
        "tail-loss coherence",
        worst_translation <= 1e-12 and worst_scaling <= 1e-12 and worst_order <= 1e-12,
        f"1000 samples, translation {worst_translation:.2e}, "
        f"scaling {worst_scaling:.2e}, max VaR-ETL {worst_order:.2e}",
    )


def test_criterion_4_constraint_audit(acceptance):
    """Every optimal backtest day re-verifies its constraints from scratch."""
    panel = synthesize_panel(29, 1500, seed=11)
    partition = default_partition(29, 6)
    returns = to_log_returns(panel)
    benchmark = equi_weight_benchmark(partition)
    config = BacktestConfig(window=252)
    data = returns.returns

    worst = 0.0
    n_optimal = 0
    n_fallback = 0
    fallback_exact = True
    for sid in ("P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8"):
        spec = StrategySpec(sid, alpha=0.95)
        result = run_backtest(returns, partition, spec, config)
        for k in range(result.n_days):
            if result.fallback_mask[k]:
                n_fallback += 1
                prior = benchmark.weights if k == 0 else result.weights[k - 1]
                fallback_exact &= bool(np.array_equal(result.weights[k], prior))
                continue
            n_optimal += 1
            t = config.window + k
            mu = data[t - config.window : t].mean(axis=0)
            solve = DailySolve(
                "optimal", WeightVector(result.weights[k].copy(), partition), (0.0,), 1, ()
            )
            audit = verify_constraints(spec, solve, benchmark, mu)
            worst = max(worst, audit.max_violation)
    n_days = returns.n_days - config.window
    acceptance(
        4,
        "constraint audit over a 29-asset panel",
        worst <= 1e-6 and fallback_exact,
        f"8 strategies x {n_days} days: {n_optimal} optimal days, "
        f"max violation {worst:.2e}; {n_fallback} fallback days, prior weights exact",
    )


def test_criterion_5_constraint_nesting(acceptance):
    """Adding constraint families never improves the optimal tail loss."""
    rng = np.random.default_rng(505)
    worst = -np.inf
    checked = 0
    attempts = 0
    while checked < 50 and attempts < 200:
        attempts += 1
        part = _random_partition(rng, max_classes=5, max_assets=15)
        bench = equi_weight_benchmark(part)
        n_scen = int(rng.integers(120, 280))
        scen = rng.normal(0.0004, 0.012, size=(n_scen, part.n_assets))
        mu = scen.mean(axis=0)
        solves = [
            solve_day(StrategySpec(sid, alpha=0.95), scen, bench, mu, bench)
            for sid in ("P0", "P1", "P2")
        ]
        if any(s.is_fallback for s in solves):
            continue
        checked += 1
        unconstrained = solves[0].objectives[-1]
        total_allocation = solves[1].objectives[-1]
        two_step_stage1 = solves[2].objectives[0]
        worst = max(worst, unconstrained - total_allocation)
        worst = max(worst, total_allocation - two_step_stage1)
    acceptance(
        5,
        "constraint nesting",
        checked == 50 and worst <= 1e-6,
        f"{checked} feasible instances, max nesting violation {worst:.2e}",
    )


def test_criterion_6_backtest_accounting(acceptance):
    """Day counts, causality, and value-path reconstruction."""
    panel = synthesize_panel(4, 3241, seed=5)
    partition = default_partition(4, 2)
    returns = to_log_returns(panel)
    spec = StrategySpec("P0", alpha=0.95)
    config = BacktestConfig(window=1008)
    result = run_backtest(returns, partition, spec, config)
    count_ok = (
        returns.n_days == 3240
        and result.n_days == 2232
        and result.dates.equals(returns.dates[config.window :])
    )

    recomputed = np.einsum("ij,ij->i", result.weights, returns.returns[config.window :])
    rebuilt = config.initial_price * np.exp(np.cumsum(recomputed))
    recon_gap = float(np.max(np.abs(result.cumulative - rebuilt)))

    # Shock one return day; nothing at or before it may move.
    t0 = 1800
    k0 = t0 - config.window
    bumped = returns.returns.copy()
    bumped[t0] = bumped[t0] * 3.0 - 0.04
    shocked = run_backtest(
        ReturnPanel(returns.dates, list(returns.tickers), bumped), partition, spec, config
    )
    causal_ok = (
        np.array_equal(shocked.weights[: k0 + 1], result.weights[: k0 + 1])
        and np.array_equal(shocked.log_returns[:k0], result.log_returns[:k0])
        and shocked.log_returns[k0] != result.log_returns[k0]
        and not np.array_equal(shocked.weights[k0 + 1 :], result.weights[k0 + 1 :])
    )
    acceptance(
        6,
        "backtest accounting",
        count_ok and recon_gap <= 1e-10 and causal_ok,
        f"2232 evaluated days: {count_ok}; reconstruction gap {recon_gap:.2e}; "
        f"causality shock at day {k0}: {causal_ok}",
    )


def test_criterion_7_risk_measure_units(acceptance):
    """Hand-checked drawdown, symmetric Rachev, and window consistency."""
    mdd = max_drawdown(np.array([1.0, 1.2, 0.9, 1.1, 0.8]))
    mdd_gap = abs(mdd - 1.0 / 3.0)

    rng = np.random.default_rng(707)
    half = rng.normal(0.0, 0.02, 400)
    symmetric = np.concatenate([half, -half])
    rachev_gap = max(
        abs(rachev_ratio(symmetric, alpha=0.95, beta=0.95) - 1.0),
        abs(
            rachev_ratio(
                np.array([-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0]), alpha=0.9, beta=0.9
            )
            - 1.0
        ),
    )

    panel = synthesize_panel(5, 130, seed=3)
    partition = default_partition(5, 2)
    returns = to_log_returns(panel)
    result = run_backtest(
        returns, partition, StrategySpec("P0", alpha=0.95), BacktestConfig(window=80)
    )
    full = summarize(result, 0.0, alpha=0.9, beta=0.9)
    moving = moving_window_metrics(result, 0.0, window=result.n_days, alpha=0.9, beta=0.9)
    window_ok = (
        len(moving) == 1
        and moving[0].max_drawdown == full.max_drawdown
        and moving[0].sharpe == full.sharpe
        and moving[0].rachev == full.rachev
    )
    acceptance(
        7,
        "risk measure units",
        mdd_gap <= 1e-12 and rachev_gap <= 1e-12 and window_ok,
        f"drawdown gap {mdd_gap:.2e}, symmetric Rachev gap {rachev_gap:.2e}, "
        f"full-length window equals full period: {window_ok}",
    )


def test_criterion_8_grid_determinism_and_runtime(acceptance, tmp_path):
    """Full strategy grid on the large panel: fast, and replayable byte for byte."""
    fixtures = tmp_path / "fixtures"
    assert (
        cli.main(
            ["synth", "--assets", "29", "--days", "3240", "--seed", "42",
             "--classes", "6", "--out", str(fixtures)]
        )
        == 0
    )
    inputs = [
        "--prices", str(fixtures / "prices.csv"),
        "--partition", str(fixtures / "partition.json"),
        "--riskfree", str(fixtures / "riskfree.csv"),
    ]

    grid = tmp_path / "grid"
    started = time.perf_counter()
    rc = cli.main(
        ["backtest", *inputs,
         "--strategies", "P0,P1,P2,P3,P4,P5,P6,P7,P8",
         "--alphas", "0.95,0.99", "--window", "1008", "--seed", "42",
         "--out", str(grid)]
    )
    elapsed = time.perf_counter() - started

    manifest = json.loads((grid / "manifest.json").read_text())
    runs = [r for r in manifest["runs"] if r["run"] != "benchmark"]
    grid_ok = (
        rc == 0
        and len(runs) == 18
        and all(r["n_days"] == 2231 for r in runs)
        and manifest["inputs"]["prices"]["sha256"] == cli._sha256(fixtures / "prices.csv")
    )

    # Replay part of the grid from nothing but the manifest parameters and
    # the digested inputs; artifacts must come back byte-identical.
    params = manifest["parameters"]
    replay = tmp_path / "replay"
    rc2 = cli.main(
        ["backtest", *inputs,
         "--strategies", "P0,P7",
         "--alphas", ",".join(f"{a:g}" for a in params["alphas"]),
         "--window", str(params["window"]), "--seed", str(params["seed"]),
         "--out", str(replay)]
    )
    identical = rc2 == 0
    compared = 0
    for run_dir in ("P0_a0.95", "P0_a0.99", "P7_a0.95", "P7_a0.99", "benchmark"):
        for name in ("weights.csv", "series.csv", "attribution.csv", "summary.json"):
            same = (replay / run_dir / name).read_bytes() == (grid / run_dir / name).read_bytes()
            identical = identical and same
            compared += 1
    acceptance(
        8,
        "grid determinism and runtime",
        grid_ok and identical and elapsed < 1800.0,
        f"18 runs in {elapsed / 60.0:.1f} min; "
        f"{compared} replayed artifacts byte-identical: {identical}",
    )
